#include "fuzzdl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "fuzzdl/errors.hpp"
#include "fuzzdl/model.hpp"
#include "fuzzdl/rng.hpp"
#include "fuzzdl/sampler.hpp"
#include "fuzzdl/training.hpp"

namespace fuzzdl {

namespace {

struct Slot {
  double* x;
  const double* g;
};

void collect(Matrix& x, const Matrix& g, std::vector<Slot>& out) {
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    out.push_back({&x.data[i], &g.data[i]});
  }
}

void collect(std::vector<double>& x, const std::vector<double>& g,
             std::vector<Slot>& out) {
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back({&x[i], &g[i]});
}

std::vector<Slot> all_slots(ParameterStore& p, const GradientBundle& grads) {
  std::vector<Slot> out;
  collect(p.entity_emb, grads.d_entity, out);
  collect(p.concept_emb, grads.d_concept, out);
  collect(p.relation_emb, grads.d_relation, out);
  collect(p.theta.w1, grads.d_theta.w1, out);
  collect(p.theta.b1, grads.d_theta.b1, out);
  collect(p.theta.w2, grads.d_theta.w2, out);
  collect(p.theta.b2, grads.d_theta.b2, out);
  collect(p.omega.w1, grads.d_omega.w1, out);
  collect(p.omega.b1, grads.d_omega.b1, out);
  collect(p.omega.w2, grads.d_omega.w2, out);
  collect(p.omega.b2, grads.d_omega.b2, out);
  return out;
}

QueryPtr random_ast(Rng& rng, const std::string& shape, int entities,
                    int relations) {
  auto e = [&] { return static_cast<int>(rng.index(entities)); };
  auto r = [&] { return static_cast<int>(rng.index(relations)); };
  auto one_p = [&] { return make_proj(r(), make_anchor(e())); };
  if (shape == "1p") return one_p();
  if (shape == "2p") return make_proj(r(), one_p());
  if (shape == "3p") return make_proj(r(), make_proj(r(), one_p()));
  if (shape == "2i") return make_and({one_p(), one_p()});
  if (shape == "3i") return make_and({one_p(), one_p(), one_p()});
  if (shape == "pi") return make_and({make_proj(r(), one_p()), one_p()});
  if (shape == "ip") return make_proj(r(), make_and({one_p(), one_p()}));
  if (shape == "2u") return make_or({one_p(), one_p()});
  if (shape == "up") return make_proj(r(), make_or({one_p(), one_p()}));
  throw DataError("unknown query shape '" + shape + "'");
}

}  // namespace

GradCheckResult run_gradcheck(const GradCheckOptions& opts) {
  GradCheckResult result;
  Rng master(opts.seed);
  int item_no = 0;

  auto run_item = [&](const std::string& name, auto&& fill) {
    Rng rng = master.fork(100 + item_no);
    ParameterStore params =
        init_params(opts.entities, opts.concepts, opts.relations, opts.d,
                    opts.seed * 977 + static_cast<std::uint64_t>(item_no));
    params.tnorm_kind = opts.tnorm_kind;
    ++item_no;

    std::deque<QueryInstance> storage;
    StepBatch batch;
    fill(rng, storage, batch);

    GradientBundle analytic(params);
    TaskLosses tasks;
    loss_and_gradients(params, batch, opts.m, analytic, tasks);

    GradientBundle scratch(params);
    auto slots = all_slots(params, analytic);
    double max_err = 0.0;
    for (const Slot& s : slots) {
      const double x0 = *s.x;
      const double h = 1e-6 * std::max(1.0, std::abs(x0));
      *s.x = x0 + h;
      scratch.clear();
      const double lp = loss_and_gradients(params, batch, opts.m, scratch, tasks);
      *s.x = x0 - h;
      scratch.clear();
      const double lm = loss_and_gradients(params, batch, opts.m, scratch, tasks);
      *s.x = x0;
      const double fd = (lp - lm) / (2.0 * h);
      const double err = std::abs(*s.g - fd) /
                         std::max({std::abs(*s.g), std::abs(fd), 1e-4});
      max_err = std::max(max_err, err);
    }
    result.items.push_back({name, max_err});
    result.max_rel_err = std::max(result.max_rel_err, max_err);
  };

  auto query_targets = [&](Rng& rng, std::deque<QueryInstance>& storage,
                           const std::string& shape, int pool,
                           std::vector<QueryTarget>& dst) {
    for (int i = 0; i < 2; ++i) {
      storage.push_back(QueryInstance{
          random_ast(rng, shape, opts.entities, opts.relations), shape, {}, {}});
      QueryTarget t;
      t.instance = &storage.back();
      t.positive = static_cast<int>(rng.index(pool));
      t.negatives = sample_negative_ids(rng, pool, t.positive, opts.m);
      dst.push_back(std::move(t));
    }
  };

  for (const auto& shape : query_shapes()) {
    run_item("con/" + shape, [&](Rng& rng, std::deque<QueryInstance>& storage,
                                 StepBatch& batch) {
      query_targets(rng, storage, shape, opts.concepts, batch.con);
    });
  }
  for (const auto& shape : query_shapes()) {
    run_item("ent/" + shape, [&](Rng& rng, std::deque<QueryInstance>& storage,
                                 StepBatch& batch) {
      query_targets(rng, storage, shape, opts.entities, batch.ent);
    });
  }
  run_item("sub", [&](Rng& rng, std::deque<QueryInstance>&, StepBatch& batch) {
    for (int i = 0; i < 2; ++i) {
      PairTarget t;
      t.positive = {static_cast<int>(rng.index(opts.concepts)),
                    static_cast<int>(rng.index(opts.concepts))};
      for (int k = 0; k < opts.m; ++k) {
        if (rng.coin()) {
          t.negatives.push_back(
              {sample_negative_ids(rng, opts.concepts, t.positive.first, 1)[0],
               t.positive.second});
        } else {
          t.negatives.push_back(
              {t.positive.first,
               sample_negative_ids(rng, opts.concepts, t.positive.second, 1)[0]});
        }
      }
      batch.sub.push_back(std::move(t));
    }
  });
  run_item("ins", [&](Rng& rng, std::deque<QueryInstance>&, StepBatch& batch) {
    for (int i = 0; i < 2; ++i) {
      PairTarget t;
      t.positive = {static_cast<int>(rng.index(opts.entities)),
                    static_cast<int>(rng.index(opts.concepts))};
      const int half = (opts.m + 1) / 2;
      for (int k = 0; k < opts.m; ++k) {
        if (k < half) {
          t.negatives.push_back(
              {t.positive.first,
               sample_negative_ids(rng, opts.concepts, t.positive.second, 1)[0]});
        } else {
          t.negatives.push_back(
              {sample_negative_ids(rng, opts.entities, t.positive.first, 1)[0],
               t.positive.second});
        }
      }
      batch.ins.push_back(std::move(t));
    }
  });

  return result;
}

}  // namespace fuzzdl
