#include "fuzzdl/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "fuzzdl/errors.hpp"
#include "fuzzdl/eval.hpp"

namespace fuzzdl {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw DataError("learning rate must be > 0");
  if (d < 1) throw DataError("embedding dimension must be >= 1");
  if (batch_size < 1) throw DataError("batch size must be >= 1");
  if (m < 1) throw DataError("negatives per positive must be >= 1");
  if (max_steps < 1) throw DataError("max steps must be >= 1");
  if (patience < 1) throw DataError("patience must be >= 1");
  if (valid_interval < 1) throw DataError("validation interval must be >= 1");
  if (!(gamma > 0.0)) throw DataError("margin gamma must be > 0");
  if (!(eps > 0.0)) throw DataError("normalization floor must be > 0");
  if (!(p_norm >= 1.0)) throw DataError("norm exponent must be >= 1");
}

std::vector<int> sample_negative_ids(Rng& rng, int pool, int exclude, int m) {
  if (pool <= 1) {
    throw DataError("cannot corrupt: candidate pool has " +
                    std::to_string(pool) + " element(s)");
  }
  std::vector<int> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) {
    // Uniform over pool-1 ids; shift to skip the excluded one.
    int draw = static_cast<int>(rng.index(static_cast<std::uint64_t>(pool) - 1));
    if (draw >= exclude) ++draw;
    out.push_back(draw);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss + gradients

namespace {

double log_sigmoid(double z) {
  // log sigma(z) = -log(1 + e^-z), stable on both tails.
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

void check_finite(double s, const char* task) {
  if (!std::isfinite(s)) {
    throw DivergenceError(std::string("non-finite ") + task + " score");
  }
}

// dL/dS+ and dL/dS- for one (positive, negatives) group under the pair
// weight `w` = 1 / (4 m B_task).
struct PairGrads {
  double d_pos = 0.0;
  std::vector<double> d_neg;
  double loss_sum = 0.0;  // sum of -log sigma(S+ - S-)
};

PairGrads pair_grads(double s_pos, const std::vector<double>& s_neg,
                     double w) {
  PairGrads g;
  g.d_neg.resize(s_neg.size());
  for (std::size_t i = 0; i < s_neg.size(); ++i) {
    const double delta = s_pos - s_neg[i];
    g.loss_sum += -log_sigmoid(delta);
    const double slope = sigmoid(-delta);  // d(-log sigma(x))/dx = -sigma(-x)
    g.d_pos += -slope * w;
    g.d_neg[i] = slope * w;
  }
  return g;
}

}  // namespace

double loss_and_gradients(const ParameterStore& params, const StepBatch& batch,
                          int m, GradientBundle& grads, TaskLosses& tasks) {
  tasks = TaskLosses{};
  double total = 0.0;
  const double quarter = 0.25;

  // --- Con: concept answers against the query's fuzzy set.
  if (!batch.con.empty()) {
    const double w = quarter / (static_cast<double>(m) * batch.con.size());
    double task_sum = 0.0;
    for (const auto& target : batch.con) {
      FuzzyTrace trace;
      query_fuzzy_set_trace(params, target.instance->ast, trace);
      const FuzzySet& q_fs = trace.root_value();

      FuzzySet pos_fs = concept_fuzzy_set(params, target.positive);
      const double s_pos = score_concept(params, q_fs, pos_fs);
      check_finite(s_pos, "Con");
      std::vector<FuzzySet> neg_fs;
      std::vector<double> s_neg;
      neg_fs.reserve(target.negatives.size());
      for (int c : target.negatives) {
        neg_fs.push_back(concept_fuzzy_set(params, c));
        s_neg.push_back(score_concept(params, q_fs, neg_fs.back()));
        check_finite(s_neg.back(), "Con");
      }
      PairGrads g = pair_grads(s_pos, s_neg, w);
      task_sum += g.loss_sum;

      std::vector<double> dq(q_fs.size(), 0.0);
      std::vector<double> dc(q_fs.size(), 0.0);
      score_concept_backward(params, q_fs, pos_fs, g.d_pos, dq, dc);
      concept_fuzzy_set_backward(params, target.positive, pos_fs, dc, grads);
      for (std::size_t i = 0; i < neg_fs.size(); ++i) {
        std::fill(dc.begin(), dc.end(), 0.0);
        score_concept_backward(params, q_fs, neg_fs[i], g.d_neg[i], dq, dc);
        concept_fuzzy_set_backward(params, target.negatives[i], neg_fs[i], dc,
                                   grads);
      }
      query_fuzzy_set_backward(params, trace, dq, grads);
    }
    tasks.con = task_sum / (static_cast<double>(m) * batch.con.size());
    total += quarter * tasks.con;
  }

  // --- Ent: entity answers against the query embedding.
  if (!batch.ent.empty()) {
    const double w = quarter / (static_cast<double>(m) * batch.ent.size());
    double task_sum = 0.0;
    for (const auto& target : batch.ent) {
      EntityTrace trace;
      query_embedding_trace(params, target.instance->ast, trace);
      const std::vector<double>& q = trace.root_value();

      const double s_pos = score_entity(params, q, target.positive);
      check_finite(s_pos, "Ent");
      std::vector<double> s_neg;
      for (int e : target.negatives) {
        s_neg.push_back(score_entity(params, q, e));
        check_finite(s_neg.back(), "Ent");
      }
      PairGrads g = pair_grads(s_pos, s_neg, w);
      task_sum += g.loss_sum;

      std::vector<double> dq(q.size(), 0.0);
      score_entity_backward(params, q, target.positive, g.d_pos, dq, grads);
      for (std::size_t i = 0; i < target.negatives.size(); ++i) {
        score_entity_backward(params, q, target.negatives[i], g.d_neg[i], dq,
                              grads);
      }
      query_embedding_backward(params, trace, dq, grads);
    }
    tasks.ent = task_sum / (static_cast<double>(m) * batch.ent.size());
    total += quarter * tasks.ent;
  }

  // --- Sub: subsumption axioms through the theta network.
  if (!batch.sub.empty()) {
    const double w = quarter / (static_cast<double>(m) * batch.sub.size());
    double task_sum = 0.0;
    std::vector<double> x, hidden;
    for (const auto& target : batch.sub) {
      const double s_pos = score_subsumption_trace(
          params, target.positive.first, target.positive.second, x, hidden);
      check_finite(s_pos, "Sub");
      std::vector<double> s_neg;
      for (auto [c1, c2] : target.negatives) {
        s_neg.push_back(score_subsumption(params, c1, c2));
        check_finite(s_neg.back(), "Sub");
      }
      PairGrads g = pair_grads(s_pos, s_neg, w);
      task_sum += g.loss_sum;

      score_subsumption_backward(params, target.positive.first,
                                 target.positive.second, x, hidden, g.d_pos,
                                 grads);
      for (std::size_t i = 0; i < target.negatives.size(); ++i) {
        auto [c1, c2] = target.negatives[i];
        score_subsumption_trace(params, c1, c2, x, hidden);
        score_subsumption_backward(params, c1, c2, x, hidden, g.d_neg[i],
                                   grads);
      }
    }
    tasks.sub = task_sum / (static_cast<double>(m) * batch.sub.size());
    total += quarter * tasks.sub;
  }

  // --- Ins: instantiation pairs (entity, concept).
  if (!batch.ins.empty()) {
    const double w = quarter / (static_cast<double>(m) * batch.ins.size());
    double task_sum = 0.0;
    for (const auto& target : batch.ins) {
      const double s_pos = score_instantiation(params, target.positive.second,
                                               target.positive.first);
      check_finite(s_pos, "Ins");
      std::vector<double> s_neg;
      for (auto [e, c] : target.negatives) {
        s_neg.push_back(score_instantiation(params, c, e));
        check_finite(s_neg.back(), "Ins");
      }
      PairGrads g = pair_grads(s_pos, s_neg, w);
      task_sum += g.loss_sum;

      score_instantiation_backward(params, target.positive.second,
                                   target.positive.first, g.d_pos, grads);
      for (std::size_t i = 0; i < target.negatives.size(); ++i) {
        auto [e, c] = target.negatives[i];
        score_instantiation_backward(params, c, e, g.d_neg[i], grads);
      }
    }
    tasks.ins = task_sum / (static_cast<double>(m) * batch.ins.size());
    total += quarter * tasks.ins;
  }

  if (!std::isfinite(total)) throw DivergenceError("non-finite loss");
  return total;
}

// ---------------------------------------------------------------------------
// Adam

AdamState::AdamState(const ParameterStore& params)
    : m_entity(params.entity_emb.rows, params.entity_emb.cols),
      v_entity(params.entity_emb.rows, params.entity_emb.cols),
      m_concept(params.concept_emb.rows, params.concept_emb.cols),
      v_concept(params.concept_emb.rows, params.concept_emb.cols),
      m_relation(params.relation_emb.rows, params.relation_emb.cols),
      v_relation(params.relation_emb.rows, params.relation_emb.cols),
      t_entity(params.entity_emb.rows, 0),
      t_concept(params.concept_emb.rows, 0),
      t_relation(params.relation_emb.rows, 0) {
  auto zero_like = [](const MlpParams& src, MlpParams& dst) {
    dst.w1 = Matrix(src.w1.rows, src.w1.cols);
    dst.b1.assign(src.b1.size(), 0.0);
    dst.w2 = Matrix(src.w2.rows, src.w2.cols);
    dst.b2.assign(src.b2.size(), 0.0);
  };
  zero_like(params.theta, m_theta);
  zero_like(params.theta, v_theta);
  zero_like(params.omega, m_omega);
  zero_like(params.omega, v_omega);
}

namespace {

void adam_update_span(double* x, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps_adam, std::int64_t t) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < n; ++k) {
    m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
    v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
    const double m_hat = m[k] / bc1;
    const double v_hat = v[k] / bc2;
    x[k] -= lr * m_hat / (std::sqrt(v_hat) + eps_adam);
  }
}

void adam_update_rows(Matrix& x, const Matrix& g, Matrix& m, Matrix& v,
                      const std::vector<char>& touched,
                      std::vector<std::int64_t>& t, double lr, double beta1,
                      double beta2, double eps_adam) {
  for (int r = 0; r < x.rows; ++r) {
    if (!touched[r]) continue;  // lazy: untouched rows keep stale moments
    ++t[r];
    adam_update_span(x.row(r), g.row(r), m.row(r), v.row(r),
                     static_cast<std::size_t>(x.cols), lr, beta1, beta2,
                     eps_adam, t[r]);
  }
}

void adam_update_mlp(MlpParams& x, const MlpParams& g, MlpParams& m,
                     MlpParams& v, double lr, double beta1, double beta2,
                     double eps_adam, std::int64_t t) {
  adam_update_span(x.w1.data.data(), g.w1.data.data(), m.w1.data.data(),
                   v.w1.data.data(), x.w1.data.size(), lr, beta1, beta2,
                   eps_adam, t);
  adam_update_span(x.b1.data(), g.b1.data(), m.b1.data(), v.b1.data(),
                   x.b1.size(), lr, beta1, beta2, eps_adam, t);
  adam_update_span(x.w2.data.data(), g.w2.data.data(), m.w2.data.data(),
                   v.w2.data.data(), x.w2.data.size(), lr, beta1, beta2,
                   eps_adam, t);
  adam_update_span(x.b2.data(), g.b2.data(), m.b2.data(), v.b2.data(),
                   x.b2.size(), lr, beta1, beta2, eps_adam, t);
}

}  // namespace

void adam_step(ParameterStore& params, AdamState& state,
               const GradientBundle& grads, double lr) {
  adam_update_rows(params.entity_emb, grads.d_entity, state.m_entity,
                   state.v_entity, grads.touched_entity, state.t_entity, lr,
                   state.beta1, state.beta2, state.eps_adam);
  adam_update_rows(params.concept_emb, grads.d_concept, state.m_concept,
                   state.v_concept, grads.touched_concept, state.t_concept, lr,
                   state.beta1, state.beta2, state.eps_adam);
  adam_update_rows(params.relation_emb, grads.d_relation, state.m_relation,
                   state.v_relation, grads.touched_relation, state.t_relation,
                   lr, state.beta1, state.beta2, state.eps_adam);
  ++state.t_dense;
  adam_update_mlp(params.theta, grads.d_theta, state.m_theta, state.v_theta,
                  lr, state.beta1, state.beta2, state.eps_adam,
                  state.t_dense);
  adam_update_mlp(params.omega, grads.d_omega, state.m_omega, state.v_omega,
                  lr, state.beta1, state.beta2, state.eps_adam,
                  state.t_dense);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

// Endless deterministic pass over a fixed item list, reshuffled per cycle.
class Stream {
 public:
  Stream(std::size_t size, Rng rng) : order_(size), rng_(rng) {
    for (std::size_t i = 0; i < size; ++i) order_[i] = i;
    rng_.shuffle(order_);
  }
  std::size_t next() {
    if (cursor_ == order_.size()) {
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    return order_[cursor_++];
  }
  Rng& rng() { return rng_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

double mean_mrr(const RankingReport& report, const std::string& level) {
  const MetricRow* row = report.find(level, "avg");
  return row ? row->mrr : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double validation_metric(const ParameterStore& params,
                         const std::vector<QueryInstance>& instances) {
  RankingReport report = evaluate(params, instances);
  const double abox = mean_mrr(report, "abox");
  const double tbox = mean_mrr(report, "tbox");
  if (std::isnan(tbox)) return abox;
  return 0.5 * (abox + tbox);
}

TrainResult train(const KnowledgeBase& train_kb,
                  const std::vector<QueryInstance>& train_instances,
                  const std::vector<QueryInstance>& valid_instances,
                  const TrainConfig& config, std::ostream* log) {
  config.validate();
  TrainResult result;

  const int num_entities = train_kb.vocab.num_entities();
  const int num_concepts = train_kb.vocab.num_concepts();
  const int num_relations = train_kb.vocab.num_relations();
  if (train_instances.empty()) {
    throw DataError("entity task stream is empty: no training instances");
  }

  // Task activation: Ent always runs; the others drop out (with a warning)
  // when their stream has nothing to offer.
  std::vector<std::size_t> con_items;
  for (std::size_t i = 0; i < train_instances.size(); ++i) {
    if (!train_instances[i].concept_answers.empty()) con_items.push_back(i);
  }
  bool con_active = !con_items.empty() && num_concepts > 0;
  if (!con_active) {
    result.warnings.push_back(
        "concept task disabled: no instances carry concept answers");
  }
  bool sub_active = config.use_sub && !train_kb.tbox.empty();
  if (config.use_sub && train_kb.tbox.empty()) {
    result.warnings.push_back("subsumption task disabled: empty tbox");
  }
  bool ins_active = config.use_ins && !train_kb.abox_ec.empty();
  if (config.use_ins && train_kb.abox_ec.empty()) {
    result.warnings.push_back(
        "instantiation task disabled: no instantiation pairs");
  }

  ParameterStore params = init_params(num_entities, num_concepts,
                                      num_relations, config.d, config.seed);
  params.gamma = config.gamma;
  params.eps = config.eps;
  params.p_norm = config.p_norm;
  params.tnorm_kind = config.tnorm_kind;
  AdamState adam(params);
  GradientBundle grads(params);

  Rng master(config.seed);
  Stream con_stream(con_items.size(), master.fork(1));
  Stream ent_stream(train_instances.size(), master.fork(2));
  Stream sub_stream(train_kb.tbox.size(), master.fork(3));
  Stream ins_stream(train_kb.abox_ec.size(), master.fork(4));
  Rng neg_con = master.fork(5), neg_ent = master.fork(6),
      neg_sub = master.fork(7), neg_ins = master.fork(8);

  EarlyStopper stopper(config.patience);
  bool have_best = false;
  const bool validate =
      !valid_instances.empty() && config.valid_interval >= 1;

  auto build_batch = [&](StepBatch& batch) {
    batch = StepBatch{};
    if (con_active) {
      for (int b = 0; b < config.batch_size; ++b) {
        const QueryInstance& inst = train_instances[con_items[con_stream.next()]];
        QueryTarget t;
        t.instance = &inst;
        t.positive = inst.concept_answers[con_stream.rng().index(
            inst.concept_answers.size())];
        t.negatives = sample_negative_ids(neg_con, num_concepts, t.positive,
                                          config.m);
        batch.con.push_back(std::move(t));
      }
    }
    for (int b = 0; b < config.batch_size; ++b) {
      const QueryInstance& inst = train_instances[ent_stream.next()];
      QueryTarget t;
      t.instance = &inst;
      t.positive = inst.entity_answers[ent_stream.rng().index(
          inst.entity_answers.size())];
      t.negatives =
          sample_negative_ids(neg_ent, num_entities, t.positive, config.m);
      batch.ent.push_back(std::move(t));
    }
    if (sub_active) {
      for (int b = 0; b < config.batch_size; ++b) {
        PairTarget t;
        t.positive = train_kb.tbox[sub_stream.next()];
        for (int i = 0; i < config.m; ++i) {
          // Either side corrupted with equal probability.
          if (neg_sub.coin()) {
            int c = sample_negative_ids(neg_sub, num_concepts,
                                        t.positive.first, 1)[0];
            t.negatives.push_back({c, t.positive.second});
          } else {
            int c = sample_negative_ids(neg_sub, num_concepts,
                                        t.positive.second, 1)[0];
            t.negatives.push_back({t.positive.first, c});
          }
        }
        batch.sub.push_back(std::move(t));
      }
    }
    if (ins_active) {
      for (int b = 0; b < config.batch_size; ++b) {
        PairTarget t;
        t.positive = train_kb.abox_ec[ins_stream.next()];
        const int half = (config.m + 1) / 2;  // first half corrupts concepts
        for (int i = 0; i < config.m; ++i) {
          if (i < half) {
            int c = sample_negative_ids(neg_ins, num_concepts,
                                        t.positive.second, 1)[0];
            t.negatives.push_back({t.positive.first, c});
          } else {
            int e = sample_negative_ids(neg_ins, num_entities,
                                        t.positive.first, 1)[0];
            t.negatives.push_back({e, t.positive.second});
          }
        }
        batch.ins.push_back(std::move(t));
      }
    }
  };

  StepBatch batch;
  TaskLosses tasks;
  for (int step = 1; step <= config.max_steps; ++step) {
    build_batch(batch);
    grads.clear();
    const double loss = loss_and_gradients(params, batch, config.m, grads, tasks);
    adam_step(params, adam, grads, config.lr);
    result.steps_run = step;

    if (log) {
      nlohmann::ordered_json j;
      j["step"] = step;
      j["loss"] = loss;
      if (!std::isnan(tasks.con)) j["con"] = tasks.con;
      if (!std::isnan(tasks.ent)) j["ent"] = tasks.ent;
      if (!std::isnan(tasks.sub)) j["sub"] = tasks.sub;
      if (!std::isnan(tasks.ins)) j["ins"] = tasks.ins;
      j["lr"] = config.lr;
      *log << j.dump() << '\n';
    }

    if (validate && step % config.valid_interval == 0) {
      RankingReport report = evaluate(params, valid_instances);
      const double abox = mean_mrr(report, "abox");
      const double tbox = mean_mrr(report, "tbox");
      const double metric = std::isnan(tbox) ? abox : 0.5 * (abox + tbox);
      const bool improved = stopper.observe(metric);
      if (improved) {
        result.best_params = params;
        result.best_step = step;
        result.best_metric = metric;
        have_best = true;
      }
      if (log) {
        nlohmann::ordered_json j;
        j["step"] = step;
        if (!std::isnan(abox)) j["ent_mrr"] = abox;
        if (!std::isnan(tbox)) j["con_mrr"] = tbox;
        j["metric"] = metric;
        j["best"] = improved;
        *log << j.dump() << '\n';
      }
      if (stopper.should_stop()) {
        result.stopped_early = true;
        break;
      }
    }
  }

  if (!have_best) {
    // Validation never ran: keep the final state, best_step stays 0.
    result.best_params = params;
  }
  return result;
}

}  // namespace fuzzdl
