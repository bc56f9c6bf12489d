#include "fuzzdl/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fuzzdl/errors.hpp"

namespace fuzzdl {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// ---------------------------------------------------------------------------
// GradientBundle

GradientBundle::GradientBundle(const ParameterStore& params)
    : d_entity(params.entity_emb.rows, params.entity_emb.cols),
      d_concept(params.concept_emb.rows, params.concept_emb.cols),
      d_relation(params.relation_emb.rows, params.relation_emb.cols),
      touched_entity(params.entity_emb.rows, 0),
      touched_concept(params.concept_emb.rows, 0),
      touched_relation(params.relation_emb.rows, 0) {
  d_theta.w1 = Matrix(params.theta.w1.rows, params.theta.w1.cols);
  d_theta.b1.assign(params.theta.b1.size(), 0.0);
  d_theta.w2 = Matrix(params.theta.w2.rows, params.theta.w2.cols);
  d_theta.b2.assign(params.theta.b2.size(), 0.0);
  d_omega.w1 = Matrix(params.omega.w1.rows, params.omega.w1.cols);
  d_omega.b1.assign(params.omega.b1.size(), 0.0);
  d_omega.w2 = Matrix(params.omega.w2.rows, params.omega.w2.cols);
  d_omega.b2.assign(params.omega.b2.size(), 0.0);
}

void GradientBundle::clear() {
  std::fill(d_entity.data.begin(), d_entity.data.end(), 0.0);
  std::fill(d_concept.data.begin(), d_concept.data.end(), 0.0);
  std::fill(d_relation.data.begin(), d_relation.data.end(), 0.0);
  std::fill(touched_entity.begin(), touched_entity.end(), 0);
  std::fill(touched_concept.begin(), touched_concept.end(), 0);
  std::fill(touched_relation.begin(), touched_relation.end(), 0);
  auto zero_mlp = [](MlpParams& m) {
    std::fill(m.w1.data.begin(), m.w1.data.end(), 0.0);
    std::fill(m.b1.begin(), m.b1.end(), 0.0);
    std::fill(m.w2.data.begin(), m.w2.data.end(), 0.0);
    std::fill(m.b2.begin(), m.b2.end(), 0.0);
  };
  zero_mlp(d_theta);
  zero_mlp(d_omega);
  touched_theta = touched_omega = false;
}

void GradientBundle::add_entity_row(int id, const double* g, int d,
                                    double scale) {
  double* dst = d_entity.row(id);
  for (int k = 0; k < d; ++k) dst[k] += scale * g[k];
  touched_entity[id] = 1;
}

void GradientBundle::add_concept_row(int id, const double* g, int d,
                                     double scale) {
  double* dst = d_concept.row(id);
  for (int k = 0; k < d; ++k) dst[k] += scale * g[k];
  touched_concept[id] = 1;
}

void GradientBundle::add_relation_row(int id, const double* g, int d,
                                      double scale) {
  double* dst = d_relation.row(id);
  for (int k = 0; k < d; ++k) dst[k] += scale * g[k];
  touched_relation[id] = 1;
}

std::vector<double> mlp_backward(const MlpParams& mlp,
                                 const std::vector<double>& x,
                                 const std::vector<double>& hidden_pre,
                                 const std::vector<double>& dy,
                                 MlpParams& dmlp) {
  const int in = mlp.in_dim(), hidden = mlp.hidden_dim(), out = mlp.out_dim();
  std::vector<double> dh(hidden, 0.0);
  for (int j = 0; j < hidden; ++j) {
    if (hidden_pre[j] <= 0.0) continue;  // ReLU'(z) = 0 for z <= 0
    const double* w = mlp.w2.row(j);
    double acc = 0.0;
    for (int k = 0; k < out; ++k) acc += dy[k] * w[k];
    dh[j] = acc;
  }
  for (int k = 0; k < out; ++k) dmlp.b2[k] += dy[k];
  for (int j = 0; j < hidden; ++j) {
    const double a = hidden_pre[j] > 0.0 ? hidden_pre[j] : 0.0;
    if (a != 0.0) {
      double* dw = dmlp.w2.row(j);
      for (int k = 0; k < out; ++k) dw[k] += a * dy[k];
    }
    dmlp.b1[j] += dh[j];
  }
  std::vector<double> dx(in, 0.0);
  for (int i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* w = mlp.w1.row(i);
    double* dw = dmlp.w1.row(i);
    double acc = 0.0;
    for (int j = 0; j < hidden; ++j) {
      acc += dh[j] * w[j];
      dw[j] += xi * dh[j];
    }
    dx[i] = acc;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Fuzzy-set path

namespace {

// Shared by forward and backward so the generator is bit-identical.
std::vector<double> atomic_generator(const ParameterStore& params, int anchor,
                                     const std::vector<int>& rels) {
  const int d = params.d;
  std::vector<double> z(params.entity_emb.row(anchor),
                        params.entity_emb.row(anchor) + d);
  for (int r : rels) {
    const double* rr = params.relation_emb.row(r);
    for (int k = 0; k < d; ++k) z[k] += rr[k];
  }
  return z;
}

FuzzySet memberships_of(const ParameterStore& params,
                        const std::vector<double>& z) {
  const int n = params.num_entities(), d = params.d;
  FuzzySet fs(n);
  for (int i = 0; i < n; ++i) {
    const double* e = params.entity_emb.row(i);
    double dot = 0.0;
    for (int k = 0; k < d; ++k) dot += z[k] * e[k];
    fs[i] = sigmoid(dot);
  }
  return fs;
}

// dfs flows back through fs_i = sigma(z . e_i) into z, every entity row, and
// then into the anchor/relation rows behind z.
void memberships_backward(const ParameterStore& params,
                          const std::vector<double>& z, const FuzzySet& fs,
                          const std::vector<double>& dfs, int anchor,
                          const std::vector<int>& rels,
                          GradientBundle& grads) {
  const int n = params.num_entities(), d = params.d;
  std::vector<double> dz(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double g = dfs[i] * fs[i] * (1.0 - fs[i]);
    if (g == 0.0) continue;
    const double* e = params.entity_emb.row(i);
    for (int k = 0; k < d; ++k) dz[k] += g * e[k];
    grads.add_entity_row(i, z.data(), d, g);
  }
  grads.add_entity_row(anchor, dz.data(), d, 1.0);
  for (int r : rels) grads.add_relation_row(r, dz.data(), d, 1.0);
}

}  // namespace

FuzzySet concept_fuzzy_set(const ParameterStore& params, int c) {
  const int d = params.d;
  std::vector<double> z(params.concept_emb.row(c),
                        params.concept_emb.row(c) + d);
  return memberships_of(params, z);
}

void concept_fuzzy_set_backward(const ParameterStore& params, int c,
                                const FuzzySet& fs,
                                const std::vector<double>& dfs,
                                GradientBundle& grads) {
  const int n = params.num_entities(), d = params.d;
  const double* cz = params.concept_emb.row(c);
  std::vector<double> dc(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double g = dfs[i] * fs[i] * (1.0 - fs[i]);
    if (g == 0.0) continue;
    const double* e = params.entity_emb.row(i);
    for (int k = 0; k < d; ++k) dc[k] += g * e[k];
    grads.add_entity_row(i, cz, d, g);
  }
  grads.add_concept_row(c, dc.data(), d, 1.0);
}

FuzzySet atomic_query_fuzzy_set(const ParameterStore& params, int anchor,
                                const std::vector<int>& rels) {
  if (rels.empty()) {
    throw DataError("atomic query requires at least one relation hop");
  }
  return memberships_of(params, atomic_generator(params, anchor, rels));
}

// ---------------------------------------------------------------------------

namespace {

// Distribute relation r over an already-rewritten subtree.
QueryPtr push_projection(int rel, const QueryPtr& node) {
  switch (node->kind) {
    case QueryNode::Kind::Anchor:
    case QueryNode::Kind::Proj:
      return make_proj(rel, node);
    case QueryNode::Kind::And:
    case QueryNode::Kind::Or: {
      std::vector<QueryPtr> children;
      children.reserve(node->children.size());
      for (const auto& child : node->children) {
        children.push_back(push_projection(rel, child));
      }
      return node->kind == QueryNode::Kind::And ? make_and(std::move(children))
                                                : make_or(std::move(children));
    }
    case QueryNode::Kind::Not:
      throw DataError(
          "projection over a negation cannot be decomposed into atomic "
          "queries");
  }
  throw DataError("corrupt query node");
}

}  // namespace

QueryPtr rewrite_for_fuzzy(const QueryPtr& ast) {
  switch (ast->kind) {
    case QueryNode::Kind::Anchor:
      return ast;
    case QueryNode::Kind::Proj:
      return push_projection(ast->symbol, rewrite_for_fuzzy(ast->children[0]));
    case QueryNode::Kind::And:
    case QueryNode::Kind::Or: {
      std::vector<QueryPtr> children;
      children.reserve(ast->children.size());
      for (const auto& child : ast->children) {
        children.push_back(rewrite_for_fuzzy(child));
      }
      return ast->kind == QueryNode::Kind::And ? make_and(std::move(children))
                                               : make_or(std::move(children));
    }
    case QueryNode::Kind::Not:
      return make_not(rewrite_for_fuzzy(ast->children[0]));
  }
  throw DataError("corrupt query node");
}

namespace {

// Builds trace nodes bottom-up from a rewritten AST; returns the node index.
int build_fuzzy_trace(const ParameterStore& params, const QueryPtr& ast,
                      FuzzyTrace& trace) {
  using Op = FuzzyTrace::Node::Op;
  if (ast->kind == QueryNode::Kind::Anchor) {
    // Bare anchor under a connective: crisp one-hot set, no gradient.
    FuzzyTrace::Node node;
    node.op = Op::Crisp;
    node.anchor = ast->symbol;
    node.value.assign(params.num_entities(), 0.0);
    node.value[ast->symbol] = 1.0;
    trace.nodes.push_back(std::move(node));
    return static_cast<int>(trace.nodes.size()) - 1;
  }
  if (ast->kind == QueryNode::Kind::Proj) {
    // After the rewrite every projection chain ends at an anchor.
    std::vector<int> rels_top_down;
    const QueryNode* cur = ast.get();
    while (cur->kind == QueryNode::Kind::Proj) {
      rels_top_down.push_back(cur->symbol);
      cur = cur->children[0].get();
    }
    if (cur->kind != QueryNode::Kind::Anchor) {
      throw DataError("internal: projection chain not anchor-rooted");
    }
    FuzzyTrace::Node node;
    node.op = Op::Atomic;
    node.anchor = cur->symbol;
    node.rels.assign(rels_top_down.rbegin(), rels_top_down.rend());
    node.value = memberships_of(
        params, atomic_generator(params, node.anchor, node.rels));
    trace.nodes.push_back(std::move(node));
    return static_cast<int>(trace.nodes.size()) - 1;
  }
  if (ast->kind == QueryNode::Kind::Not) {
    int child = build_fuzzy_trace(params, ast->children[0], trace);
    FuzzyTrace::Node node;
    node.op = Op::Not;
    node.left = child;
    node.value = fs_not(trace.nodes[child].value);
    trace.nodes.push_back(std::move(node));
    return static_cast<int>(trace.nodes.size()) - 1;
  }
  // And / Or: left-associative pairwise fold.
  const bool is_and = ast->kind == QueryNode::Kind::And;
  int acc = build_fuzzy_trace(params, ast->children[0], trace);
  for (std::size_t i = 1; i < ast->children.size(); ++i) {
    int right = build_fuzzy_trace(params, ast->children[i], trace);
    FuzzyTrace::Node node;
    node.op = is_and ? Op::And : Op::Or;
    node.left = acc;
    node.right = right;
    node.value = is_and ? fs_and(params.tnorm_kind, trace.nodes[acc].value,
                                 trace.nodes[right].value)
                        : fs_or(params.tnorm_kind, trace.nodes[acc].value,
                                trace.nodes[right].value);
    trace.nodes.push_back(std::move(node));
    acc = static_cast<int>(trace.nodes.size()) - 1;
  }
  return acc;
}

}  // namespace

void query_fuzzy_set_trace(const ParameterStore& params, const QueryPtr& ast,
                           FuzzyTrace& trace) {
  trace.nodes.clear();
  build_fuzzy_trace(params, rewrite_for_fuzzy(ast), trace);
}

FuzzySet query_fuzzy_set(const ParameterStore& params, const QueryPtr& ast) {
  FuzzyTrace trace;
  query_fuzzy_set_trace(params, ast, trace);
  return trace.root_value();
}

void query_fuzzy_set_backward(const ParameterStore& params,
                              const FuzzyTrace& trace,
                              const std::vector<double>& droot,
                              GradientBundle& grads) {
  using Op = FuzzyTrace::Node::Op;
  const std::size_t n_nodes = trace.nodes.size();
  std::vector<std::vector<double>> dval(n_nodes);
  dval.back() = droot;
  auto bump = [&](int idx, std::size_t size) -> std::vector<double>& {
    if (dval[idx].empty()) dval[idx].assign(size, 0.0);
    return dval[idx];
  };
  for (std::size_t i = n_nodes; i-- > 0;) {
    const auto& node = trace.nodes[i];
    const auto& dv = dval[i];
    if (dv.empty()) continue;
    switch (node.op) {
      case Op::Crisp:
        break;  // constant
      case Op::Atomic: {
        auto z = atomic_generator(params, node.anchor, node.rels);
        memberships_backward(params, z, node.value, dv, node.anchor, node.rels,
                             grads);
        break;
      }
      case Op::Not: {
        auto& dl = bump(node.left, dv.size());
        for (std::size_t j = 0; j < dv.size(); ++j) dl[j] -= dv[j];
        break;
      }
      case Op::And:
      case Op::Or: {
        const auto& lv = trace.nodes[node.left].value;
        const auto& rv = trace.nodes[node.right].value;
        auto& dl = bump(node.left, dv.size());
        auto& dr = bump(node.right, dv.size());
        for (std::size_t j = 0; j < dv.size(); ++j) {
          DegreeGrad g = node.op == Op::And
                             ? tnorm_grad(params.tnorm_kind, lv[j], rv[j])
                             : tconorm_grad(params.tnorm_kind, lv[j], rv[j]);
          dl[j] += g.dx * dv[j];
          dr[j] += g.dy * dv[j];
        }
        break;
      }
    }
    dval[i].clear();
  }
}

// ---------------------------------------------------------------------------
// S_Con

namespace {

double p_norm_of(const std::vector<double>& v, double p) {
  if (p == 1.0) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
  }
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), p);
  return std::pow(s, 1.0 / p);
}

std::vector<double> normalize_by_p_norm(const std::vector<double>& v, double p,
                                        double eps) {
  const double s = std::max(p_norm_of(v, p), eps);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / s;
  return out;
}

// Backward of u = v / max(|v|_p, eps): accumulates into dv.
void normalize_backward(const std::vector<double>& v, double p, double eps,
                        const std::vector<double>& du,
                        std::vector<double>& dv) {
  const double s_raw = p_norm_of(v, p);
  if (s_raw >= eps) {
    const double s = s_raw;
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += du[i] * v[i];
    const double common = dot / (s * s);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double ds_dvi =
          v[i] > 0.0 ? std::pow(v[i] / s_raw, p - 1.0)
                     : (v[i] < 0.0 ? -std::pow(-v[i] / s_raw, p - 1.0) : 0.0);
      dv[i] += du[i] / s - common * ds_dvi;
    }
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) dv[i] += du[i] / eps;
  }
}

}  // namespace

double score_concept(const ParameterStore& params, const FuzzySet& q_fs,
                     const FuzzySet& c_fs) {
  if (q_fs.size() != c_fs.size()) {
    throw std::domain_error("fuzzy set length mismatch in concept score");
  }
  auto p_vec = normalize_by_p_norm(c_fs, params.p_norm, params.eps);
  auto q_vec = normalize_by_p_norm(q_fs, params.p_norm, params.eps);
  return -js_divergence_core(p_vec, q_vec);
}

void score_concept_backward(const ParameterStore& params, const FuzzySet& q_fs,
                            const FuzzySet& c_fs, double dS,
                            std::vector<double>& dq_fs,
                            std::vector<double>& dc_fs) {
  auto p_vec = normalize_by_p_norm(c_fs, params.p_norm, params.eps);
  auto q_vec = normalize_by_p_norm(q_fs, params.p_norm, params.eps);
  std::vector<double> dp, dq;
  js_divergence_grad(p_vec, q_vec, dp, dq);
  for (double& g : dp) g *= -dS;  // S = -D
  for (double& g : dq) g *= -dS;
  normalize_backward(c_fs, params.p_norm, params.eps, dp, dc_fs);
  normalize_backward(q_fs, params.p_norm, params.eps, dq, dq_fs);
}

// ---------------------------------------------------------------------------
// Entity path

namespace {

int build_entity_trace(const ParameterStore& params, const QueryPtr& ast,
                       EntityTrace& trace) {
  using Op = EntityTrace::Node::Op;
  const int d = params.d;
  switch (ast->kind) {
    case QueryNode::Kind::Anchor: {
      EntityTrace::Node node;
      node.op = Op::Anchor;
      node.symbol = ast->symbol;
      node.value.assign(params.entity_emb.row(ast->symbol),
                        params.entity_emb.row(ast->symbol) + d);
      trace.nodes.push_back(std::move(node));
      return static_cast<int>(trace.nodes.size()) - 1;
    }
    case QueryNode::Kind::Proj: {
      int child = build_entity_trace(params, ast->children[0], trace);
      EntityTrace::Node node;
      node.op = Op::Proj;
      node.symbol = ast->symbol;
      node.left = child;
      node.value = trace.nodes[child].value;
      const double* r = params.relation_emb.row(ast->symbol);
      for (int k = 0; k < d; ++k) node.value[k] += r[k];
      trace.nodes.push_back(std::move(node));
      return static_cast<int>(trace.nodes.size()) - 1;
    }
    case QueryNode::Kind::And:
    case QueryNode::Kind::Or: {
      const bool is_and = ast->kind == QueryNode::Kind::And;
      int acc = build_entity_trace(params, ast->children[0], trace);
      for (std::size_t i = 1; i < ast->children.size(); ++i) {
        int right = build_entity_trace(params, ast->children[i], trace);
        EntityTrace::Node node;
        node.op = is_and ? Op::And : Op::Or;
        node.left = acc;
        node.right = right;
        const auto& q1 = trace.nodes[acc].value;
        const auto& q2 = trace.nodes[right].value;
        if (is_and) {
          std::vector<double> x(2 * d);
          std::copy(q1.begin(), q1.end(), x.begin());
          std::copy(q2.begin(), q2.end(), x.begin() + d);
          node.att = mlp_forward(params.omega, x, &node.hidden_pre);
          node.value.resize(d);
          for (int k = 0; k < d; ++k) {
            node.value[k] = node.att[k] * q1[k] + node.att[d + k] * q2[k];
          }
        } else {
          node.value.resize(d);
          for (int k = 0; k < d; ++k) node.value[k] = std::max(q1[k], q2[k]);
        }
        trace.nodes.push_back(std::move(node));
        acc = static_cast<int>(trace.nodes.size()) - 1;
      }
      return acc;
    }
    case QueryNode::Kind::Not:
      throw DataError(
          "negation is not supported in the entity-embedding path");
  }
  throw DataError("corrupt query node");
}

}  // namespace

std::vector<double> query_embedding_trace(const ParameterStore& params,
                                          const QueryPtr& ast,
                                          EntityTrace& trace) {
  trace.nodes.clear();
  build_entity_trace(params, ast, trace);
  return trace.root_value();
}

std::vector<double> query_embedding(const ParameterStore& params,
                                    const QueryPtr& ast) {
  EntityTrace trace;
  return query_embedding_trace(params, ast, trace);
}

void query_embedding_backward(const ParameterStore& params,
                              const EntityTrace& trace,
                              const std::vector<double>& droot,
                              GradientBundle& grads) {
  using Op = EntityTrace::Node::Op;
  const int d = params.d;
  std::vector<std::vector<double>> dval(trace.nodes.size());
  dval.back() = droot;
  auto bump = [&](int idx) -> std::vector<double>& {
    if (dval[idx].empty()) dval[idx].assign(d, 0.0);
    return dval[idx];
  };
  for (std::size_t i = trace.nodes.size(); i-- > 0;) {
    const auto& node = trace.nodes[i];
    const auto& dv = dval[i];
    if (dv.empty()) continue;
    switch (node.op) {
      case Op::Anchor:
        grads.add_entity_row(node.symbol, dv.data(), d, 1.0);
        break;
      case Op::Proj: {
        grads.add_relation_row(node.symbol, dv.data(), d, 1.0);
        auto& dl = bump(node.left);
        for (int k = 0; k < d; ++k) dl[k] += dv[k];
        break;
      }
      case Op::And: {
        const auto& q1 = trace.nodes[node.left].value;
        const auto& q2 = trace.nodes[node.right].value;
        auto& dl = bump(node.left);
        auto& dr = bump(node.right);
        std::vector<double> da(2 * d);
        for (int k = 0; k < d; ++k) {
          da[k] = dv[k] * q1[k];
          da[d + k] = dv[k] * q2[k];
          dl[k] += node.att[k] * dv[k];
          dr[k] += node.att[d + k] * dv[k];
        }
        std::vector<double> x(2 * d);
        std::copy(q1.begin(), q1.end(), x.begin());
        std::copy(q2.begin(), q2.end(), x.begin() + d);
        auto dx = mlp_backward(params.omega, x, node.hidden_pre, da,
                               grads.d_omega);
        grads.touched_omega = true;
        for (int k = 0; k < d; ++k) {
          dl[k] += dx[k];
          dr[k] += dx[d + k];
        }
        break;
      }
      case Op::Or: {
        const auto& q1 = trace.nodes[node.left].value;
        const auto& q2 = trace.nodes[node.right].value;
        auto& dl = bump(node.left);
        auto& dr = bump(node.right);
        for (int k = 0; k < d; ++k) {
          // max ties route to the left branch.
          if (q1[k] >= q2[k]) {
            dl[k] += dv[k];
          } else {
            dr[k] += dv[k];
          }
        }
        break;
      }
    }
    dval[i].clear();
  }
}

double score_entity(const ParameterStore& params,
                    const std::vector<double>& q_emb, int e) {
  const int d = params.d;
  const double* ev = params.entity_emb.row(e);
  double dist = 0.0;
  for (int k = 0; k < d; ++k) dist += std::abs(q_emb[k] - ev[k]);
  return params.gamma - dist;
}

void score_entity_backward(const ParameterStore& params,
                           const std::vector<double>& q_emb, int e, double dS,
                           std::vector<double>& dq_emb,
                           GradientBundle& grads) {
  const int d = params.d;
  const double* ev = params.entity_emb.row(e);
  std::vector<double> de(d, 0.0);
  for (int k = 0; k < d; ++k) {
    const double diff = q_emb[k] - ev[k];
    const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    dq_emb[k] += -sgn * dS;
    de[k] = sgn * dS;
  }
  grads.add_entity_row(e, de.data(), d, 1.0);
}

// ---------------------------------------------------------------------------
// Axiom scores

double score_subsumption_trace(const ParameterStore& params, int c1, int c2,
                               std::vector<double>& x,
                               std::vector<double>& hidden_pre) {
  const int d = params.d;
  x.resize(2 * d);
  std::copy(params.concept_emb.row(c1), params.concept_emb.row(c1) + d,
            x.begin());
  std::copy(params.concept_emb.row(c2), params.concept_emb.row(c2) + d,
            x.begin() + d);
  return mlp_forward(params.theta, x, &hidden_pre)[0];
}

double score_subsumption(const ParameterStore& params, int c1, int c2) {
  std::vector<double> x, hidden_pre;
  return score_subsumption_trace(params, c1, c2, x, hidden_pre);
}

void score_subsumption_backward(const ParameterStore& params, int c1, int c2,
                                const std::vector<double>& x,
                                const std::vector<double>& hidden_pre,
                                double dS, GradientBundle& grads) {
  const int d = params.d;
  auto dx = mlp_backward(params.theta, x, hidden_pre, {dS}, grads.d_theta);
  grads.touched_theta = true;
  grads.add_concept_row(c1, dx.data(), d, 1.0);
  grads.add_concept_row(c2, dx.data() + d, d, 1.0);
}

double score_instantiation(const ParameterStore& params, int c, int e) {
  const int d = params.d;
  const double* cv = params.concept_emb.row(c);
  const double* ev = params.entity_emb.row(e);
  double dot = 0.0;
  for (int k = 0; k < d; ++k) dot += cv[k] * ev[k];
  return sigmoid(dot);
}

void score_instantiation_backward(const ParameterStore& params, int c, int e,
                                  double dS, GradientBundle& grads) {
  const double s = score_instantiation(params, c, e);
  const double dz = s * (1.0 - s) * dS;
  grads.add_concept_row(c, params.entity_emb.row(e), params.d, dz);
  grads.add_entity_row(e, params.concept_emb.row(c), params.d, dz);
}

}  // namespace fuzzdl
