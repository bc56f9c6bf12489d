#pragma once

#include <vector>

#include "fuzzdl/fuzzy.hpp"
#include "fuzzdl/params.hpp"
#include "fuzzdl/query.hpp"

namespace fuzzdl {

// Accumulator for d(loss)/d(parameters). Embedding rows carry a touched mask
// so the optimizer can apply sparse updates; untouched rows hold stale zeros
// and must be ignored.
struct GradientBundle {
  Matrix d_entity, d_concept, d_relation;
  std::vector<char> touched_entity, touched_concept, touched_relation;
  MlpParams d_theta, d_omega;
  bool touched_theta = false, touched_omega = false;

  explicit GradientBundle(const ParameterStore& params);
  void clear();

  void add_entity_row(int id, const double* g, int d, double scale = 1.0);
  void add_concept_row(int id, const double* g, int d, double scale = 1.0);
  void add_relation_row(int id, const double* g, int d, double scale = 1.0);
};

// y = w2^T relu(w1^T x + b1) + b2 backward: accumulates into dmlp (which must
// be shaped like mlp) and returns dx. `hidden_pre` comes from mlp_forward.
std::vector<double> mlp_backward(const MlpParams& mlp,
                                 const std::vector<double>& x,
                                 const std::vector<double>& hidden_pre,
                                 const std::vector<double>& dy,
                                 MlpParams& dmlp);

// ---------------------------------------------------------------------------
// Fuzzy-set path: queries and concepts as membership vectors over entities.

// sigma(c . E_e^T): membership of every entity in concept c.
FuzzySet concept_fuzzy_set(const ParameterStore& params, int c);
void concept_fuzzy_set_backward(const ParameterStore& params, int c,
                                const FuzzySet& fs,
                                const std::vector<double>& dfs,
                                GradientBundle& grads);

// sigma((e + r_1 + ... + r_k) . E_e^T): anchor-rooted projection chain.
FuzzySet atomic_query_fuzzy_set(const ParameterStore& params, int anchor,
                                const std::vector<int>& rels);

// Rewrites projections sitting above connectives by distributing the relation
// into every branch (Proj(r, And(A,B)) => And(Proj(r,A), Proj(r,B))), so that
// every projection chain is anchor-rooted. Projection over Not has no such
// decomposition and is rejected.
QueryPtr rewrite_for_fuzzy(const QueryPtr& ast);

struct FuzzyTrace {
  struct Node {
    enum class Op { Atomic, Crisp, And, Or, Not };
    Op op = Op::Atomic;
    int anchor = -1;         // Atomic / Crisp
    std::vector<int> rels;   // Atomic, bottom-up hop order
    int left = -1, right = -1;
    FuzzySet value;
  };
  std::vector<Node> nodes;  // topological order; root is nodes.back()
  const FuzzySet& root_value() const { return nodes.back().value; }
};

FuzzySet query_fuzzy_set(const ParameterStore& params, const QueryPtr& ast);
void query_fuzzy_set_trace(const ParameterStore& params, const QueryPtr& ast,
                           FuzzyTrace& trace);
void query_fuzzy_set_backward(const ParameterStore& params,
                              const FuzzyTrace& trace,
                              const std::vector<double>& droot,
                              GradientBundle& grads);

// S_Con = -D_JS(P, Q) with P = c_fs / max(|c_fs|_p, eps), Q likewise.
double score_concept(const ParameterStore& params, const FuzzySet& q_fs,
                     const FuzzySet& c_fs);
// Accumulates dS * dS_Con/d(fs) into dq_fs and dc_fs (both pre-sized).
void score_concept_backward(const ParameterStore& params, const FuzzySet& q_fs,
                            const FuzzySet& c_fs, double dS,
                            std::vector<double>& dq_fs,
                            std::vector<double>& dc_fs);

// ---------------------------------------------------------------------------
// Entity path: queries as single d-vectors (projection = translation,
// intersection = learned attention mix, union = element-wise max).

struct EntityTrace {
  struct Node {
    enum class Op { Anchor, Proj, And, Or };
    Op op = Op::Anchor;
    int symbol = -1;  // entity id (Anchor) or relation id (Proj)
    int left = -1, right = -1;
    std::vector<double> value;       // q at this node
    std::vector<double> hidden_pre;  // And only: omega layer-1 pre-activation
    std::vector<double> att;         // And only: 2d attention weights
  };
  std::vector<Node> nodes;  // topological order; root is nodes.back()
  const std::vector<double>& root_value() const { return nodes.back().value; }
};

// Throws on Not nodes: the entity path defines no negation.
std::vector<double> query_embedding(const ParameterStore& params,
                                    const QueryPtr& ast);
std::vector<double> query_embedding_trace(const ParameterStore& params,
                                          const QueryPtr& ast,
                                          EntityTrace& trace);
void query_embedding_backward(const ParameterStore& params,
                              const EntityTrace& trace,
                              const std::vector<double>& droot,
                              GradientBundle& grads);

// S_Ent = gamma - |q - e|_1.
double score_entity(const ParameterStore& params,
                    const std::vector<double>& q_emb, int e);
void score_entity_backward(const ParameterStore& params,
                           const std::vector<double>& q_emb, int e, double dS,
                           std::vector<double>& dq_emb, GradientBundle& grads);

// ---------------------------------------------------------------------------
// Axiom scores.

// S_Sub = theta MLP applied to E_c[c1] concat E_c[c2]; asymmetric.
double score_subsumption(const ParameterStore& params, int c1, int c2);
double score_subsumption_trace(const ParameterStore& params, int c1, int c2,
                               std::vector<double>& x,
                               std::vector<double>& hidden_pre);
void score_subsumption_backward(const ParameterStore& params, int c1, int c2,
                                const std::vector<double>& x,
                                const std::vector<double>& hidden_pre,
                                double dS, GradientBundle& grads);

// S_Ins = sigma(E_c[c] . E_e[e]).
double score_instantiation(const ParameterStore& params, int c, int e);
void score_instantiation_backward(const ParameterStore& params, int c, int e,
                                  double dS, GradientBundle& grads);

double sigmoid(double z);

}  // namespace fuzzdl
