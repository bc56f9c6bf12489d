#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "fuzzdl/kb.hpp"
#include "fuzzdl/model.hpp"
#include "fuzzdl/query.hpp"
#include "fuzzdl/rng.hpp"

namespace fuzzdl {

struct TrainConfig {
  double lr = 1e-3;
  int d = 256;
  int batch_size = 512;  // positives per task per step
  int m = 4;             // negatives per positive
  int max_steps = 10000;
  int valid_interval = 50;
  int patience = 3;
  std::uint64_t seed = 0;
  TNormKind tnorm_kind = TNormKind::Product;
  bool use_sub = true;  // subsumption task (ablation switch)
  bool use_ins = true;  // instantiation task (ablation switch)
  double gamma = 12.0;
  double eps = 1e-12;
  double p_norm = 1.0;

  void validate() const;
};

// Uniform draw of m ids from [0, pool) \ {exclude}; throws when pool <= 1.
std::vector<int> sample_negative_ids(Rng& rng, int pool, int exclude, int m);

// One optimization step's worth of positives + negatives for each task.
struct QueryTarget {
  const QueryInstance* instance = nullptr;
  int positive = -1;           // concept id (Con) or entity id (Ent)
  std::vector<int> negatives;  // m corrupted ids
};
struct PairTarget {
  std::pair<int, int> positive;               // (sub,super) or (entity,concept)
  std::vector<std::pair<int, int>> negatives;  // m corrupted pairs
};
struct StepBatch {
  std::vector<QueryTarget> con, ent;
  std::vector<PairTarget> sub, ins;
};

struct TaskLosses {
  // Mean of -log sigma(S+ - S-) over the task's (positive, negative) pairs;
  // NaN when the task is inactive this step.
  double con = std::numeric_limits<double>::quiet_NaN();
  double ent = std::numeric_limits<double>::quiet_NaN();
  double sub = std::numeric_limits<double>::quiet_NaN();
  double ins = std::numeric_limits<double>::quiet_NaN();
};

// Four-task loss: L = 1/4 * sum over active tasks of the task mean above
// (equivalently -(1/(4m)) sum log sigma(S+ - S-) averaged over batch
// positives). Accumulates exact gradients into `grads`. Throws
// DivergenceError on non-finite scores.
double loss_and_gradients(const ParameterStore& params, const StepBatch& batch,
                          int m, GradientBundle& grads, TaskLosses& tasks);

// Adam with bias correction; embedding rows advance their moments lazily
// (only when touched), each with its own step counter.
struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps_adam = 1e-8;
  Matrix m_entity, v_entity, m_concept, v_concept, m_relation, v_relation;
  MlpParams m_theta, v_theta, m_omega, v_omega;
  std::vector<std::int64_t> t_entity, t_concept, t_relation;
  std::int64_t t_dense = 0;

  explicit AdamState(const ParameterStore& params);
};

void adam_step(ParameterStore& params, AdamState& state,
               const GradientBundle& grads, double lr);

// Strict-improvement early stopping with a consecutive-failure budget.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // True iff `metric` strictly improves on the best seen so far.
  bool observe(double metric) {
    if (metric > best_) {
      best_ = metric;
      fails_ = 0;
      return true;
    }
    ++fails_;
    return false;
  }
  bool should_stop() const { return fails_ >= patience_; }
  double best() const { return best_; }
  int consecutive_failures() const { return fails_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int fails_ = 0;
};

struct TrainResult {
  ParameterStore best_params;
  int best_step = 0;       // step of the snapshot (0 = never validated)
  double best_metric = std::numeric_limits<double>::quiet_NaN();
  int steps_run = 0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

// Runs the optimization loop: per step one mini-batch per active task,
// validation every valid_interval steps (when validation instances exist),
// snapshot on improvement, stop after `patience` consecutive non-improvements.
// `log` (optional) receives JSON lines per step and per validation.
TrainResult train(const KnowledgeBase& train_kb,
                  const std::vector<QueryInstance>& train_instances,
                  const std::vector<QueryInstance>& valid_instances,
                  const TrainConfig& config, std::ostream* log = nullptr);

// Mean of the per-level average MRRs (entity level always; concept level when
// any instance carries concept answers) — the early-stopping metric.
double validation_metric(const ParameterStore& params,
                         const std::vector<QueryInstance>& instances);

}  // namespace fuzzdl
