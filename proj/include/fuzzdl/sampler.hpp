#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fuzzdl/kb.hpp"
#include "fuzzdl/query.hpp"
#include "fuzzdl/rng.hpp"

namespace fuzzdl {

inline const std::vector<std::string>& query_shapes() {
  static const std::vector<std::string> shapes = {"1p", "2p", "3p", "2i", "3i",
                                                  "pi", "ip", "2u", "up"};
  return shapes;
}

struct SampleOptions {
  std::string qtype;
  int n = 1;
  std::uint64_t seed = 0;
  int max_answers = 100;
  // 1p only: emit one instance per triple instead of random walks.
  bool enumerate_1p = false;
  // Evaluation streams: answers are labeled on the sampling index, and every
  // kept instance must have at least one entity answer that is NOT reachable
  // on this restricted index (otherwise the query tests memorization).
  const KbIndex* hard_answer_baseline = nullptr;
};

// Backward random walks from a random answer entity, labeled exactly with the
// symbolic oracle. Deterministic per seed. Throws SamplerExhausted when the
// 10*n attempt budget runs out before n distinct instances are found.
std::vector<QueryInstance> sample_queries(const KbIndex& index,
                                          const SampleOptions& opts);

// JSON-lines persistence: one object per line with fields
// qtype, query (s-expression), entity_answers, concept_answers (names).
void save_instances(const std::vector<QueryInstance>& instances,
                    const Vocab& vocab, const std::string& path);
std::vector<QueryInstance> load_instances(const std::string& path,
                                          const Vocab& vocab);

}  // namespace fuzzdl
