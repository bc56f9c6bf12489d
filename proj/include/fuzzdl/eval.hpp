#pragma once

#include <string>
#include <vector>

#include "fuzzdl/model.hpp"
#include "fuzzdl/query.hpp"

namespace fuzzdl {

// Average-tie filtered rank: known positives other than the target are
// removed, then rank = (#strictly greater) + ((#equal incl. target) + 1) / 2.
// `scores` is indexed by candidate id; `known_positives` must be sorted.
double rank_filtered(const std::vector<double>& scores, int target,
                     const std::vector<int>& known_positives);

struct MetricRow {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  int n = 0;  // number of queries contributing
};

// Filtered MRR / Hits@k per (answer level, query type) plus an "avg" row per
// level (arithmetic mean over the query types present).
struct RankingReport {
  struct Entry {
    std::string level;  // "abox" (entities) or "tbox" (concepts)
    std::string qtype;  // 1p..up or "avg"
    MetricRow metrics;
  };
  std::vector<Entry> entries;  // fixed order: level, then qtype, avg last

  const MetricRow* find(const std::string& level,
                        const std::string& qtype) const;
  std::string to_table() const;
  std::string to_json_text() const;  // stable key order
};

// Scores every entity via the entity path and every concept via the fuzzy
// path; ranks each gold answer in the filtered setting (filter = the
// instance's stored gold sets, which were labeled on the full KB). Instances
// without concept answers contribute no concept-level row.
RankingReport evaluate(const ParameterStore& params,
                       const std::vector<QueryInstance>& instances);

// Comparison harness for parameters trained on the concept-degraded KG':
// entity answers are ranked over the first `base_entities` candidates only;
// concept answers come from one extra projection hop over `r_ec`, ranked over
// the appended pseudo-entity candidates only.
RankingReport one_more_hop_eval(const ParameterStore& params,
                                const std::vector<QueryInstance>& instances,
                                int base_entities, int r_ec);

struct RankedAnswer {
  std::string level;  // "abox" or "tbox"
  int id = -1;
  double score = 0.0;
};

// Top-k entities plus top-k concepts, each list sorted by descending score
// (ties by ascending id).
std::vector<RankedAnswer> answer_query(const ParameterStore& params,
                                       const QueryPtr& ast, int k);

}  // namespace fuzzdl
