#include "fuzzdl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "fuzzdl/errors.hpp"

namespace fuzzdl {

double rank_filtered(const std::vector<double>& scores, int target,
                     const std::vector<int>& known_positives) {
  if (target < 0 || target >= static_cast<int>(scores.size())) {
    throw DataError("rank target " + std::to_string(target) +
                    " is not a candidate (have " +
                    std::to_string(scores.size()) + ")");
  }
  const double s_target = scores[target];
  if (!std::isfinite(s_target)) throw DataError("non-finite candidate score");
  int greater = 0, equal = 0;
  std::size_t j = 0;
  for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
    while (j < known_positives.size() && known_positives[j] < i) ++j;
    const bool is_other_positive =
        j < known_positives.size() && known_positives[j] == i && i != target;
    if (is_other_positive) continue;  // filtered setting
    if (!std::isfinite(scores[i])) throw DataError("non-finite candidate score");
    if (scores[i] > s_target) {
      ++greater;
    } else if (scores[i] == s_target) {
      ++equal;  // includes the target itself
    }
  }
  return greater + (equal + 1) / 2.0;
}

// ---------------------------------------------------------------------------
// Report assembly

namespace {

struct Acc {
  double mrr = 0.0, h1 = 0.0, h3 = 0.0, h10 = 0.0;
  int n = 0;
};

// Per-instance metrics: mean over gold answers of reciprocal rank / top-k hit.
void accumulate(Acc& acc, const std::vector<double>& ranks) {
  double rr = 0.0, h1 = 0.0, h3 = 0.0, h10 = 0.0;
  for (double r : ranks) {
    rr += 1.0 / r;
    h1 += r <= 1.0 ? 1.0 : 0.0;
    h3 += r <= 3.0 ? 1.0 : 0.0;
    h10 += r <= 10.0 ? 1.0 : 0.0;
  }
  const double k = static_cast<double>(ranks.size());
  acc.mrr += rr / k;
  acc.h1 += h1 / k;
  acc.h3 += h3 / k;
  acc.h10 += h10 / k;
  acc.n += 1;
}

std::vector<std::string> ordered_qtypes(
    const std::map<std::string, Acc>& accs) {
  static const std::vector<std::string> canonical = {
      "1p", "2p", "3p", "2i", "3i", "pi", "ip", "2u", "up"};
  std::vector<std::string> out;
  for (const auto& q : canonical) {
    if (accs.count(q)) out.push_back(q);
  }
  for (const auto& [q, acc] : accs) {  // std::map: alphabetical for the rest
    if (std::find(canonical.begin(), canonical.end(), q) == canonical.end()) {
      out.push_back(q);
    }
  }
  return out;
}

void emit_level(RankingReport& report, const std::string& level,
                const std::map<std::string, Acc>& accs) {
  if (accs.empty()) return;
  MetricRow avg;
  int qtypes = 0;
  for (const auto& qtype : ordered_qtypes(accs)) {
    const Acc& a = accs.at(qtype);
    MetricRow row{a.mrr / a.n, a.h1 / a.n, a.h3 / a.n, a.h10 / a.n, a.n};
    report.entries.push_back({level, qtype, row});
    avg.mrr += row.mrr;
    avg.hits1 += row.hits1;
    avg.hits3 += row.hits3;
    avg.hits10 += row.hits10;
    avg.n += row.n;
    ++qtypes;
  }
  avg.mrr /= qtypes;
  avg.hits1 /= qtypes;
  avg.hits3 /= qtypes;
  avg.hits10 /= qtypes;
  report.entries.push_back({level, "avg", avg});
}

}  // namespace

const MetricRow* RankingReport::find(const std::string& level,
                                     const std::string& qtype) const {
  for (const auto& e : entries) {
    if (e.level == level && e.qtype == qtype) return &e.metrics;
  }
  return nullptr;
}

std::string RankingReport::to_table() const {
  std::string out =
      "level  qtype      n     mrr    h@1    h@3   h@10\n"
      "-----  -----  -----  ------  -----  -----  -----\n";
  char buf[128];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof(buf), "%-5s  %-5s  %5d  %6.4f  %5.3f  %5.3f  %5.3f\n",
                  e.level.c_str(), e.qtype.c_str(), e.metrics.n, e.metrics.mrr,
                  e.metrics.hits1, e.metrics.hits3, e.metrics.hits10);
    out += buf;
  }
  return out;
}

std::string RankingReport::to_json_text() const {
  nlohmann::ordered_json j;
  for (const auto& e : entries) {
    j[e.level][e.qtype] = {{"mrr", e.metrics.mrr},
                           {"hits1", e.metrics.hits1},
                           {"hits3", e.metrics.hits3},
                           {"hits10", e.metrics.hits10},
                           {"n", e.metrics.n}};
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------

RankingReport evaluate(const ParameterStore& params,
                       const std::vector<QueryInstance>& instances) {
  std::map<std::string, Acc> abox, tbox;
  const int num_entities = params.num_entities();
  const int num_concepts = params.num_concepts();

  for (const auto& inst : instances) {
    if (inst.entity_answers.empty()) {
      throw DataError("evaluation instance has no entity answers");
    }
    const auto q = query_embedding(params, inst.ast);
    std::vector<double> scores(num_entities);
    for (int e = 0; e < num_entities; ++e) scores[e] = score_entity(params, q, e);
    std::vector<double> ranks;
    ranks.reserve(inst.entity_answers.size());
    for (int gold : inst.entity_answers) {
      ranks.push_back(rank_filtered(scores, gold, inst.entity_answers));
    }
    accumulate(abox[inst.qtype], ranks);

    if (!inst.concept_answers.empty() && num_concepts > 0) {
      const FuzzySet q_fs = query_fuzzy_set(params, inst.ast);
      std::vector<double> cscores(num_concepts);
      for (int c = 0; c < num_concepts; ++c) {
        cscores[c] = score_concept(params, q_fs, concept_fuzzy_set(params, c));
      }
      std::vector<double> cranks;
      cranks.reserve(inst.concept_answers.size());
      for (int gold : inst.concept_answers) {
        cranks.push_back(rank_filtered(cscores, gold, inst.concept_answers));
      }
      accumulate(tbox[inst.qtype], cranks);
    }
  }

  RankingReport report;
  emit_level(report, "abox", abox);
  emit_level(report, "tbox", tbox);
  return report;
}

RankingReport one_more_hop_eval(const ParameterStore& params,
                                const std::vector<QueryInstance>& instances,
                                int base_entities, int r_ec) {
  if (r_ec < 0 || r_ec >= params.num_relations()) {
    throw DataError("instance-of relation id " + std::to_string(r_ec) +
                    " is not in the parameter store");
  }
  if (base_entities <= 0 || base_entities > params.num_entities()) {
    throw DataError("invalid base entity count " +
                    std::to_string(base_entities));
  }
  const int num_pseudo = params.num_entities() - base_entities;
  std::map<std::string, Acc> abox, tbox;

  for (const auto& inst : instances) {
    if (inst.entity_answers.empty()) {
      throw DataError("evaluation instance has no entity answers");
    }
    const auto q = query_embedding(params, inst.ast);
    // Original entities only: pseudo-entities never compete at this level.
    std::vector<double> scores(base_entities);
    for (int e = 0; e < base_entities; ++e) {
      scores[e] = score_entity(params, q, e);
    }
    std::vector<double> ranks;
    for (int gold : inst.entity_answers) {
      ranks.push_back(rank_filtered(scores, gold, inst.entity_answers));
    }
    accumulate(abox[inst.qtype], ranks);

    if (!inst.concept_answers.empty() && num_pseudo > 0) {
      // One more hop: concepts are reached through the synthetic relation.
      const auto q2 = query_embedding(params, make_proj(r_ec, inst.ast));
      std::vector<double> cscores(num_pseudo);
      for (int c = 0; c < num_pseudo; ++c) {
        cscores[c] = score_entity(params, q2, base_entities + c);
      }
      std::vector<double> cranks;
      for (int gold : inst.concept_answers) {
        cranks.push_back(rank_filtered(cscores, gold, inst.concept_answers));
      }
      accumulate(tbox[inst.qtype], cranks);
    }
  }

  RankingReport report;
  emit_level(report, "abox", abox);
  emit_level(report, "tbox", tbox);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<RankedAnswer> top_k(const std::vector<double>& scores,
                                const std::string& level, int k) {
  std::vector<int> ids(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) ids[i] = static_cast<int>(i);
  const auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const std::size_t keep = std::min<std::size_t>(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + keep, ids.end(), better);
  std::vector<RankedAnswer> out;
  for (std::size_t i = 0; i < keep; ++i) {
    out.push_back({level, ids[i], scores[ids[i]]});
  }
  return out;
}

}  // namespace

std::vector<RankedAnswer> answer_query(const ParameterStore& params,
                                       const QueryPtr& ast, int k) {
  if (k < 1) throw DataError("k must be >= 1");
  const auto q = query_embedding(params, ast);
  std::vector<double> escores(params.num_entities());
  for (int e = 0; e < params.num_entities(); ++e) {
    escores[e] = score_entity(params, q, e);
  }
  std::vector<RankedAnswer> out = top_k(escores, "abox", k);

  if (params.num_concepts() > 0) {
    const FuzzySet q_fs = query_fuzzy_set(params, ast);
    std::vector<double> cscores(params.num_concepts());
    for (int c = 0; c < params.num_concepts(); ++c) {
      cscores[c] = score_concept(params, q_fs, concept_fuzzy_set(params, c));
    }
    auto concepts = top_k(cscores, "tbox", k);
    out.insert(out.end(), concepts.begin(), concepts.end());
  }
  return out;
}

}  // namespace fuzzdl
