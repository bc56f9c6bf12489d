#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fuzzdl/vocab.hpp"

namespace fuzzdl {

struct Triple {
  int head = 0;
  int rel = 0;
  int tail = 0;
  auto operator<=>(const Triple&) const = default;
};

// KB = (T, {A_ee, A_ec}): subsumption axioms between concept names,
// relation triples between entities, and instantiation pairs.
struct KnowledgeBase {
  std::vector<std::pair<int, int>> tbox;     // (sub-concept, super-concept)
  std::vector<Triple> abox_ee;               // (head entity, relation, tail entity)
  std::vector<std::pair<int, int>> abox_ec;  // (entity, concept)
  Vocab vocab;
};

struct KbSplit {
  KnowledgeBase train;  // full tbox + abox_ec, train share of abox_ee
  std::vector<Triple> valid_triples;
  std::vector<Triple> test_triples;
};

struct ClosureResult {
  std::vector<std::pair<int, int>> pairs;  // reflexive-free transitive closure
  bool has_cycle = false;
  std::vector<int> cycle_concepts;  // members of at least one cycle, sorted
};

// Relation name used when concepts are rewritten as plain entities.
inline constexpr const char* kInstanceRelationName = "__isInstanceOf__";

// Parse the three TSV files (tab-separated, '#' comments, blank lines ok);
// builds the vocab in encounter order tbox -> abox_ee -> abox_ec, drops
// duplicate axioms and self-subsumptions.
KnowledgeBase load_kb(const std::string& tbox_path,
                      const std::string& abox_ee_path,
                      const std::string& abox_ec_path);

void save_kb(const KnowledgeBase& kb, const std::string& tbox_path,
             const std::string& abox_ee_path, const std::string& abox_ec_path);

// Iteratively removes entities whose degree (abox_ee endpoints plus abox_ec
// memberships) is below `threshold` until a fixpoint, then renumbers the
// surviving entities densely. Concepts and relations are kept as-is.
KnowledgeBase filter_low_degree(const KnowledgeBase& kb, int threshold);

// Seeded uniform split of abox_ee; the holdout is divided half/half into
// validation and test (validation gets the smaller half when odd).
KbSplit split_abox(const KnowledgeBase& kb, double train_fraction,
                   std::uint64_t seed);

// Reflexive-free transitive closure of the subsumption relation. Cycles are
// tolerated: members become mutually subsuming and are reported back.
ClosureResult transductive_closure(const std::vector<std::pair<int, int>>& tbox,
                                   int num_concepts);

// One-more-hop rewrite KG': every concept c becomes entity |E|+c, each
// closure-augmented membership (e, c) becomes a triple (e, r_ec, |E|+c) with
// the fresh relation r_ec; the result has empty tbox and abox_ec.
KnowledgeBase degrade_concepts(const KnowledgeBase& kb);

// ---------------------------------------------------------------------------
// On-disk split layout:
//   <dir>/vocab.json
//   <dir>/meta.json
//   <dir>/train/{tbox.tsv, abox_ee.tsv, abox_ec.tsv}
//   <dir>/valid/abox_ee.tsv
//   <dir>/test/abox_ee.tsv

struct SplitMeta {
  bool degraded = false;
  int base_entities = 0;  // entity count before concept degradation
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
  int degree_threshold = 0;
};

void save_split(const KbSplit& split, const SplitMeta& meta,
                const std::string& dir);

struct LoadedSplit {
  KbSplit split;
  SplitMeta meta;
};

LoadedSplit load_split(const std::string& dir);

// ---------------------------------------------------------------------------
// Immutable adjacency view used by the symbolic oracle and the query sampler.
// Membership lists are closure-augmented: (e, c) and c ⊑ c' imply e ∈ c'.
class KbIndex {
 public:
  explicit KbIndex(const KnowledgeBase& kb);

  int num_entities() const { return static_cast<int>(out_.size()); }
  int num_concepts() const { return static_cast<int>(concept_entities_.size()); }
  int num_relations() const { return num_relations_; }

  const std::vector<Triple>& triples() const { return triples_; }

  // (relation, tail) pairs sorted ascending; (relation, head) likewise.
  const std::vector<std::pair<int, int>>& out(int entity) const {
    return out_.at(entity);
  }
  const std::vector<std::pair<int, int>>& in(int entity) const {
    return in_.at(entity);
  }

  // Tails t with (head, rel, t) in abox_ee, ascending.
  std::vector<int> tails(int head, int rel) const;
  bool has_triple(int head, int rel, int tail) const;

  const std::vector<int>& concepts_of(int entity) const {
    return entity_concepts_.at(entity);
  }
  const std::vector<int>& entities_of(int concept_id) const {
    return concept_entities_.at(concept_id);
  }

  const ClosureResult& closure() const { return closure_; }

 private:
  int num_relations_ = 0;
  std::vector<Triple> triples_;
  std::vector<std::vector<std::pair<int, int>>> out_, in_;
  std::vector<std::vector<int>> entity_concepts_, concept_entities_;
  ClosureResult closure_;
};

}  // namespace fuzzdl
