#include "fuzzdl/synthetic.hpp"

#include <algorithm>
#include <string>

#include "fuzzdl/errors.hpp"
#include "fuzzdl/rng.hpp"

namespace fuzzdl {

namespace {

std::string padded(const char* prefix, int i, int width) {
  std::string digits = std::to_string(i);
  return std::string(prefix) +
         std::string(static_cast<std::size_t>(width) - digits.size(), '0') +
         digits;
}

}  // namespace

KnowledgeBase synthetic_kb(const SyntheticSpec& spec) {
  if (spec.groups < 2 || spec.entities_per_group < 1 || spec.relations < 1 ||
      spec.out_degree < 1) {
    throw DataError("synthetic KB spec out of range");
  }
  const int num_entities = spec.groups * spec.entities_per_group;
  const int width = static_cast<int>(std::to_string(num_entities - 1).size());

  KnowledgeBase kb;
  for (int e = 0; e < num_entities; ++e) {
    kb.vocab.add(Vocab::Space::Entity, padded("n", e, width));
  }
  for (int g = 0; g < spec.groups; ++g) {
    kb.vocab.add(Vocab::Space::Concept, "class" + std::to_string(g));
  }
  const int branch_a = kb.vocab.add(Vocab::Space::Concept, "branch_a");
  const int branch_b = kb.vocab.add(Vocab::Space::Concept, "branch_b");
  const int root = kb.vocab.add(Vocab::Space::Concept, "root");
  for (int r = 0; r < spec.relations; ++r) {
    kb.vocab.add(Vocab::Space::Relation, "rel" + std::to_string(r));
  }

  // Three-level chain: leaf -> branch -> root.
  for (int g = 0; g < spec.groups; ++g) {
    kb.tbox.push_back({g, g < spec.groups / 2 ? branch_a : branch_b});
  }
  kb.tbox.push_back({branch_a, root});
  kb.tbox.push_back({branch_b, root});

  for (int e = 0; e < num_entities; ++e) {
    kb.abox_ec.push_back({e, e / spec.entities_per_group});
  }

  Rng rng(spec.seed);
  std::vector<int> pool(spec.entities_per_group);
  for (int e = 0; e < num_entities; ++e) {
    const int g = e / spec.entities_per_group;
    for (int r = 0; r < spec.relations; ++r) {
      const int target_group = (g + r + 1) % spec.groups;
      for (int i = 0; i < spec.entities_per_group; ++i) {
        pool[i] = target_group * spec.entities_per_group + i;
      }
      rng.shuffle(pool);
      const int k = std::min(spec.out_degree, spec.entities_per_group);
      for (int i = 0; i < k; ++i) {
        kb.abox_ee.push_back({e, r, pool[i]});
      }
    }
  }
  return kb;
}

}  // namespace fuzzdl
