#pragma once

#include <cstdint>

#include "fuzzdl/kb.hpp"

namespace fuzzdl {

// Deterministic benchmark KB: `groups` leaf concepts with
// `entities_per_group` members each, a three-level subsumption hierarchy
// (leaves -> two branches -> root), and relations that respect the group
// structure: relation k links group i to group (i + k + 1) mod groups, with
// `out_degree` distinct targets per (entity, relation).
struct SyntheticSpec {
  int groups = 10;
  int entities_per_group = 20;
  int relations = 5;
  int out_degree = 4;
  std::uint64_t seed = 7;
};

KnowledgeBase synthetic_kb(const SyntheticSpec& spec);

}  // namespace fuzzdl
