#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fuzzdl/fuzzy.hpp"

namespace fuzzdl {

// Central finite-difference verification of the analytic gradients: for each
// loss head and each supported query shape, a random micro-model is built and
// d(loss)/d(parameter) is compared against (L(x+h) - L(x-h)) / 2h for every
// parameter, with h = 1e-6 * max(1, |x|) and relative error measured as
// |a - f| / max(|a|, |f|, 1e-4).
struct GradCheckOptions {
  int d = 8;
  int entities = 50;
  int concepts = 10;
  int relations = 6;
  int m = 4;
  std::uint64_t seed = 1;
  TNormKind tnorm_kind = TNormKind::Product;
};

struct GradCheckResult {
  struct Item {
    std::string name;  // e.g. "con/2i", "ent/up", "sub", "ins"
    double max_rel_err = 0.0;
  };
  std::vector<Item> items;
  double max_rel_err = 0.0;
};

GradCheckResult run_gradcheck(const GradCheckOptions& opts);

}  // namespace fuzzdl
