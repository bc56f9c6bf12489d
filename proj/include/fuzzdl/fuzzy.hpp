#pragma once

#include <string>
#include <vector>

namespace fuzzdl {

enum class TNormKind { Godel, Product, Lukasiewicz };

TNormKind tnorm_from_string(const std::string& name);  // godel|product|lukasiewicz
const char* to_string(TNormKind kind);

// Membership degrees for every entity; values in [0,1], no NaN/Inf.
using FuzzySet = std::vector<double>;

void validate_fuzzy_set(const FuzzySet& fs, std::size_t expected_size);

// Generalized conjunction on degrees. Inputs must lie in [0,1].
double tnorm(TNormKind kind, double x, double y);
// Dual disjunction 1 - tnorm(1-x, 1-y).
double tconorm(TNormKind kind, double x, double y);
double fuzzy_not(double x);

// Subgradients for training. Ties (Godel min, Lukasiewicz boundary) route to
// the first argument / the constant branch so backprop is deterministic.
struct DegreeGrad {
  double dx = 0.0;
  double dy = 0.0;
};
DegreeGrad tnorm_grad(TNormKind kind, double x, double y);
DegreeGrad tconorm_grad(TNormKind kind, double x, double y);

// Element-wise lifts onto whole fuzzy sets.
FuzzySet fs_and(TNormKind kind, const FuzzySet& a, const FuzzySet& b);
FuzzySet fs_or(TNormKind kind, const FuzzySet& a, const FuzzySet& b);
FuzzySet fs_not(const FuzzySet& a);

// Floor applied inside logarithms so zero memberships stay finite.
inline constexpr double kLogFloor = 1e-12;

// Jensen-Shannon divergence with natural log:
//   D = 1/2 KL(P||M) + 1/2 KL(Q||M),  M = (P+Q)/2,
// where log arguments are clamped to >= kLogFloor. The core makes no
// distribution assumption; the checked front door validates shape,
// non-negativity and unit sums (1e-6) per the public contract.
double js_divergence_core(const std::vector<double>& p,
                          const std::vector<double>& q);
double js_divergence(const std::vector<double>& p,
                     const std::vector<double>& q);

// d(D_JS)/dp_k and /dq_k, matching js_divergence_core including its clamps.
void js_divergence_grad(const std::vector<double>& p,
                        const std::vector<double>& q, std::vector<double>& dp,
                        std::vector<double>& dq);

}  // namespace fuzzdl
