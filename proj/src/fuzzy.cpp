#include "fuzzdl/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fuzzdl/errors.hpp"

namespace fuzzdl {

TNormKind tnorm_from_string(const std::string& name) {
  if (name == "godel") return TNormKind::Godel;
  if (name == "product") return TNormKind::Product;
  if (name == "lukasiewicz") return TNormKind::Lukasiewicz;
  throw DataError("unknown t-norm '" + name +
                  "' (expected godel|product|lukasiewicz)");
}

const char* to_string(TNormKind kind) {
  switch (kind) {
    case TNormKind::Godel: return "godel";
    case TNormKind::Product: return "product";
    case TNormKind::Lukasiewicz: return "lukasiewicz";
  }
  return "?";
}

void validate_fuzzy_set(const FuzzySet& fs, std::size_t expected_size) {
  if (fs.size() != expected_size) {
    throw std::domain_error("fuzzy set has length " +
                            std::to_string(fs.size()) + ", expected " +
                            std::to_string(expected_size));
  }
  for (double v : fs) {
    if (!(v >= 0.0 && v <= 1.0)) {  // also rejects NaN
      throw std::domain_error("fuzzy membership " + std::to_string(v) +
                              " outside [0,1]");
    }
  }
}

namespace {

void check_degree(double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error("degree " + std::to_string(x) + " outside [0,1]");
  }
}

}  // namespace

double tnorm(TNormKind kind, double x, double y) {
  check_degree(x);
  check_degree(y);
  switch (kind) {
    case TNormKind::Godel: return std::min(x, y);
    case TNormKind::Product: return x * y;
    case TNormKind::Lukasiewicz: return std::max(0.0, x + y - 1.0);
  }
  return 0.0;
}

double tconorm(TNormKind kind, double x, double y) {
  return 1.0 - tnorm(kind, 1.0 - x, 1.0 - y);
}

double fuzzy_not(double x) {
  check_degree(x);
  return 1.0 - x;
}

DegreeGrad tnorm_grad(TNormKind kind, double x, double y) {
  check_degree(x);
  check_degree(y);
  switch (kind) {
    case TNormKind::Godel:
      // min: ties route to the first argument.
      return x <= y ? DegreeGrad{1.0, 0.0} : DegreeGrad{0.0, 1.0};
    case TNormKind::Product:
      return {y, x};
    case TNormKind::Lukasiewicz:
      // At the clamp boundary the constant branch wins (subgradient 0).
      return x + y - 1.0 > 0.0 ? DegreeGrad{1.0, 1.0} : DegreeGrad{0.0, 0.0};
  }
  return {};
}

DegreeGrad tconorm_grad(TNormKind kind, double x, double y) {
  // d/dx [1 - T(1-x, 1-y)] = dT/du evaluated at (1-x, 1-y).
  DegreeGrad g = tnorm_grad(kind, 1.0 - x, 1.0 - y);
  return {g.dx, g.dy};
}

FuzzySet fs_and(TNormKind kind, const FuzzySet& a, const FuzzySet& b) {
  if (a.size() != b.size()) {
    throw std::domain_error("fuzzy set length mismatch: " +
                            std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  FuzzySet out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = tnorm(kind, a[i], b[i]);
  return out;
}

FuzzySet fs_or(TNormKind kind, const FuzzySet& a, const FuzzySet& b) {
  if (a.size() != b.size()) {
    throw std::domain_error("fuzzy set length mismatch: " +
                            std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  FuzzySet out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = tconorm(kind, a[i], b[i]);
  return out;
}

FuzzySet fs_not(const FuzzySet& a) {
  FuzzySet out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fuzzy_not(a[i]);
  return out;
}

// ---------------------------------------------------------------------------

double js_divergence_core(const std::vector<double>& p,
                          const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw DivergenceError("divergence length mismatch: " +
                          std::to_string(p.size()) + " vs " +
                          std::to_string(q.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    const double log_m = std::log(std::max(m, kLogFloor));
    acc += p[i] * (std::log(std::max(p[i], kLogFloor)) - log_m);
    acc += q[i] * (std::log(std::max(q[i], kLogFloor)) - log_m);
  }
  return 0.5 * acc;
}

double js_divergence(const std::vector<double>& p,
                     const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw DivergenceError("divergence length mismatch: " +
                          std::to_string(p.size()) + " vs " +
                          std::to_string(q.size()));
  }
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0 || std::isnan(p[i]) || std::isnan(q[i])) {
      throw DivergenceError("negative entry in probability vector");
    }
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-6 || std::abs(sq - 1.0) > 1e-6) {
    throw DivergenceError("probability vector does not sum to 1 (got " +
                          std::to_string(sp) + " and " + std::to_string(sq) +
                          ")");
  }
  return js_divergence_core(p, q);
}

void js_divergence_grad(const std::vector<double>& p,
                        const std::vector<double>& q, std::vector<double>& dp,
                        std::vector<double>& dq) {
  if (p.size() != q.size()) {
    throw DivergenceError("divergence length mismatch: " +
                          std::to_string(p.size()) + " vs " +
                          std::to_string(q.size()));
  }
  dp.assign(p.size(), 0.0);
  dq.assign(q.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    const double m_hat = std::max(m, kLogFloor);
    const double log_m = std::log(m_hat);
    // When m sits below the floor, log m is constant and its term vanishes.
    const double dm_term = m > kLogFloor ? (p[i] + q[i]) / (2.0 * m_hat) : 0.0;
    dp[i] = 0.5 * (std::log(std::max(p[i], kLogFloor)) - log_m +
                   (p[i] > kLogFloor ? 1.0 : 0.0) - dm_term);
    dq[i] = 0.5 * (std::log(std::max(q[i], kLogFloor)) - log_m +
                   (q[i] > kLogFloor ? 1.0 : 0.0) - dm_term);
  }
}

}  // namespace fuzzdl
