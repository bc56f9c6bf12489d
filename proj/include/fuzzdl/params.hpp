#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fuzzdl/fuzzy.hpp"

namespace fuzzdl {

// Row-major dense matrix of doubles (embeddings are stored one row per id).
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const {
    return data.data() + static_cast<std::size_t>(r) * cols;
  }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  bool operator==(const Matrix&) const = default;
};

// linear(in -> hidden), ReLU, linear(hidden -> out). Weights are stored
// input-major: w1 is in x hidden, w2 is hidden x out, so
// h_j = sum_i x_i w1[i][j] + b1[j].
struct MlpParams {
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
  bool operator==(const MlpParams&) const = default;

  int in_dim() const { return w1.rows; }
  int hidden_dim() const { return w1.cols; }
  int out_dim() const { return w2.cols; }
};

// Forward pass; `hidden_pre` receives the pre-activation values needed by the
// backward pass.
std::vector<double> mlp_forward(const MlpParams& mlp,
                                const std::vector<double>& x,
                                std::vector<double>* hidden_pre = nullptr);

// Everything the model learns, plus the fixed scoring hyperparameters.
struct ParameterStore {
  int d = 0;
  double gamma = 12.0;   // margin of the entity-distance score
  double eps = 1e-12;    // norm floor when turning fuzzy sets into distributions
  double p_norm = 1.0;   // norm exponent for that normalization
  TNormKind tnorm_kind = TNormKind::Product;

  Matrix entity_emb;    // |E| x d
  Matrix concept_emb;   // |C| x d
  Matrix relation_emb;  // |R| x d
  MlpParams theta;      // subsumption scorer, 2d -> d -> 1
  MlpParams omega;      // intersection attention, 2d -> d -> 2d

  int num_entities() const { return entity_emb.rows; }
  int num_concepts() const { return concept_emb.rows; }
  int num_relations() const { return relation_emb.rows; }
  bool operator==(const ParameterStore&) const = default;
};

// Xavier-uniform init: every weight matrix i.i.d. uniform with bound
// sqrt(6 / (rows + cols)); biases start at zero. Deterministic per seed.
ParameterStore init_params(int num_entities, int num_concepts,
                           int num_relations, int d, std::uint64_t seed);

// Binary checkpoint: u64 little-endian header length, JSON header (settings +
// tensor manifest), then each tensor as little-endian float32 in manifest
// order. Saving a just-loaded store reproduces the file byte for byte.
void save_checkpoint(const ParameterStore& params, const std::string& path);
ParameterStore load_checkpoint(const std::string& path);

}  // namespace fuzzdl
