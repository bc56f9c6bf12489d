#include "fuzzdl/params.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fuzzdl/errors.hpp"
#include "fuzzdl/rng.hpp"

namespace fuzzdl {

std::vector<double> mlp_forward(const MlpParams& mlp,
                                const std::vector<double>& x,
                                std::vector<double>* hidden_pre) {
  const int in = mlp.in_dim(), hidden = mlp.hidden_dim(), out = mlp.out_dim();
  if (static_cast<int>(x.size()) != in) {
    throw DataError("mlp input size " + std::to_string(x.size()) +
                    ", expected " + std::to_string(in));
  }
  std::vector<double> h(hidden, 0.0);
  for (int i = 0; i < in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* w = mlp.w1.row(i);
    for (int j = 0; j < hidden; ++j) h[j] += xi * w[j];
  }
  for (int j = 0; j < hidden; ++j) h[j] += mlp.b1[j];
  if (hidden_pre) *hidden_pre = h;

  std::vector<double> y(mlp.b2);
  for (int j = 0; j < hidden; ++j) {
    const double a = h[j] > 0.0 ? h[j] : 0.0;  // ReLU
    if (a == 0.0) continue;
    const double* w = mlp.w2.row(j);
    for (int k = 0; k < out; ++k) y[k] += a * w[k];
  }
  return y;
}

namespace {

void xavier_fill(Matrix& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / (m.rows + m.cols));
  for (double& v : m.data) v = rng.uniform(-bound, bound);
}

}  // namespace

ParameterStore init_params(int num_entities, int num_concepts,
                           int num_relations, int d, std::uint64_t seed) {
  if (d < 1) throw DataError("embedding dimension must be >= 1");
  if (num_entities < 1) throw DataError("need at least one entity");
  ParameterStore p;
  p.d = d;
  p.entity_emb = Matrix(num_entities, d);
  p.concept_emb = Matrix(num_concepts, d);
  p.relation_emb = Matrix(num_relations, d);
  p.theta.w1 = Matrix(2 * d, d);
  p.theta.b1.assign(d, 0.0);
  p.theta.w2 = Matrix(d, 1);
  p.theta.b2.assign(1, 0.0);
  p.omega.w1 = Matrix(2 * d, d);
  p.omega.b1.assign(d, 0.0);
  p.omega.w2 = Matrix(d, 2 * d);
  p.omega.b2.assign(2 * d, 0.0);

  Rng rng(seed);
  xavier_fill(p.entity_emb, rng);
  xavier_fill(p.concept_emb, rng);
  xavier_fill(p.relation_emb, rng);
  xavier_fill(p.theta.w1, rng);
  xavier_fill(p.theta.w2, rng);
  xavier_fill(p.omega.w1, rng);
  xavier_fill(p.omega.w2, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

struct TensorRef {
  const char* name;
  const std::vector<double>* data;
  int rows;
  int cols;
};

std::vector<TensorRef> manifest(const ParameterStore& p) {
  return {
      {"E_e", &p.entity_emb.data, p.entity_emb.rows, p.entity_emb.cols},
      {"E_c", &p.concept_emb.data, p.concept_emb.rows, p.concept_emb.cols},
      {"E_r", &p.relation_emb.data, p.relation_emb.rows, p.relation_emb.cols},
      {"theta.w1", &p.theta.w1.data, p.theta.w1.rows, p.theta.w1.cols},
      {"theta.b1", &p.theta.b1, 1, static_cast<int>(p.theta.b1.size())},
      {"theta.w2", &p.theta.w2.data, p.theta.w2.rows, p.theta.w2.cols},
      {"theta.b2", &p.theta.b2, 1, static_cast<int>(p.theta.b2.size())},
      {"omega.w1", &p.omega.w1.data, p.omega.w1.rows, p.omega.w1.cols},
      {"omega.b1", &p.omega.b1, 1, static_cast<int>(p.omega.b1.size())},
      {"omega.w2", &p.omega.w2.data, p.omega.w2.rows, p.omega.w2.cols},
      {"omega.b2", &p.omega.b2, 1, static_cast<int>(p.omega.b2.size())},
  };
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32_le(std::string& out, float f) {
  auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const ParameterStore& params, const std::string& path) {
  auto tensors = manifest(params);
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["d"] = params.d;
  header["num_entities"] = params.num_entities();
  header["num_concepts"] = params.num_concepts();
  header["num_relations"] = params.num_relations();
  header["tnorm_kind"] = to_string(params.tnorm_kind);
  header["gamma"] = params.gamma;
  header["eps"] = params.eps;
  header["p_norm"] = params.p_norm;
  nlohmann::json tensor_list = nlohmann::json::array();
  for (const auto& t : tensors) {
    tensor_list.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  }
  header["tensors"] = tensor_list;
  const std::string header_text = header.dump();

  std::string blob;
  put_u64_le(blob, header_text.size());
  blob += header_text;
  for (const auto& t : tensors) {
    for (double v : *t.data) put_f32_le(blob, static_cast<float>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw DataError("checkpoint write failed: " + path);
}

ParameterStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  if (blob.size() < 8) throw DataError("checkpoint truncated: " + path);
  const std::uint64_t header_len = get_u64_le(bytes);
  if (blob.size() < 8 + header_len) {
    throw DataError("checkpoint truncated: " + path);
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint header: ") + e.what());
  }

  ParameterStore p;
  try {
    if (header.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version");
    }
    p.d = header.at("d").get<int>();
    p.gamma = header.at("gamma").get<double>();
    p.eps = header.at("eps").get<double>();
    p.p_norm = header.at("p_norm").get<double>();
    p.tnorm_kind = tnorm_from_string(header.at("tnorm_kind").get<std::string>());

    const int ne = header.at("num_entities").get<int>();
    const int nc = header.at("num_concepts").get<int>();
    const int nr = header.at("num_relations").get<int>();
    p.entity_emb = Matrix(ne, p.d);
    p.concept_emb = Matrix(nc, p.d);
    p.relation_emb = Matrix(nr, p.d);
    p.theta.w1 = Matrix(2 * p.d, p.d);
    p.theta.b1.assign(p.d, 0.0);
    p.theta.w2 = Matrix(p.d, 1);
    p.theta.b2.assign(1, 0.0);
    p.omega.w1 = Matrix(2 * p.d, p.d);
    p.omega.b1.assign(p.d, 0.0);
    p.omega.w2 = Matrix(p.d, 2 * p.d);
    p.omega.b2.assign(2 * p.d, 0.0);

    auto tensors = manifest(p);
    const auto& tensor_list = header.at("tensors");
    if (tensor_list.size() != tensors.size()) {
      throw DataError("checkpoint tensor manifest has wrong length");
    }
    std::size_t offset = 8 + header_len;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& entry = tensor_list[i];
      if (entry.at("name").get<std::string>() != tensors[i].name ||
          entry.at("rows").get<int>() != tensors[i].rows ||
          entry.at("cols").get<int>() != tensors[i].cols) {
        throw DataError(std::string("checkpoint tensor mismatch at ") +
                        tensors[i].name);
      }
      const std::size_t count = tensors[i].data->size();
      if (blob.size() < offset + 4 * count) {
        throw DataError("checkpoint truncated inside " +
                        std::string(tensors[i].name));
      }
      auto* dst = const_cast<std::vector<double>*>(tensors[i].data);
      for (std::size_t k = 0; k < count; ++k) {
        (*dst)[k] = static_cast<double>(get_f32_le(bytes + offset + 4 * k));
      }
      offset += 4 * count;
    }
    if (offset != blob.size()) {
      throw DataError("checkpoint has trailing bytes: " + path);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint header: ") + e.what());
  }
  return p;
}

}  // namespace fuzzdl
