#include "vfl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vfl {

namespace {

constexpr char kMagic[4] = {'V', 'F', 'L', 'C'};
constexpr std::uint32_t kVersion = 1;

// The on-disk format is little-endian; this writer targets little-endian
// hosts and writes raw in-memory representations.
template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename T>
T take(std::istream& in, const char* what) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(value));
  if (!in) throw std::runtime_error(std::string("checkpoint truncated reading ") + what);
  return value;
}

void put_doubles(std::ostream& out, const std::vector<double>& values) {
  put<std::uint64_t>(out, values.size());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> take_doubles(std::istream& in, const char* what) {
  auto n = take<std::uint64_t>(in, what);
  std::vector<double> values(n);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error(std::string("checkpoint truncated reading ") + what);
  return values;
}

void put_dims(std::ostream& out, const std::vector<std::size_t>& dims) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) put<std::uint64_t>(out, d);
}

std::vector<std::size_t> take_dims(std::istream& in, const char* what) {
  auto n = take<std::uint32_t>(in, what);
  std::vector<std::size_t> dims(n);
  for (auto& d : dims) d = static_cast<std::size_t>(take<std::uint64_t>(in, what));
  return dims;
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointData& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.method.size()));
  out.write(data.method.data(), static_cast<std::streamsize>(data.method.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.client_models.size()));
  for (const auto& model : data.client_models) {
    put_dims(out, model.layer_dims);
    put_doubles(out, model.params);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.heads.size()));
  for (const auto& head : data.heads) {
    put<std::uint64_t>(out, head.rows);
    put<std::uint64_t>(out, head.cols);
    put_doubles(out, head.data);
  }
  put_dims(out, data.server_layer_dims);
  put_doubles(out, data.server_params);
  put_doubles(out, data.alpha);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("'" + path + "' is not a model checkpoint (bad magic)");
  auto version = take<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  CheckpointData data;
  auto method_len = take<std::uint32_t>(in, "method");
  data.method.resize(method_len);
  in.read(data.method.data(), method_len);
  if (!in) throw std::runtime_error("checkpoint truncated reading method name");
  auto clients = take<std::uint32_t>(in, "client count");
  data.client_models.resize(clients);
  for (auto& model : data.client_models) {
    model.layer_dims = take_dims(in, "layer dims");
    model.params = take_doubles(in, "client params");
    if (model.params.size() != MlpModel::param_count(model.layer_dims))
      throw std::runtime_error("checkpoint client parameter count mismatch");
  }
  auto heads = take<std::uint32_t>(in, "head count");
  data.heads.resize(heads);
  for (auto& head : data.heads) {
    head.rows = static_cast<std::size_t>(take<std::uint64_t>(in, "head rows"));
    head.cols = static_cast<std::size_t>(take<std::uint64_t>(in, "head cols"));
    head.data = take_doubles(in, "head data");
    if (head.data.size() != head.rows * head.cols)
      throw std::runtime_error("checkpoint head size mismatch");
  }
  data.server_layer_dims = take_dims(in, "server dims");
  data.server_params = take_doubles(in, "server params");
  data.alpha = take_doubles(in, "alpha");
  return data;
}

std::vector<Matrix> client_embeddings(const CheckpointData& data,
                                      const std::vector<Matrix>& blocks) {
  if (blocks.size() != data.client_models.size())
    throw std::invalid_argument("block count does not match checkpoint client count");
  std::vector<Matrix> embeddings(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k)
    embeddings[k] = mlp_forward(data.client_models[k], blocks[k]);
  return embeddings;
}

std::vector<Matrix> client_head_maps(const CheckpointData& data) {
  if (!data.heads.empty()) return data.heads;
  std::size_t m = data.client_models.size();
  if (m == 0 || data.server_layer_dims.size() < 2)
    throw std::runtime_error("checkpoint has neither heads nor a server model");
  std::size_t d_f = data.client_models[0].layer_dims.back();
  std::size_t out = data.server_layer_dims[1];
  std::vector<Matrix> heads;
  heads.reserve(m);
  if (data.method == "vafl") {
    if (data.alpha.size() != m)
      throw std::runtime_error("checkpoint is missing aggregation weights");
    Matrix v(d_f, out);
    std::copy(data.server_params.begin(),
              data.server_params.begin() + static_cast<std::ptrdiff_t>(d_f * out),
              v.data.begin());
    for (std::size_t k = 0; k < m; ++k) {
      Matrix h = v;
      for (double& x : h.data) x *= data.alpha[k];
      heads.push_back(std::move(h));
    }
    return heads;
  }
  if (data.server_layer_dims[0] != m * d_f)
    throw std::runtime_error("server input width does not match M·d_f");
  for (std::size_t k = 0; k < m; ++k) {
    Matrix block(d_f, out);
    std::copy(data.server_params.begin() + static_cast<std::ptrdiff_t>(k * d_f * out),
              data.server_params.begin() + static_cast<std::ptrdiff_t>((k + 1) * d_f * out),
              block.data.begin());
    heads.push_back(std::move(block));
  }
  return heads;
}

Matrix infer_logits(const CheckpointData& data, const std::vector<Matrix>& blocks) {
  std::vector<Matrix> embeddings = client_embeddings(data, blocks);
  const std::string& m = data.method;
  if (m == "vimadmm" || m == "vimadmm-j" || m == "fdml") {
    if (data.heads.size() != embeddings.size())
      throw std::runtime_error("checkpoint is missing per-client heads");
    Matrix out(embeddings[0].rows, data.heads[0].cols);
    for (std::size_t k = 0; k < embeddings.size(); ++k)
      add_in_place(out, matmul(embeddings[k], data.heads[k]));
    return out;
  }
  MlpModel server{data.server_layer_dims, data.server_params};
  if (m == "split" || m == "fedbcd") return mlp_forward(server, hconcat(embeddings));
  if (m == "vafl") {
    if (data.alpha.size() != embeddings.size())
      throw std::runtime_error("checkpoint is missing aggregation weights");
    Matrix hbar(embeddings[0].rows, embeddings[0].cols);
    for (std::size_t k = 0; k < embeddings.size(); ++k)
      add_in_place(hbar, embeddings[k], data.alpha[k]);
    return mlp_forward(server, hbar);
  }
  throw std::runtime_error("unknown checkpoint method '" + m + "'");
}

}  // namespace vfl
