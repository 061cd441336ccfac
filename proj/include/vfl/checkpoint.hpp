#pragma once

#include <string>
#include <vector>

#include "vfl/matrix.hpp"
#include "vfl/nn.hpp"

namespace vfl {

// Inference-time model state, sufficient to reproduce predictions for any
// method. Persisted as a little-endian binary: magic "VFLC", u32 version,
// method string, client extractors (layer dims + raw 8-byte doubles), heads,
// and the optional server model / aggregation weights.
struct CheckpointData {
  std::string method;
  std::vector<MlpModel> client_models;         // feature extractors, all methods
  std::vector<Matrix> heads;                   // per-client W_k where the method has them
  std::vector<std::size_t> server_layer_dims;  // split family and VAFL server model
  std::vector<double> server_params;
  std::vector<double> alpha;                   // VAFL aggregation weights
};

void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

// Logits on aligned feature blocks, dispatched on data.method:
//   vimadmm / vimadmm-j / fdml : Σ_k f(x^k;θ_k)·W_k
//   split / fedbcd             : server(concat_k f(x^k;θ_k))
//   vafl                       : server(Σ_k α_k·f(x^k;θ_k))
Matrix infer_logits(const CheckpointData& data, const std::vector<Matrix>& blocks);

// Per-client embedding matrices f(x^k;θ_k) for the given blocks.
std::vector<Matrix> client_embeddings(const CheckpointData& data,
                                      const std::vector<Matrix>& blocks);

// Per-client linear head maps for importance ranking: the stored W_k where
// the method has them; d_f-row slices of the server's first layer for the
// split family; α_k·V for VAFL.
std::vector<Matrix> client_head_maps(const CheckpointData& data);

}  // namespace vfl
