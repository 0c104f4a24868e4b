// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/parameters.hpp"
#include "msdnet/prototype.hpp"
#include "msdnet/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msdnet {

struct StdConfig
{
  Index model_dim = 64;
  Index heads = 4;
  Index out_dim = 32; // must equal the decoder's last stage width

  Index head_dim() const { return model_dim / heads; }
  void  validate() const;
};

struct MaskEmbedding
{
  Tensor vector; // [out_dim], unit length
};

/// Learnable tensors of the spatial transformer decoder.
struct StdParams
{
  std::optional<LinearLayer> input_proj; // present when feature width != model_dim
  Tensor                     pos;        // [model_dim], added to the prototype Query token
  LinearLayer                query;
  LinearLayer                key;
  LinearLayer                value;
  LinearLayer                output;
  LinearLayer                ffn_in;     // d -> 2d
  LinearLayer                ffn_out;    // 2d -> d
  LinearLayer                head_out;   // d -> out_dim
};

StdParams make_std(ModelState &state, std::string const &prefix, StdConfig const &config, Index in_channels,
                   std::uint64_t seed);

/// Intermediate values exposed for inspection.
struct AttentionTrace
{
  std::vector<Tensor> weights; // per head, [1, T]
  Tensor              heads;   // concatenated head outputs before the output projection, [1, d]
};

/// Multi-head attention of one Query token [1,d] over tokens [T,d].
/// Returns the output projection of the concatenated heads, [1,d].
Tensor cross_attention(Tensor const      &query_token,
                       Tensor const      &tokens,
                       LinearLayer const &wq,
                       LinearLayer const &wk,
                       LinearLayer const &wv,
                       LinearLayer const &wo,
                       Index              heads,
                       AttentionTrace    *trace = nullptr);

/// Prototype (+ positional encoding) attends over the query feature tokens;
/// one attention block, residual, feed-forward, projection to out_dim,
/// scaled to unit length.
MaskEmbedding std_forward(Prototype const &prototype,
                          Tensor const    &query_features,
                          StdParams const &params,
                          StdConfig const &config,
                          AttentionTrace  *trace = nullptr);

/// logit[0,i,j] = sum_c decoder_map[c,i,j] * embedding[c].
Tensor merge_dot_product(Tensor const &decoder_map, MaskEmbedding const &embedding);

} // namespace msdnet
