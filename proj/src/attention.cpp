// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/attention.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/ops.hpp"

#include <cmath>

namespace msdnet {

void StdConfig::validate() const
{
  if (model_dim <= 0 || heads <= 0 || out_dim <= 0) throw ConfigError("std: dimensions must be positive");
  if (model_dim % heads != 0) {
    throw ConfigError("std: model_dim " + std::to_string(model_dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

StdParams make_std(ModelState &state, std::string const &prefix, StdConfig const &config, Index in_channels,
                   std::uint64_t seed)
{
  config.validate();
  Index const d = config.model_dim;
  StdParams   p;
  if (in_channels != d) p.input_proj = make_linear(state, prefix + ".input_proj", in_channels, d, seed);
  p.pos = state.add(prefix + ".pos", init_normal({d}, 1, 0.02, seed, prefix + ".pos").set_requires_grad(true));
  p.query = make_linear(state, prefix + ".query", d, d, seed);
  p.key = make_linear(state, prefix + ".key", d, d, seed);
  p.value = make_linear(state, prefix + ".value", d, d, seed);
  p.output = make_linear(state, prefix + ".output", d, d, seed);
  p.ffn_in = make_linear(state, prefix + ".ffn_in", d, 2 * d, seed, std::sqrt(2.0));
  p.ffn_out = make_linear(state, prefix + ".ffn_out", 2 * d, d, seed);
  p.head_out = make_linear(state, prefix + ".head_out", d, config.out_dim, seed);
  return p;
}

Tensor cross_attention(Tensor const      &query_token,
                       Tensor const      &tokens,
                       LinearLayer const &wq,
                       LinearLayer const &wk,
                       LinearLayer const &wv,
                       LinearLayer const &wo,
                       Index              heads,
                       AttentionTrace    *trace)
{
  if (query_token.rank() != 2 || query_token.dim(0) != 1) throw DimensionError("cross_attention: Query must be [1,d]");
  if (tokens.rank() != 2 || tokens.dim(1) != query_token.dim(1)) {
    throw DimensionError("cross_attention: tokens " + to_string(tokens.shape()) + " vs Query " +
                         to_string(query_token.shape()));
  }
  Index const d = query_token.dim(1);
  if (heads <= 0 || d % heads != 0) throw ConfigError("cross_attention: width not divisible by head count");
  Index const  dh = d / heads;
  Scalar const inv_sqrt = 1.0 / std::sqrt(static_cast<Scalar>(dh));

  Tensor const q = wq(query_token);
  Tensor const k = wk(tokens);
  Tensor const v = wv(tokens);

  std::vector<Tensor> head_out;
  for (Index h = 0; h < heads; ++h) {
    Tensor const qh = narrow(q, 1, h * dh, dh);
    Tensor const kh = narrow(k, 1, h * dh, dh);
    Tensor const vh = narrow(v, 1, h * dh, dh);
    Tensor const attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), 1);
    if (trace) trace->weights.push_back(attn);
    head_out.push_back(matmul(attn, vh));
  }
  Tensor const joined = concat(head_out, 1);
  if (trace) trace->heads = joined;
  return wo(joined);
}

MaskEmbedding std_forward(Prototype const &prototype,
                          Tensor const    &query_features,
                          StdParams const &params,
                          StdConfig const &config,
                          AttentionTrace  *trace)
{
  config.validate();
  if (query_features.rank() != 3) throw DimensionError("std_forward: query features must be [C,R,R]");
  Index const c = query_features.dim(0);
  Index const t = query_features.dim(1) * query_features.dim(2);
  if (prototype.vector.numel() != c) throw DimensionError("std_forward: prototype and query widths differ");

  Tensor tokens = transpose(reshape(query_features, {c, t}));
  Tensor proto = reshape(prototype.vector, {1, c});
  if (params.input_proj) {
    tokens = (*params.input_proj)(tokens);
    proto = (*params.input_proj)(proto);
  } else if (c != config.model_dim) {
    throw DimensionError("std_forward: feature width " + std::to_string(c) + " needs an input projection to " +
                         std::to_string(config.model_dim));
  }

  Tensor const query_token = add(proto, params.pos);
  Tensor const attended =
    cross_attention(query_token, tokens, params.query, params.key, params.value, params.output, config.heads, trace);
  Tensor const hidden = add(attended, query_token);
  Tensor const ffn = params.ffn_out(relu(params.ffn_in(hidden)));
  Tensor const out = params.head_out(ffn);
  return MaskEmbedding{l2_normalize(reshape(out, {config.out_dim}), 0, 1e-12)};
}

Tensor merge_dot_product(Tensor const &decoder_map, MaskEmbedding const &embedding)
{
  if (decoder_map.rank() != 3) throw DimensionError("merge_dot_product: decoder map must be [C,H,W]");
  Index const c = decoder_map.dim(0);
  if (embedding.vector.numel() != c) {
    throw DimensionError("merge_dot_product: embedding width " + std::to_string(embedding.vector.numel()) +
                         " vs decoder channels " + std::to_string(c));
  }
  Tensor const weighted = mul(decoder_map, reshape(embedding.vector, {c, 1, 1}));
  return reshape(sum(weighted, 0), {1, decoder_map.dim(1), decoder_map.dim(2)});
}

} // namespace msdnet
