#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "uecg/model/registry.hpp"
#include "uecg/nn/ops.hpp"
#include "uecg/nn/rng.hpp"
#include "uecg/nn/tensor.hpp"

// Pre-LN transformer building blocks shared by the language model, the mapper
// and the report encoder. Everything is composed from the primitive ops, so a
// single gradient check of the primitives covers these too; the blocks are
// still checked end to end in the tests.

namespace uecg::model {

template <typename S>
struct AttnParams {
  nn::Tensor<S> wq, bq, wk, bk, wv, bv, wo, bo;

  static AttnParams init(std::size_t width, nn::Rng& rng) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(width));
    AttnParams p;
    p.wq = nn::Tensor<S>::randn({width, width}, rng, sd, true);
    p.bq = nn::Tensor<S>::zeros({width}, true);
    p.wk = nn::Tensor<S>::randn({width, width}, rng, sd, true);
    p.bk = nn::Tensor<S>::zeros({width}, true);
    p.wv = nn::Tensor<S>::randn({width, width}, rng, sd, true);
    p.bv = nn::Tensor<S>::zeros({width}, true);
    p.wo = nn::Tensor<S>::randn({width, width}, rng, sd, true);
    p.bo = nn::Tensor<S>::zeros({width}, true);
    return p;
  }

  void register_params(Registry<S>& reg, const std::string& group) const {
    add_entry(reg, "wq", wq, group);
    add_entry(reg, "bq", bq, group);
    add_entry(reg, "wk", wk, group);
    add_entry(reg, "bk", bk, group);
    add_entry(reg, "wv", wv, group);
    add_entry(reg, "bv", bv, group);
    add_entry(reg, "wo", wo, group);
    add_entry(reg, "bo", bo, group);
  }
};

// Additive mask with -1e9 above the diagonal. exp() of masked scores
// underflows to exactly zero, so earlier positions are bitwise independent of
// later content.
template <typename S>
nn::Tensor<S> causal_mask(std::size_t tq, std::size_t tk) {
  std::vector<S> m(tq * tk, S(0));
  for (std::size_t i = 0; i < tq; ++i)
    for (std::size_t j = i + 1; j < tk; ++j) m[i * tk + j] = static_cast<S>(-1e9);
  return nn::Tensor<S>::from({tq, tk}, std::move(m));
}

// Multi-head scaled dot-product attention; queries from `xq`, keys/values from
// `xkv` (self-attention when they alias, cross-attention otherwise).
template <typename S>
nn::Tensor<S> attention(const AttnParams<S>& p, const nn::Tensor<S>& xq,
                        const nn::Tensor<S>& xkv, std::size_t heads, bool causal) {
  const std::size_t width = p.wq.cols();
  if (width % heads != 0)
    throw DimensionError("attention: width " + std::to_string(width) + " not divisible by " +
                         std::to_string(heads) + " heads");
  const std::size_t hd = width / heads;
  auto q = nn::add_rowvec(nn::matmul(xq, p.wq), p.bq);
  auto k = nn::add_rowvec(nn::matmul(xkv, p.wk), p.bk);
  auto v = nn::add_rowvec(nn::matmul(xkv, p.wv), p.bv);
  const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hd)));
  nn::Tensor<S> mask;
  if (causal) mask = causal_mask<S>(xq.rows(), xkv.rows());
  std::vector<nn::Tensor<S>> ctx;
  ctx.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = nn::slice_cols(q, h * hd, (h + 1) * hd);
    auto kh = nn::slice_cols(k, h * hd, (h + 1) * hd);
    auto vh = nn::slice_cols(v, h * hd, (h + 1) * hd);
    auto scores = nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt);
    if (causal) scores = nn::add(scores, mask);
    ctx.push_back(nn::matmul(nn::softmax_rows(scores), vh));
  }
  return nn::add_rowvec(nn::matmul(nn::concat_cols(ctx), p.wo), p.bo);
}

template <typename S>
struct BlockParams {
  nn::Tensor<S> ln1_g, ln1_b;
  AttnParams<S> attn;
  nn::Tensor<S> ln2_g, ln2_b;
  nn::Tensor<S> wf1, bf1, wf2, bf2;

  static BlockParams init(std::size_t width, nn::Rng& rng) {
    BlockParams p;
    p.ln1_g = nn::Tensor<S>::filled({width}, S(1), true);
    p.ln1_b = nn::Tensor<S>::zeros({width}, true);
    p.attn = AttnParams<S>::init(width, rng);
    p.ln2_g = nn::Tensor<S>::filled({width}, S(1), true);
    p.ln2_b = nn::Tensor<S>::zeros({width}, true);
    const std::size_t hidden = 4 * width;
    p.wf1 = nn::Tensor<S>::randn({width, hidden}, rng, 1.0 / std::sqrt(double(width)), true);
    p.bf1 = nn::Tensor<S>::zeros({hidden}, true);
    p.wf2 = nn::Tensor<S>::randn({hidden, width}, rng, 1.0 / std::sqrt(double(hidden)), true);
    p.bf2 = nn::Tensor<S>::zeros({width}, true);
    return p;
  }

  void register_params(Registry<S>& reg, const std::string& group) const {
    add_entry(reg, "ln1.g", ln1_g, group);
    add_entry(reg, "ln1.b", ln1_b, group);
    Registry<S> sub;
    attn.register_params(sub, group);
    merge_registry(reg, "attn.", std::move(sub));
    add_entry(reg, "ln2.g", ln2_g, group);
    add_entry(reg, "ln2.b", ln2_b, group);
    add_entry(reg, "ffn.w1", wf1, group);
    add_entry(reg, "ffn.b1", bf1, group);
    add_entry(reg, "ffn.w2", wf2, group);
    add_entry(reg, "ffn.b2", bf2, group);
  }
};

template <typename S>
nn::Tensor<S> feed_forward(const BlockParams<S>& p, const nn::Tensor<S>& x) {
  auto h = nn::gelu(nn::add_rowvec(nn::matmul(x, p.wf1), p.bf1));
  return nn::add_rowvec(nn::matmul(h, p.wf2), p.bf2);
}

template <typename S>
nn::Tensor<S> transformer_block(const BlockParams<S>& p, const nn::Tensor<S>& x,
                                std::size_t heads, bool causal) {
  auto n1 = nn::layer_norm(x, p.ln1_g, p.ln1_b);
  auto h = nn::add(x, attention(p.attn, n1, n1, heads, causal));
  auto n2 = nn::layer_norm(h, p.ln2_g, p.ln2_b);
  return nn::add(h, feed_forward(p, n2));
}

// Decoder block: self-attention over the queries, then cross-attention into
// the encoder output, then the feed-forward.
template <typename S>
struct DecoderBlockParams {
  nn::Tensor<S> ln1_g, ln1_b;
  AttnParams<S> self_attn;
  nn::Tensor<S> ln2_g, ln2_b;
  AttnParams<S> cross_attn;
  nn::Tensor<S> ln3_g, ln3_b;
  nn::Tensor<S> wf1, bf1, wf2, bf2;

  static DecoderBlockParams init(std::size_t width, nn::Rng& rng) {
    DecoderBlockParams p;
    p.ln1_g = nn::Tensor<S>::filled({width}, S(1), true);
    p.ln1_b = nn::Tensor<S>::zeros({width}, true);
    p.self_attn = AttnParams<S>::init(width, rng);
    p.ln2_g = nn::Tensor<S>::filled({width}, S(1), true);
    p.ln2_b = nn::Tensor<S>::zeros({width}, true);
    p.cross_attn = AttnParams<S>::init(width, rng);
    p.ln3_g = nn::Tensor<S>::filled({width}, S(1), true);
    p.ln3_b = nn::Tensor<S>::zeros({width}, true);
    const std::size_t hidden = 4 * width;
    p.wf1 = nn::Tensor<S>::randn({width, hidden}, rng, 1.0 / std::sqrt(double(width)), true);
    p.bf1 = nn::Tensor<S>::zeros({hidden}, true);
    p.wf2 = nn::Tensor<S>::randn({hidden, width}, rng, 1.0 / std::sqrt(double(hidden)), true);
    p.bf2 = nn::Tensor<S>::zeros({width}, true);
    return p;
  }

  void register_params(Registry<S>& reg, const std::string& group) const {
    add_entry(reg, "ln1.g", ln1_g, group);
    add_entry(reg, "ln1.b", ln1_b, group);
    Registry<S> sub;
    self_attn.register_params(sub, group);
    merge_registry(reg, "self.", std::move(sub));
    add_entry(reg, "ln2.g", ln2_g, group);
    add_entry(reg, "ln2.b", ln2_b, group);
    Registry<S> sub2;
    cross_attn.register_params(sub2, group);
    merge_registry(reg, "cross.", std::move(sub2));
    add_entry(reg, "ln3.g", ln3_g, group);
    add_entry(reg, "ln3.b", ln3_b, group);
    add_entry(reg, "ffn.w1", wf1, group);
    add_entry(reg, "ffn.b1", bf1, group);
    add_entry(reg, "ffn.w2", wf2, group);
    add_entry(reg, "ffn.b2", bf2, group);
  }
};

template <typename S>
nn::Tensor<S> decoder_block(const DecoderBlockParams<S>& p, const nn::Tensor<S>& queries,
                            const nn::Tensor<S>& enc_out, std::size_t heads) {
  auto n1 = nn::layer_norm(queries, p.ln1_g, p.ln1_b);
  auto h = nn::add(queries, attention(p.self_attn, n1, n1, heads, false));
  auto n2 = nn::layer_norm(h, p.ln2_g, p.ln2_b);
  h = nn::add(h, attention(p.cross_attn, n2, enc_out, heads, false));
  auto n3 = nn::layer_norm(h, p.ln3_g, p.ln3_b);
  auto f = nn::gelu(nn::add_rowvec(nn::matmul(n3, p.wf1), p.bf1));
  return nn::add(h, nn::add_rowvec(nn::matmul(f, p.wf2), p.bf2));
}

}  // namespace uecg::model
