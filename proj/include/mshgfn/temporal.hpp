#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mshgfn/ops.hpp"

namespace mshgfn {

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

// Fixed sinusoidal positional table, tiled over the stock axis so it can be
// added to the projected input [N,L,D].
inline Tensor positional_encoding(std::size_t num_stocks, std::size_t len,
                                  std::size_t dim) {
  Tensor pe({num_stocks, len, dim});
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t j = 0; j < dim; ++j) {
      double angle =
          static_cast<double>(t) /
          std::pow(10000.0, 2.0 * static_cast<double>(j / 2) /
                                static_cast<double>(dim));
      double v = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
      for (std::size_t i = 0; i < num_stocks; ++i) pe.at3(i, t, j) = v;
    }
  return pe;
}

// One encoder block: input projection + positional encoding, multi-head
// scaled dot-product attention, output projection, residual, layer norm.
struct TemporalEncoderParams {
  Tensor input_proj;                 // D_in x D
  std::vector<Tensor> wq, wk, wv;    // per head, D x d_h
  Tensor output_proj;                // (H*d_h) x D
  Tensor ln_gain, ln_bias;           // D

  void init(std::size_t d_in, std::size_t d_model, std::size_t heads,
            std::mt19937_64& rng) {
    if (d_model % heads != 0)
      throw std::invalid_argument("head count must divide model dimension");
    std::size_t d_h = d_model / heads;
    input_proj = xavier_uniform(d_in, d_model, rng);
    wq.clear();
    wk.clear();
    wv.clear();
    for (std::size_t h = 0; h < heads; ++h) {
      wq.push_back(xavier_uniform(d_model, d_h, rng));
      wk.push_back(xavier_uniform(d_model, d_h, rng));
      wv.push_back(xavier_uniform(d_model, d_h, rng));
    }
    output_proj = xavier_uniform(heads * d_h, d_model, rng);
    ln_gain = Tensor({d_model}, 1.0, true);
    ln_bias = Tensor({d_model}, 0.0, true);
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".input_proj", &input_proj});
    for (std::size_t h = 0; h < wq.size(); ++h) {
      out.push_back({prefix + ".wq" + std::to_string(h), &wq[h]});
      out.push_back({prefix + ".wk" + std::to_string(h), &wk[h]});
      out.push_back({prefix + ".wv" + std::to_string(h), &wv[h]});
    }
    out.push_back({prefix + ".output_proj", &output_proj});
    out.push_back({prefix + ".ln_gain", &ln_gain});
    out.push_back({prefix + ".ln_bias", &ln_bias});
  }
};

// Encodes one scale's series [N,L_k,D_in] into [N,D].  The temporal axis is
// collapsed by taking the final timestep (or the time mean when
// `time_mean_pool` is set).
inline Tensor encode_scale(const Tensor& x, const TemporalEncoderParams& p,
                           double dropout_p, bool training,
                           std::mt19937_64& rng, bool time_mean_pool = false,
                           std::vector<Tensor>* attention_out = nullptr) {
  if (x.rank() != 3 || x.dim(1) == 0)
    throw std::invalid_argument("encode_scale: need a non-empty [N,L,D] input");
  std::size_t n = x.dim(0), len = x.dim(1);
  std::size_t d_model = p.input_proj.dim(1);
  std::size_t heads = p.wq.size();
  std::size_t d_h = d_model / heads;
  Tensor xd = ops::add(ops::matmul(x, p.input_proj),
                       positional_encoding(n, len, d_model));
  std::vector<Tensor> head_outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor q = ops::matmul(xd, p.wq[h]);
    Tensor k = ops::matmul(xd, p.wk[h]);
    Tensor v = ops::matmul(xd, p.wv[h]);
    Tensor scores = ops::scale(ops::matmul(q, ops::transpose(k)),
                               1.0 / std::sqrt(static_cast<double>(d_h)));
    Tensor attn = ops::softmax(scores, 2);
    if (attention_out) attention_out->push_back(attn);
    head_outputs.push_back(ops::matmul(attn, v));
  }
  Tensor merged = heads == 1 ? head_outputs[0] : ops::concat(head_outputs, 2);
  Tensor projected = ops::matmul(merged, p.output_proj);
  projected = ops::dropout(projected, dropout_p, training, rng);
  Tensor z_full = ops::layer_norm(ops::add(xd, projected), p.ln_gain,
                                  p.ln_bias);
  return time_mean_pool ? ops::mean(z_full, 1)
                        : ops::select_step(z_full, len - 1);
}

// Single-layer LSTM cell, used by the temporal-encoder ablation.
struct LstmParams {
  // gate order: input, forget, cell, output
  std::vector<Tensor> wx;  // 4 x (D_in x D)
  std::vector<Tensor> wh;  // 4 x (D x D)
  std::vector<Tensor> b;   // 4 x D

  void init(std::size_t d_in, std::size_t d_model, std::mt19937_64& rng) {
    wx.clear();
    wh.clear();
    b.clear();
    for (int g = 0; g < 4; ++g) {
      wx.push_back(xavier_uniform(d_in, d_model, rng));
      wh.push_back(xavier_uniform(d_model, d_model, rng));
      b.push_back(Tensor({d_model}, 0.0, true));
    }
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out) {
    static const char* gate[4] = {"i", "f", "g", "o"};
    for (int g = 0; g < 4; ++g) {
      out.push_back({prefix + ".wx_" + gate[g], &wx[g]});
      out.push_back({prefix + ".wh_" + gate[g], &wh[g]});
      out.push_back({prefix + ".b_" + gate[g], &b[g]});
    }
  }
};

// Unrolls the cell over the time axis and returns the final hidden state.
inline Tensor lstm_encode_scale(const Tensor& x, const LstmParams& p) {
  std::size_t n = x.dim(0), len = x.dim(1);
  std::size_t d_model = p.wh[0].dim(0);
  Tensor h({n, d_model});
  Tensor c({n, d_model});
  for (std::size_t t = 0; t < len; ++t) {
    Tensor xt = ops::select_step(x, t);
    auto gate = [&](int g) {
      return ops::add_bias(
          ops::add(ops::matmul(xt, p.wx[g]), ops::matmul(h, p.wh[g])),
          p.b[g]);
    };
    Tensor gi = ops::sigmoid(gate(0));
    Tensor gf = ops::sigmoid(gate(1));
    Tensor gg = ops::tanh(gate(2));
    Tensor go = ops::sigmoid(gate(3));
    c = ops::add(ops::mul(gf, c), ops::mul(gi, gg));
    h = ops::mul(go, ops::tanh(c));
  }
  return h;
}

}  // namespace mshgfn
