#pragma once

#include <random>
#include <vector>

#include "mshgfn/ops.hpp"
#include "mshgfn/temporal.hpp"

namespace mshgfn {

// Per-scale parameters of the hierarchical graph module: adaptive matrices
// for the intra-attribute graphs, the attribute-GCN weight, and the
// inter-stock propagation weight.
struct GraphScaleParams {
  // e1/e2: one D_in x h pair per stock, or a single shared pair.
  std::vector<Tensor> e1, e2;
  Tensor attr_weight;  // W_c: L_k x D_in
  Tensor prop_weight;  // W_g: D x D

  void init(std::size_t num_stocks, std::size_t d_in, std::size_t attr_rank,
            std::size_t scale_len, std::size_t d_model, bool shared,
            std::mt19937_64& rng) {
    e1.clear();
    e2.clear();
    std::size_t count = shared ? 1 : num_stocks;
    for (std::size_t i = 0; i < count; ++i) {
      e1.push_back(xavier_uniform(d_in, attr_rank, rng));
      e2.push_back(xavier_uniform(d_in, attr_rank, rng));
    }
    attr_weight = xavier_uniform(scale_len, d_in, rng);
    prop_weight = xavier_uniform(d_model, d_model, rng);
  }

  void collect(const std::string& prefix, std::vector<NamedParam>& out,
               bool include_attr_path) {
    if (include_attr_path) {
      for (std::size_t i = 0; i < e1.size(); ++i) {
        out.push_back({prefix + ".e1_" + std::to_string(i), &e1[i]});
        out.push_back({prefix + ".e2_" + std::to_string(i), &e2[i]});
      }
      out.push_back({prefix + ".attr_weight", &attr_weight});
    }
    out.push_back({prefix + ".prop_weight", &prop_weight});
  }
};

// R = row-softmax(ReLU(E1 E2^T)): the learned intra-attribute adjacency.
inline Tensor attribute_adjacency(const Tensor& e1, const Tensor& e2) {
  return ops::softmax(ops::relu(ops::matmul(e1, ops::transpose(e2))), 1);
}

// e_i = ReLU((R + I) X_i^T W_c): attribute nodes carry their time series as
// features, giving a D_in x D_in embedding per stock.
inline Tensor attribute_gcn(const Tensor& r, const Tensor& x_i,
                            const Tensor& w_c) {
  std::size_t d = r.dim(0);
  Tensor r_tilde = ops::add(r, Tensor::identity(d));
  return ops::relu(ops::matmul(ops::matmul(r_tilde, ops::transpose(x_i)), w_c));
}

// Pairwise cosine similarity of flattened attribute embeddings.
// Input: [N, D^2] stacked rows; output: raw A in [-1,1], symmetric, unit
// diagonal.
inline Tensor global_adjacency(const Tensor& flat_embeddings) {
  Tensor unit = ops::l2_normalize_rows(flat_embeddings);
  return ops::matmul(unit, ops::transpose(unit));
}

// Row-normalized propagation matrix: row-normalize(ReLU(A) + I).
inline Tensor normalize_adjacency(const Tensor& a_raw) {
  std::size_t n = a_raw.dim(0);
  return ops::normalize_rows_sum(
      ops::add(ops::relu(a_raw), Tensor::identity(n)));
}

// X_hat = ReLU(A_hat Z W_g), with dropout after the activation in training.
inline Tensor propagate(const Tensor& a_hat, const Tensor& z,
                        const Tensor& w_g, double dropout_p, bool training,
                        std::mt19937_64& rng) {
  Tensor out = ops::relu(ops::matmul(ops::matmul(a_hat, z), w_g));
  return ops::dropout(out, dropout_p, training, rng);
}

// Full per-scale spatial pass: per-stock attribute graphs -> flattened
// embeddings -> cosine stock graph.  Returns the raw (unclamped) adjacency;
// callers normalize it before propagation.
inline Tensor stock_adjacency_for_scale(const GraphScaleParams& p,
                                        const Tensor& x_scale) {
  std::size_t n = x_scale.dim(0);
  bool shared = p.e1.size() == 1;
  std::vector<Tensor> flats;
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor& e1 = shared ? p.e1[0] : p.e1[i];
    const Tensor& e2 = shared ? p.e2[0] : p.e2[i];
    Tensor r = attribute_adjacency(e1, e2);
    Tensor emb = attribute_gcn(r, ops::select_row(x_scale, i), p.attr_weight);
    flats.push_back(ops::reshape(emb, {1, emb.size()}));
  }
  return global_adjacency(ops::concat(flats, 0));
}

}  // namespace mshgfn
