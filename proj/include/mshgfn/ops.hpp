#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mshgfn/tensor.hpp"

namespace mshgfn {
namespace ops {

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Iterates slices along `axis`: calls fn(base_offset, stride, extent).
template <typename F>
inline void for_each_slice(const Shape& shape, std::size_t axis, F&& fn) {
  std::size_t extent = shape[axis];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in)
      fn(o * extent * inner + in, inner, extent);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) + b.at(i);
  return Tensor::make_op(a.shape(), std::move(v), {a, b}, [](TensorNode* n) {
    auto& pa = n->parents[0];
    auto& pb = n->parents[1];
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      pa->grad[i] += n->grad[i];
      pb->grad[i] += n->grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) - b.at(i);
  return Tensor::make_op(a.shape(), std::move(v), {a, b}, [](TensorNode* n) {
    auto& pa = n->parents[0];
    auto& pb = n->parents[1];
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      pa->grad[i] += n->grad[i];
      pb->grad[i] -= n->grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) * b.at(i);
  return Tensor::make_op(a.shape(), std::move(v), {a, b}, [](TensorNode* n) {
    auto& pa = n->parents[0];
    auto& pb = n->parents[1];
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      pa->grad[i] += n->grad[i] * pb->value[i];
      pb->grad[i] += n->grad[i] * pa->value[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double c) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) * c;
  return Tensor::make_op(a.shape(), std::move(v), {a}, [c](TensorNode* n) {
    auto& pa = n->parents[0];
    for (std::size_t i = 0; i < n->grad.size(); ++i)
      pa->grad[i] += n->grad[i] * c;
  });
}

// Adds a length-D bias along the last axis.
inline Tensor add_bias(const Tensor& a, const Tensor& bias) {
  std::size_t d = a.shape().back();
  if (bias.rank() != 1 || bias.dim(0) != d)
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                         " does not match last axis of " +
                         shape_str(a.shape()));
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) + bias.at(i % d);
  return Tensor::make_op(a.shape(), std::move(v), {a, bias},
                         [d](TensorNode* n) {
                           auto& pa = n->parents[0];
                           auto& pb = n->parents[1];
                           for (std::size_t i = 0; i < n->grad.size(); ++i) {
                             pa->grad[i] += n->grad[i];
                             pb->grad[i % d] += n->grad[i];
                           }
                         });
}

// matmul over the last two axes.  Supports [m,n]x[n,p], [B,m,n]x[n,p]
// (shared right operand) and [B,m,n]x[B,n,p].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  auto mm = [](const double* A, const double* B, double* C, std::size_t m,
               std::size_t n, std::size_t p) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < n; ++k) {
        double av = A[i * n + k];
        if (av == 0.0) continue;
        for (std::size_t j = 0; j < p; ++j) C[i * p + j] += av * B[k * p + j];
      }
  };
  std::size_t ra = a.rank(), rb = b.rank();
  if (ra < 2 || rb < 2 || ra > 3 || rb > 3)
    throw DimensionError("matmul: unsupported ranks " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  std::size_t m = a.dim(ra - 2), n = a.dim(ra - 1);
  std::size_t n2 = b.dim(rb - 2), p = b.dim(rb - 1);
  if (n != n2)
    throw DimensionError("matmul: inner dimensions disagree " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::size_t batch = ra == 3 ? a.dim(0) : 1;
  if (rb == 3 && (ra != 3 || b.dim(0) != batch))
    throw DimensionError("matmul: batch dimensions disagree " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  bool b_batched = rb == 3;
  Shape out_shape = ra == 3 ? Shape{batch, m, p} : Shape{m, p};
  std::vector<double> v(batch * m * p, 0.0);
  for (std::size_t bi = 0; bi < batch; ++bi)
    mm(a.values().data() + bi * m * n,
       b.values().data() + (b_batched ? bi * n * p : 0), v.data() + bi * m * p,
       m, n, p);
  return Tensor::make_op(
      out_shape, std::move(v), {a, b},
      [m, n, p, batch, b_batched](TensorNode* node) {
        auto& pa = node->parents[0];
        auto& pb = node->parents[1];
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const double* g = node->grad.data() + bi * m * p;
          const double* A = pa->value.data() + bi * m * n;
          const double* B = pb->value.data() + (b_batched ? bi * n * p : 0);
          double* gA = pa->grad.data() + bi * m * n;
          double* gB = pb->grad.data() + (b_batched ? bi * n * p : 0);
          // gA += g * B^T ; gB += A^T * g
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p; ++j) {
              double gv = g[i * p + j];
              if (gv == 0.0) continue;
              for (std::size_t k = 0; k < n; ++k) {
                gA[i * n + k] += gv * B[k * p + j];
                gB[k * p + j] += pa->value[bi * m * n + i * n + k] * gv;
              }
            }
        }
      });
}

// Swaps the last two axes.
inline Tensor transpose(const Tensor& a) {
  std::size_t r = a.rank();
  if (r < 2 || r > 3) throw DimensionError("transpose: rank must be 2 or 3");
  std::size_t m = a.dim(r - 2), n = a.dim(r - 1);
  std::size_t batch = r == 3 ? a.dim(0) : 1;
  Shape out = a.shape();
  std::swap(out[r - 2], out[r - 1]);
  std::vector<double> v(a.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        v[b * m * n + j * m + i] = a.values()[b * m * n + i * n + j];
  return Tensor::make_op(out, std::move(v), {a},
                         [m, n, batch](TensorNode* node) {
                           auto& pa = node->parents[0];
                           for (std::size_t b = 0; b < batch; ++b)
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 pa->grad[b * m * n + i * n + j] +=
                                     node->grad[b * m * n + j * m + i];
                         });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.at(i) > 0 ? a.at(i) : 0;
  return Tensor::make_op(a.shape(), std::move(v), {a}, [](TensorNode* n) {
    auto& pa = n->parents[0];
    for (std::size_t i = 0; i < n->grad.size(); ++i)
      if (pa->value[i] > 0) pa->grad[i] += n->grad[i];  // relu'(0) = 0
  });
}

inline Tensor sigmoid(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = 1.0 / (1.0 + std::exp(-a.at(i)));
  return Tensor::make_op(a.shape(), std::move(v), {a}, [](TensorNode* n) {
    auto& pa = n->parents[0];
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      double y = n->value[i];
      pa->grad[i] += n->grad[i] * y * (1.0 - y);
    }
  });
}

inline Tensor tanh(const Tensor& a) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a.at(i));
  return Tensor::make_op(a.shape(), std::move(v), {a}, [](TensorNode* n) {
    auto& pa = n->parents[0];
    for (std::size_t i = 0; i < n->grad.size(); ++i) {
      double y = n->value[i];
      pa->grad[i] += n->grad[i] * (1.0 - y * y);
    }
  });
}

inline Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank())
    throw std::invalid_argument("softmax: axis out of range");
  std::vector<double> v(a.size());
  detail::for_each_slice(a.shape(), axis,
                         [&](std::size_t base, std::size_t stride,
                             std::size_t extent) {
                           double mx = a.at(base);
                           for (std::size_t t = 1; t < extent; ++t)
                             mx = std::max(mx, a.at(base + t * stride));
                           double sum = 0.0;
                           for (std::size_t t = 0; t < extent; ++t) {
                             double e = std::exp(a.at(base + t * stride) - mx);
                             v[base + t * stride] = e;
                             sum += e;
                           }
                           for (std::size_t t = 0; t < extent; ++t)
                             v[base + t * stride] /= sum;
                         });
  Shape shape = a.shape();
  return Tensor::make_op(
      a.shape(), std::move(v), {a}, [shape, axis](TensorNode* n) {
        auto& pa = n->parents[0];
        detail::for_each_slice(
            shape, axis,
            [&](std::size_t base, std::size_t stride, std::size_t extent) {
              double dot = 0.0;
              for (std::size_t t = 0; t < extent; ++t)
                dot += n->grad[base + t * stride] * n->value[base + t * stride];
              for (std::size_t t = 0; t < extent; ++t) {
                std::size_t idx = base + t * stride;
                pa->grad[idx] += n->value[idx] * (n->grad[idx] - dot);
              }
            });
      });
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape shape = parts[0].shape();
  if (axis >= shape.size())
    throw std::invalid_argument("concat: axis out of range");
  std::size_t total = 0;
  for (auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size())
      throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != shape[i])
        throw DimensionError("concat: shape mismatch " + shape_str(s) +
                             " vs " + shape_str(shape));
    total += s[axis];
  }
  Shape out = shape;
  out[axis] = total;
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  std::vector<double> v(shape_numel(out));
  std::vector<std::size_t> extents;
  for (auto& p : parts) extents.push_back(p.dim(axis));
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      std::size_t block = extents[pi] * inner;
      const auto& src = parts[pi].values();
      std::copy(src.begin() + o * block, src.begin() + (o + 1) * block,
                v.begin() + o * total * inner + off);
      off += block;
    }
  }
  return Tensor::make_op(
      out, std::move(v), parts,
      [outer, inner, total, extents](TensorNode* n) {
        for (std::size_t o = 0; o < outer; ++o) {
          std::size_t off = 0;
          for (std::size_t pi = 0; pi < n->parents.size(); ++pi) {
            std::size_t block = extents[pi] * inner;
            auto& pg = n->parents[pi]->grad;
            for (std::size_t i = 0; i < block; ++i)
              pg[o * block + i] += n->grad[o * total * inner + off + i];
            off += block;
          }
        }
      });
}

// Mean over one axis; the axis is removed from the shape.
inline Tensor mean(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) throw std::invalid_argument("mean: axis out of range");
  Shape out;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (i != axis) out.push_back(a.dim(i));
  if (out.empty()) out = {1};
  std::vector<double> v(shape_numel(out), 0.0);
  std::size_t pos = 0;
  std::vector<std::size_t> positions;  // maps slice index -> output index
  detail::for_each_slice(a.shape(), axis,
                         [&](std::size_t base, std::size_t stride,
                             std::size_t extent) {
                           double s = 0.0;
                           for (std::size_t t = 0; t < extent; ++t)
                             s += a.at(base + t * stride);
                           v[pos++] = s / static_cast<double>(extent);
                         });
  Shape shape = a.shape();
  return Tensor::make_op(out, std::move(v), {a}, [shape, axis](TensorNode* n) {
    auto& pa = n->parents[0];
    std::size_t pos = 0;
    detail::for_each_slice(shape, axis,
                           [&](std::size_t base, std::size_t stride,
                               std::size_t extent) {
                             double g = n->grad[pos++] /
                                        static_cast<double>(extent);
                             for (std::size_t t = 0; t < extent; ++t)
                               pa->grad[base + t * stride] += g;
                           });
  });
}

inline Tensor sum_all(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  return Tensor::make_op({1}, {s}, {a}, [](TensorNode* n) {
    auto& pa = n->parents[0];
    for (auto& g : pa->grad) g += n->grad[0];
  });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size())
    throw DimensionError("reshape: element count mismatch " +
                         shape_str(a.shape()) + " -> " + shape_str(shape));
  return Tensor::make_op(std::move(shape), a.values(), {a}, [](TensorNode* n) {
    auto& pa = n->parents[0];
    for (std::size_t i = 0; i < n->grad.size(); ++i)
      pa->grad[i] += n->grad[i];
  });
}

inline Tensor flatten(const Tensor& a) { return reshape(a, {a.size()}); }

// x[N,L,D] -> x[:,t,:] of shape [N,D]
inline Tensor select_step(const Tensor& a, std::size_t t) {
  if (a.rank() != 3) throw DimensionError("select_step: rank-3 input required");
  std::size_t n = a.dim(0), l = a.dim(1), d = a.dim(2);
  if (t >= l) throw std::invalid_argument("select_step: step out of range");
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) v[i * d + k] = a.at3(i, t, k);
  return Tensor::make_op({n, d}, std::move(v), {a},
                         [n, l, d, t](TensorNode* node) {
                           auto& pa = node->parents[0];
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t k = 0; k < d; ++k)
                               pa->grad[(i * l + t) * d + k] +=
                                   node->grad[i * d + k];
                         });
}

// x[N,L,D] -> x[i,:,:] of shape [L,D]
inline Tensor select_row(const Tensor& a, std::size_t i) {
  if (a.rank() != 3) throw DimensionError("select_row: rank-3 input required");
  std::size_t n = a.dim(0), l = a.dim(1), d = a.dim(2);
  if (i >= n) throw std::invalid_argument("select_row: index out of range");
  std::vector<double> v(a.values().begin() + i * l * d,
                        a.values().begin() + (i + 1) * l * d);
  return Tensor::make_op({l, d}, std::move(v), {a},
                         [i, l, d](TensorNode* node) {
                           auto& pa = node->parents[0];
                           for (std::size_t j = 0; j < l * d; ++j)
                             pa->grad[i * l * d + j] += node->grad[j];
                         });
}

// Layer normalization over the last axis, epsilon inside the square root.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain,
                         const Tensor& bias, double eps = 1e-5) {
  std::size_t d = x.shape().back();
  if (gain.size() != d || bias.size() != d)
    throw DimensionError("layer_norm: gain/bias must have length " +
                         std::to_string(d));
  std::size_t slices = x.size() / d;
  std::vector<double> v(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    const double* xs = x.values().data() + s * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xs[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xs[j] - mu) * (xs[j] - mu);
    var /= static_cast<double>(d);
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[s] = is;
    for (std::size_t j = 0; j < d; ++j) {
      xhat[s * d + j] = (xs[j] - mu) * is;
      v[s * d + j] = gain.at(j) * xhat[s * d + j] + bias.at(j);
    }
  }
  return Tensor::make_op(
      x.shape(), std::move(v), {x, gain, bias},
      [d, slices, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](TensorNode* n) {
        auto& px = n->parents[0];
        auto& pg = n->parents[1];
        auto& pb = n->parents[2];
        for (std::size_t s = 0; s < slices; ++s) {
          const double* g = n->grad.data() + s * d;
          const double* xh = xhat.data() + s * d;
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            double dxhat = g[j] * pg->value[j];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xh[j];
            pg->grad[j] += g[j] * xh[j];
            pb->grad[j] += g[j];
          }
          mean_dxhat /= static_cast<double>(d);
          mean_dxhat_xhat /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            double dxhat = g[j] * pg->value[j];
            px->grad[s * d + j] +=
                inv_std[s] * (dxhat - mean_dxhat - xh[j] * mean_dxhat_xhat);
          }
        }
      });
}

// Average pooling along the time axis of [N,L,D]; a trailing partial window
// is averaged over its actual length, so the output length is ceil(L/window).
inline Tensor avg_pool_1d(const Tensor& x, std::size_t window) {
  if (window < 1) throw std::invalid_argument("avg_pool_1d: window < 1");
  if (x.rank() != 3) throw DimensionError("avg_pool_1d: rank-3 input required");
  std::size_t n = x.dim(0), l = x.dim(1), d = x.dim(2);
  std::size_t lo = (l + window - 1) / window;
  std::vector<double> v(n * lo * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < lo; ++t) {
      std::size_t start = t * window;
      std::size_t len = std::min(window, l - start);
      for (std::size_t k = 0; k < d; ++k) {
        double s = 0.0;
        for (std::size_t u = 0; u < len; ++u) s += x.at3(i, start + u, k);
        v[(i * lo + t) * d + k] = s / static_cast<double>(len);
      }
    }
  return Tensor::make_op(
      {n, lo, d}, std::move(v), {x}, [n, l, d, lo, window](TensorNode* node) {
        auto& px = node->parents[0];
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t t = 0; t < lo; ++t) {
            std::size_t start = t * window;
            std::size_t len = std::min(window, l - start);
            for (std::size_t k = 0; k < d; ++k) {
              double g = node->grad[(i * lo + t) * d + k] /
                         static_cast<double>(len);
              for (std::size_t u = 0; u < len; ++u)
                px->grad[(i * l + start + u) * d + k] += g;
            }
          }
      });
}

// Inverted dropout; identity in eval mode.
inline Tensor dropout(const Tensor& x, double p, bool training,
                      std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("dropout: p must lie in [0,1)");
  if (!training || p == 0.0) return x;
  double keep = 1.0 - p;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> mask(x.size());
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = dist(rng) < p ? 0.0 : 1.0 / keep;
    v[i] = x.at(i) * mask[i];
  }
  return Tensor::make_op(x.shape(), std::move(v), {x},
                         [mask = std::move(mask)](TensorNode* n) {
                           auto& px = n->parents[0];
                           for (std::size_t i = 0; i < n->grad.size(); ++i)
                             px->grad[i] += n->grad[i] * mask[i];
                         });
}

// Mean negative log-likelihood over rows, via log-sum-exp.
inline Tensor cross_entropy(const Tensor& logits,
                            const std::vector<int>& labels) {
  if (logits.rank() != 2)
    throw DimensionError("cross_entropy: rank-2 logits required");
  std::size_t n = logits.dim(0), c = logits.dim(1);
  if (c < 2) throw std::invalid_argument("cross_entropy: need >= 2 classes");
  if (labels.size() != n)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  for (auto lb : labels)
    if (lb < 0 || static_cast<std::size_t>(lb) >= c)
      throw std::invalid_argument("cross_entropy: label out of range");
  std::vector<double> probs(n * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = logits.values().data() + i * c;
    double mx = *std::max_element(z, z + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
    double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j)
      probs[i * c + j] = std::exp(z[j] - lse);
    loss += lse - z[labels[i]];
  }
  loss /= static_cast<double>(n);
  return Tensor::make_op(
      {1}, {loss}, {logits},
      [n, c, labels, probs = std::move(probs)](TensorNode* node) {
        auto& pl = node->parents[0];
        double g = node->grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j)
            pl->grad[i * c + j] +=
                g * (probs[i * c + j] -
                     (static_cast<std::size_t>(labels[i]) == j ? 1.0 : 0.0));
      });
}

// Row-wise L2 normalization of [N,M]: u_i = x_i / sqrt(|x_i|^2 + eps).
// Adjoint: dx = (g - u (u.g)) / sqrt(|x|^2 + eps) with the same guarded norm.
inline Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12) {
  if (x.rank() != 2)
    throw DimensionError("l2_normalize_rows: rank-2 input required");
  std::size_t n = x.dim(0), m = x.dim(1);
  std::vector<double> v(x.size());
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += x.at2(i, j) * x.at2(i, j);
    norms[i] = std::sqrt(s + eps);
    for (std::size_t j = 0; j < m; ++j) v[i * m + j] = x.at2(i, j) / norms[i];
  }
  return Tensor::make_op(
      {n, m}, std::move(v), {x},
      [n, m, norms = std::move(norms)](TensorNode* node) {
        auto& px = node->parents[0];
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < m; ++j)
            dot += node->grad[i * m + j] * node->value[i * m + j];
          for (std::size_t j = 0; j < m; ++j)
            px->grad[i * m + j] +=
                (node->grad[i * m + j] - node->value[i * m + j] * dot) /
                norms[i];
        }
      });
}

// Divides each row of a nonnegative matrix by its sum.  Row sums must be
// bounded away from zero (callers add self-loops first).
inline Tensor normalize_rows_sum(const Tensor& x) {
  if (x.rank() != 2)
    throw DimensionError("normalize_rows_sum: rank-2 input required");
  std::size_t n = x.dim(0), m = x.dim(1);
  std::vector<double> v(x.size());
  std::vector<double> sums(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += x.at2(i, j);
    sums[i] = s;
    for (std::size_t j = 0; j < m; ++j) v[i * m + j] = x.at2(i, j) / s;
  }
  return Tensor::make_op(
      {n, m}, std::move(v), {x},
      [n, m, sums = std::move(sums)](TensorNode* node) {
        auto& px = node->parents[0];
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < m; ++j)
            dot += node->grad[i * m + j] * node->value[i * m + j];
          for (std::size_t j = 0; j < m; ++j)
            px->grad[i * m + j] += (node->grad[i * m + j] - dot) / sums[i];
        }
      });
}

// Broadcasts an [N,1] column over the columns of [N,D].
inline Tensor col_broadcast_mul(const Tensor& col, const Tensor& mat) {
  if (col.rank() != 2 || col.dim(1) != 1 || mat.rank() != 2 ||
      col.dim(0) != mat.dim(0))
    throw DimensionError("col_broadcast_mul: need [N,1] x [N,D], got " +
                         shape_str(col.shape()) + " x " +
                         shape_str(mat.shape()));
  std::size_t n = mat.dim(0), d = mat.dim(1);
  std::vector<double> v(mat.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      v[i * d + j] = col.at(i) * mat.at2(i, j);
  return Tensor::make_op({n, d}, std::move(v), {col, mat},
                         [n, d](TensorNode* node) {
                           auto& pc = node->parents[0];
                           auto& pm = node->parents[1];
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < d; ++j) {
                               double g = node->grad[i * d + j];
                               pc->grad[i] += g * pm->value[i * d + j];
                               pm->grad[i * d + j] += g * pc->value[i];
                             }
                         });
}

// Plain (non-recorded) cosine similarity with a guarded denominator.
inline double cosine_similarity(const std::vector<double>& a,
                                const std::vector<double>& b,
                                double eps = 1e-12) {
  if (a.size() != b.size())
    throw DimensionError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::max(std::sqrt(na) * std::sqrt(nb), eps);
}

}  // namespace ops
}  // namespace mshgfn
