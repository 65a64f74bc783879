#pragma once

#include <vector>

#include "mshgfn/ops.hpp"

namespace mshgfn {

// K downsampled views of one window.  Level 0 (scale 1) is the input itself;
// each further level halves the time axis by average pooling, so level k has
// length ceil(L / 2^k).
inline std::vector<Tensor> build_pyramid(const Tensor& window,
                                         std::size_t num_scales) {
  if (num_scales < 1)
    throw std::invalid_argument("build_pyramid: need at least one scale");
  std::vector<Tensor> levels;
  levels.push_back(window);
  for (std::size_t k = 1; k < num_scales; ++k)
    levels.push_back(ops::avg_pool_1d(levels.back(), 2));
  return levels;
}

}  // namespace mshgfn
