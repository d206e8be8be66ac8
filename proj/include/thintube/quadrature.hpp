// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

namespace thintube {

/// 8-point Gauss-Legendre rule on [-1, 1] (exact for degree 15).
struct GaussLegendre8 {
  static constexpr std::array<double, 8> nodes{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                               -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                               0.7966664774136267,  0.9602898564975363};
  static constexpr std::array<double, 8> weights{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                                 0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                                 0.2223810344533745, 0.1012285362903763};
};

/// int_0^1 f(t) dt.
template <class F>
double integrate_unit(F&& f) {
  double sum = 0.0;
  for (std::size_t q = 0; q < 8; ++q) sum += GaussLegendre8::weights[q] * f(0.5 * (GaussLegendre8::nodes[q] + 1.0));
  return 0.5 * sum;
}

}  // namespace thintube
