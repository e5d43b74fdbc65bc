// Copyright 2026 The CellFed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CELLFED_TESTS_SUPPORT_ORACLES_HPP
#define CELLFED_TESTS_SUPPORT_ORACLES_HPP

// Reference implementations used as independent oracles by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "cellfed/random.hpp"
#include "cellfed/types.hpp"

namespace cellfed::testing {

/// Central difference of a scalar function along coordinate i.
inline double central_difference(const std::function<double(const Vector&)>& f, const Vector& x, Eigen::Index i,
                                 double h) {
  Vector xp = x;
  Vector xm = x;
  xp[i] += h;
  xm[i] -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

/// Fourth-order five-point stencil along coordinate i.
inline double five_point_difference(const std::function<double(const Vector&)>& f, const Vector& x, Eigen::Index i,
                                    double h) {
  auto at = [&](double offset) {
    Vector y = x;
    y[i] += offset;
    return f(y);
  };
  return (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
}

inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double rel_step) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    g[i] = central_difference(f, x, i, h);
  }
  return g;
}

/// |a - b|_inf / max(|b|_inf, floor).
inline double relative_error(const Vector& a, const Vector& b, double floor = 1e-12) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

/// Vector whose magnitude spans many decades: entries are
/// sign * mantissa * 10^e with e drawn around `center`.
inline Vector random_decade_vector(Rng& rng, Eigen::Index d, int center, int spread) {
  std::uniform_int_distribution<int> exp_dist(center - spread, center + spread);
  std::uniform_real_distribution<double> mant(-10.0, 10.0);
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = mant(rng) * std::pow(10.0, exp_dist(rng));
  return v;
}

/// Bit-string rendering of an EMQ code computed straight from the wire
/// layout description, independent of BitWriter.
inline std::string emq_reference_bits(int exponent, bool zero_vector, const std::vector<int>& signs,
                                      const std::vector<int>& mantissas) {
  std::string out;
  const int byte = zero_vector ? 0x80 : (exponent & 0xFF);
  for (int b = 7; b >= 0; --b) out += ((byte >> b) & 1) ? '1' : '0';
  for (int s : signs) out += s > 0 ? '1' : '0';
  for (int m : mantissas) {
    if (m == 0) {
      out += "0";
    } else if (m == 1) {
      out += "10";
    } else {
      out += "11";
      const int r = m - 2;
      for (int b = 2; b >= 0; --b) out += ((r >> b) & 1) ? '1' : '0';
    }
  }
  return out;
}

}  // namespace cellfed::testing

#endif  // CELLFED_TESTS_SUPPORT_ORACLES_HPP
