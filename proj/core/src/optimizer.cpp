// Copyright 2026 The ver-engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ver/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace ver {

template <typename T>
void adam_kernel(std::span<T> param, std::span<const T> grad, std::span<T> m,
                 std::span<T> v, double lr, std::uint64_t step, const AdamHyper& hp) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw DimensionError("adam: parameter/gradient/moment size mismatch");
  }
  if (step == 0) throw InternalError("adam: step count must be >= 1");
  const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
  const T bc1 = static_cast<T>(1.0 - std::pow(hp.beta1, double(step)));
  const T bc2 = static_cast<T>(1.0 - std::pow(hp.beta2, double(step)));
  const T rate = static_cast<T>(lr), eps = static_cast<T>(hp.eps);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const T m_hat = m[i] / bc1;
    const T v_hat = v[i] / bc2;
    param[i] -= rate * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template <typename T>
void adam_update(AdaptorParams<T>& params, const AdaptorParams<T>& grads, T& log_scale,
                 T log_scale_grad, AdamState<T>& state, double lr, const AdamHyper& hp) {
  std::vector<const Matrix<T>*> g;
  std::vector<Matrix<T>*> m, v;
  grads.visit([&](const std::string&, const Matrix<T>& x) { g.push_back(&x); });
  state.m.visit([&](const std::string&, Matrix<T>& x) { m.push_back(&x); });
  state.v.visit([&](const std::string&, Matrix<T>& x) { v.push_back(&x); });
  std::size_t i = 0;
  ++state.step;
  params.visit([&](const std::string& name, Matrix<T>& p) {
    if (i >= g.size() || !p.same_shape(*g[i]) || !p.same_shape(*m[i]) || !p.same_shape(*v[i])) {
      throw DimensionError("adam: layout mismatch at " + name);
    }
    adam_kernel<T>(p.values(), g[i]->values(), m[i]->values(), v[i]->values(), lr,
                   state.step, hp);
    ++i;
  });
  adam_kernel<T>(std::span<T>(&log_scale, 1), std::span<const T>(&log_scale_grad, 1),
                 std::span<T>(&state.scale_m, 1), std::span<T>(&state.scale_v, 1), lr,
                 state.step, hp);
}

double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double base_lr) {
  if (total_steps == 0) return base_lr;
  if (step >= total_steps) return 0.0;
  return base_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * double(step) / double(total_steps)));
}

template void adam_kernel<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, double, std::uint64_t, const AdamHyper&);
template void adam_kernel<double>(std::span<double>, std::span<const double>,
                                  std::span<double>, std::span<double>, double, std::uint64_t,
                                  const AdamHyper&);
template void adam_update<float>(AdaptorParams<float>&, const AdaptorParams<float>&, float&,
                                 float, AdamState<float>&, double, const AdamHyper&);
template void adam_update<double>(AdaptorParams<double>&, const AdaptorParams<double>&,
                                  double&, double, AdamState<double>&, double,
                                  const AdamHyper&);

}  // namespace ver
