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

#ifndef VER_OPTIMIZER_HPP_
#define VER_OPTIMIZER_HPP_

#include <cstdint>
#include <span>

#include "ver/vgka.hpp"

namespace ver {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments for every adaptor tensor plus the log logit-scale.
template <typename T>
struct AdamState {
  AdaptorParams<T> m, v;
  T scale_m = 0, scale_v = 0;
  std::uint64_t step = 0;

  static AdamState for_params(const AdaptorParams<T>& params) {
    return AdamState{params.zeros_like(), params.zeros_like(), T(0), T(0), 0};
  }
  bool operator==(const AdamState& o) const {
    return m == o.m && v == o.v && scale_m == o.scale_m && scale_v == o.scale_v &&
           step == o.step;
  }
};

// Bias-corrected Adam on flat spans; `step` is the 1-based step count.
template <typename T>
void adam_kernel(std::span<T> param, std::span<const T> grad, std::span<T> m,
                 std::span<T> v, double lr, std::uint64_t step, const AdamHyper& hp = {});

// Increments state.step and updates every adaptor tensor and the log
// logit-scale. No weight decay.
template <typename T>
void adam_update(AdaptorParams<T>& params, const AdaptorParams<T>& grads, T& log_scale,
                 T log_scale_grad, AdamState<T>& state, double lr, const AdamHyper& hp = {});

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)); no warmup.
double cosine_lr(std::uint64_t step, std::uint64_t total_steps, double base_lr);

}  // namespace ver

#endif  // VER_OPTIMIZER_HPP_
