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

// Central finite-difference check of the full training objective (adaptor,
// hard-negative substitution and InfoNCE) at double precision.

#ifndef VER_GRADCHECK_HPP_
#define VER_GRADCHECK_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "ver/trainer.hpp"

namespace ver {

struct GradcheckConfig {
  std::size_t batch_size = 3;
  std::size_t dim = 8;
  std::size_t text_dim = 12;
  std::size_t patches = 2;
  std::size_t tokens = 4;
  std::size_t heads = 1;
  std::size_t layers = 2;
  std::size_t n_sync = 2;
  double step = 1e-5;
  // Denominator floor for the relative error, so entries whose true
  // gradient is ~0 are judged by absolute error instead.
  double floor = 1e-6;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

struct GradcheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t replaced = 0;  // hard-negative substitutions in the frozen selection
  std::map<std::string, double> per_tensor;
  double seconds = 0;
  bool passed = false;

  std::string to_json() const;
};

// Hard-negative selection is made once at the base point and then held
// fixed, so the objective is smooth in the parameters being perturbed.
GradcheckReport run_gradcheck(const GradcheckConfig& config);

}  // namespace ver

#endif  // VER_GRADCHECK_HPP_
