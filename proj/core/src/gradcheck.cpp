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

#include "ver/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <json.hpp>
#include <random>

#include "ver/seed.hpp"

namespace ver {
namespace {

double rel_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

}  // namespace

std::string GradcheckReport::to_json() const {
  nlohmann::json j;
  j["checked"] = checked;
  j["max_rel_error"] = max_rel_error;
  j["worst_tensor"] = worst_tensor;
  j["worst_index"] = worst_index;
  j["replaced"] = replaced;
  j["per_tensor"] = per_tensor;
  j["seconds"] = seconds;
  j["passed"] = passed;
  return j.dump();
}

GradcheckReport run_gradcheck(const GradcheckConfig& gc) {
  const auto start = std::chrono::steady_clock::now();
  AdaptorConfig ac;
  ac.dim = gc.dim;
  ac.text_dim = gc.text_dim;
  ac.layers = gc.layers;
  ac.heads = gc.heads;
  ac.max_tokens = gc.tokens;
  AdaptorParams<double> params = init_params<double>(ac, gc.seed);

  std::mt19937_64 rng(derive_seed(gc.seed, {0x9c}));
  std::normal_distribution<double> normal(0.0, 1.0);
  // Move LayerNorm affines and biases off their trivial init so every
  // parameter has a generic gradient.
  params.visit([&](const std::string& name, Matrix<double>& m) {
    if (name.find("gamma") != std::string::npos || name.find("beta") != std::string::npos ||
        name.find("_b") != std::string::npos) {
      for (double& x : m.values()) x += 0.1 * normal(rng);
    }
  });

  TrainingCorpus<double> corpus;
  for (std::size_t i = 0; i < gc.batch_size; ++i) {
    EntityFeatures<double> e;
    e.id = "G" + std::to_string(i);
    e.primary_patches = Matrix<double>(gc.patches, gc.dim);
    for (double& x : e.primary_patches.values()) x = normal(rng);
    e.text.tokens = Matrix<double>(gc.tokens, gc.text_dim);
    // Odd samples carry one padded token to exercise the attention mask.
    e.text.valid_len = (i % 2 == 1 && gc.tokens > 1) ? gc.tokens - 1 : gc.tokens;
    for (std::size_t r = 0; r < e.text.valid_len; ++r)
      for (double& x : e.text.tokens.row(r)) x = normal(rng);
    corpus.entities.push_back(std::move(e));
    TrainSample s;
    s.entity = i;
    std::vector<double> q(gc.dim);
    for (double& x : q) x = normal(rng);
    const auto unit = l2_normalize<double>(q);
    s.query.assign(unit.begin(), unit.end());
    corpus.samples.push_back(std::move(s));
  }
  std::vector<std::size_t> members(gc.batch_size);
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
  const TrainBatch<double> batch =
      make_batch(corpus, members, gc.n_sync, derive_seed(gc.seed, {0xd0}));

  TrainConfig tc;
  tc.batch_size = std::max<std::size_t>(gc.batch_size, 2);
  tc.n_sync = gc.n_sync;
  const double log_scale = std::log(1.0 / 0.07);
  const StepResult<double> base = step_gradients(batch, params, log_scale, tc);

  GradcheckReport report;
  report.replaced = base.replaced;
  auto objective = [&](const AdaptorParams<double>& p, double ls) {
    return step_gradients(batch, p, ls, tc, &base.selections).loss;
  };
  auto record = [&](const std::string& name, std::size_t index, double analytic,
                    double numeric) {
    const double err = rel_error(analytic, numeric, gc.floor);
    ++report.checked;
    report.per_tensor[name] = std::max(report.per_tensor[name], err);
    if (err > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = err;
      report.worst_tensor = name;
      report.worst_index = index;
    }
  };

  std::vector<std::pair<std::string, const Matrix<double>*>> analytic;
  base.grads.visit(
      [&](const std::string& name, const Matrix<double>& g) { analytic.emplace_back(name, &g); });
  std::size_t t = 0;
  AdaptorParams<double> probe = params;
  probe.visit([&](const std::string& name, Matrix<double>& m) {
    const Matrix<double>& g = *analytic[t++].second;
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double orig = m.values()[k];
      m.values()[k] = orig + gc.step;
      const double up = objective(probe, log_scale);
      m.values()[k] = orig - gc.step;
      const double down = objective(probe, log_scale);
      m.values()[k] = orig;
      record(name, k, g.values()[k], (up - down) / (2 * gc.step));
    }
  });
  const double up = objective(params, log_scale + gc.step);
  const double down = objective(params, log_scale - gc.step);
  record("log_scale", 0, base.d_log_scale, (up - down) / (2 * gc.step));

  report.passed = report.max_rel_error <= gc.tolerance;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace ver
