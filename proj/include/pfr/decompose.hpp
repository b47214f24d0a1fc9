// Copyright 2026 The pfr Authors.
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

// Prompt-free / prompt-related split of a reward gap.
//
// For a response pair (y1, y2) and prompt weights w_k approximating
// P(x_k | y1, y2), define
//
//   phi(d) = sum_k w_k * sigmoid(gap(x_k, y1, y2) - d).
//
// phi is strictly decreasing in d. With rewards bounded in [r_min, r_max]
// every gap lies in [-(r_max - r_min), r_max - r_min], so phi is >= 1/2 at the
// left end of that interval and <= 1/2 at the right end. The prompt-free gap
// is the unique d* with phi(d*) = 1/2, found by bisection; the prompt-related
// gap is the residual gap(x, y1, y2) - d*.

#ifndef PFR_DECOMPOSE_HPP_
#define PFR_DECOMPOSE_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pfr/conditional.hpp"
#include "pfr/core.hpp"
#include "pfr/dataset.hpp"
#include "pfr/error.hpp"

namespace pfr {

struct SearchConfig {
  double epsilon = 1e-6;
  int max_iterations = 64;
};

// Bisection steps needed to shrink [-bound, bound] below epsilon.
inline int required_iterations(double gap_bound, double epsilon) {
  return static_cast<int>(std::ceil(std::log2(2.0 * gap_bound / epsilon)));
}

inline void validate_search(const SearchConfig& config, double gap_bound) {
  if (!(config.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(gap_bound > 0.0) || !std::isfinite(gap_bound)) {
    throw ConfigError("gap bound must be positive and finite");
  }
  const int needed = required_iterations(gap_bound, config.epsilon);
  if (config.max_iterations < needed) {
    throw ConfigError("max_iterations = " + std::to_string(config.max_iterations) +
                      " cannot reach epsilon; need " + std::to_string(needed));
  }
}

inline void validate_weights(std::span<const double> gaps,
                             std::span<const double> weights) {
  if (gaps.size() != weights.size() || gaps.empty()) {
    throw PreconditionError("gaps and weights must be non-empty and aligned");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw PreconditionError("negative prompt weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw PreconditionError("prompt weights sum to " + std::to_string(total));
  }
}

inline double phi(std::span<const double> gaps, std::span<const double> weights,
                  double d) {
  double acc = 0.0;
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    acc += weights[k] * sigmoid(gaps[k] - d);
  }
  return acc;
}

// Spread of phi(d) when the candidates are treated as draws from the
// weighting: sqrt(sum w (s - phi)^2) * sqrt(sum w^2), with s = sigmoid(g - d).
// Uniform weights over K candidates give the usual sd / sqrt(K).
inline double phi_standard_error(std::span<const double> gaps,
                                 std::span<const double> weights, double d) {
  const double mean = phi(gaps, weights, d);
  double var = 0.0;
  double w2 = 0.0;
  for (std::size_t k = 0; k < gaps.size(); ++k) {
    const double s = sigmoid(gaps[k] - d);
    var += weights[k] * (s - mean) * (s - mean);
    w2 += weights[k] * weights[k];
  }
  return std::sqrt(var * w2);
}

// Root of phi(d) = 1/2 on [-gap_bound, gap_bound]. A midpoint with phi exactly
// 1/2 moves the right end, like any other non-positive test.
inline double solve_prompt_free_gap(std::span<const double> gaps,
                                    std::span<const double> weights,
                                    double gap_bound,
                                    const SearchConfig& config = {}) {
  validate_search(config, gap_bound);
  validate_weights(gaps, weights);
  double left = -gap_bound;
  double right = gap_bound;
  int iterations = 0;
  while (right - left > config.epsilon) {
    if (++iterations > config.max_iterations) {
      throw InternalError("bisection did not converge within " +
                          std::to_string(config.max_iterations) + " steps");
    }
    const double mid = 0.5 * (left + right);
    if (phi(gaps, weights, mid) > 0.5) {
      left = mid;
    } else {
      right = mid;
    }
  }
  return 0.5 * (left + right);
}

// Reward gaps of (y1, y2) under each candidate prompt of the weighting.
template <PairGapModel M>
Vector candidate_gaps(const M& model, std::span<const PromptFeatures> pool,
                      const ResponseFeatures& y1, const ResponseFeatures& y2,
                      const PromptWeighting& weighting) {
  Vector gaps;
  gaps.reserve(weighting.size());
  for (std::size_t idx : weighting.prompts) {
    if (idx >= pool.size()) throw PreconditionError("weighting index out of range");
    gaps.push_back(model.gap(pool[idx], y1, y2));
  }
  return gaps;
}

template <PairGapModel M>
double phi(const M& model, std::span<const PromptFeatures> pool,
           const ResponseFeatures& y1, const ResponseFeatures& y2,
           const PromptWeighting& weighting, double d) {
  const Vector gaps = candidate_gaps(model, pool, y1, y2, weighting);
  validate_weights(gaps, weighting.weights);
  return phi(gaps, weighting.weights, d);
}

template <PairGapModel M>
double solve_prompt_free_gap(const M& model, std::span<const PromptFeatures> pool,
                             const ResponseFeatures& y1,
                             const ResponseFeatures& y2,
                             const PromptWeighting& weighting,
                             const SearchConfig& config = {}) {
  const Vector gaps = candidate_gaps(model, pool, y1, y2, weighting);
  return solve_prompt_free_gap(gaps, weighting.weights, model.gap_bound(), config);
}

template <PairGapModel M>
GapDecomposition decompose_pair(const M& model, std::span<const PromptFeatures> pool,
                                const PreferenceSample& sample,
                                const PromptWeighting& weighting,
                                const SearchConfig& config = {}) {
  GapDecomposition out;
  out.total_gap = model.gap(sample.prompt, sample.chosen, sample.rejected);
  const Vector gaps =
      candidate_gaps(model, pool, sample.chosen, sample.rejected, weighting);
  out.prompt_free_gap =
      solve_prompt_free_gap(gaps, weighting.weights, model.gap_bound(), config);
  out.prompt_related_gap = out.total_gap - out.prompt_free_gap;
  out.phi_standard_error =
      phi_standard_error(gaps, weighting.weights, out.prompt_free_gap);
  return out;
}

// Order-preserving; failures are collected and reported with their indices.
template <PairGapModel M>
std::vector<GapDecomposition> decompose_batch(const M& model,
                                              const PromptWeighter& weighter,
                                              std::span<const std::size_t> indices,
                                              const SearchConfig& config = {}) {
  const auto& ds = weighter.dataset();
  std::vector<GapDecomposition> out(indices.size());
  std::string failures;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    try {
      const std::size_t i = indices[n];
      if (i >= ds.samples.size()) throw PreconditionError("sample index out of range");
      out[n] = decompose_pair(model, ds.prompt_pool, ds.samples[i],
                              weighter.for_sample(i), config);
    } catch (const Error& e) {
      failures += "[" + std::to_string(n) + "] " + e.what() + "; ";
    }
  }
  if (!failures.empty()) throw Error("decompose_batch failed: " + failures);
  return out;
}

// Decomposes every sample of the dataset under the given scheme.
template <PairGapModel M>
std::vector<GapDecomposition> decompose_batch(const M& model,
                                              const PreferenceDataset& ds,
                                              const SchemeParams& scheme,
                                              const SearchConfig& config = {}) {
  const PromptWeighter weighter(ds, scheme);
  std::vector<std::size_t> all(ds.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return decompose_batch(model, weighter, all, config);
}

}  // namespace pfr

#endif  // PFR_DECOMPOSE_HPP_
