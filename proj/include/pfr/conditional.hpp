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

// Candidate prompts and weights approximating P(X | Y1 = y1, Y2 = y2).
//
// By Bayes, P(x | y1, y2) is proportional to P(x) P(y1 | x) P(y2 | x) when
// the two responses are generated independently given the prompt. Three ways
// of building the weighting are provided:
//
//   ExactBayes         every prompt in the pool, exact normalized weights
//   SelfGenerated      the corresponding prompt plus K-1 prompts drawn from
//                      P(X), re-weighted with the generation probabilities
//   PessimisticFixedP  the corresponding prompt gets weight p, K-1 uniformly
//                      drawn other prompts share 1 - p
//
// Weightings only depend on the dataset, never on the reward model, so
// PromptWeighter computes them once per sample.

#ifndef PFR_CONDITIONAL_HPP_
#define PFR_CONDITIONAL_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pfr/core.hpp"
#include "pfr/dataset.hpp"
#include "pfr/error.hpp"
#include "pfr/io.hpp"

namespace pfr {

enum class Scheme { ExactBayes, SelfGenerated, PessimisticFixedP };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::ExactBayes:
      return "exact";
    case Scheme::SelfGenerated:
      return "self_generated";
    case Scheme::PessimisticFixedP:
      return "pessimistic";
  }
  return "pessimistic";
}

inline Scheme scheme_from_string(std::string_view s) {
  if (s == "exact") return Scheme::ExactBayes;
  if (s == "self_generated") return Scheme::SelfGenerated;
  if (s == "pessimistic") return Scheme::PessimisticFixedP;
  throw ConfigError("unknown weighting scheme: " + std::string(s));
}

struct SchemeParams {
  Scheme scheme = Scheme::PessimisticFixedP;
  int candidates = 16;             // K
  double corresponding_prob = 0.5;  // p
  std::uint64_t seed = 0;
};

// Indices point into the dataset's prompt pool.
struct PromptWeighting {
  std::vector<std::size_t> prompts;
  Vector weights;
  Scheme scheme = Scheme::ExactBayes;

  std::size_t size() const { return prompts.size(); }
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) {
  return fnv1a(key, seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
}

inline double self_generated_prob(const PreferenceDataset& ds,
                                  const PromptFeatures& x,
                                  const ResponseFeatures& y1,
                                  const ResponseFeatures& y2) {
  if (!ds.generation_model) {
    throw UnsupportedError("dataset has no generation model");
  }
  return ds.generation_model->at(x.id, y1.id) * ds.generation_model->at(x.id, y2.id);
}

namespace detail {

// Normalizes log-weights in place into probabilities.
inline Vector normalize_log_weights(const Vector& logw) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double l : logw) hi = std::max(hi, l);
  Vector w(logw.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    w[i] = std::exp(logw[i] - hi);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

inline double log_joint(const PreferenceDataset& ds, std::size_t prompt,
                        const ResponseFeatures& y1, const ResponseFeatures& y2) {
  const auto& gm = *ds.generation_model;
  const auto& id = ds.prompt_pool[prompt].id;
  return std::log(ds.prompt_weights[prompt]) + std::log(gm.at(id, y1.id)) +
         std::log(gm.at(id, y2.id));
}

inline std::size_t find_prompt(const PreferenceDataset& ds, const std::string& id) {
  for (std::size_t i = 0; i < ds.prompt_pool.size(); ++i) {
    if (ds.prompt_pool[i].id == id) return i;
  }
  throw PreconditionError("prompt " + id + " is not in the prompt pool");
}

// K-1 distinct pool indices other than `exclude`, uniformly at random.
inline std::vector<std::size_t> draw_others(std::size_t pool_size,
                                            std::size_t exclude,
                                            std::size_t count,
                                            std::mt19937_64& rng) {
  std::vector<std::size_t> others;
  others.reserve(pool_size - 1);
  for (std::size_t i = 0; i < pool_size; ++i) {
    if (i != exclude) others.push_back(i);
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, others.size() - 1);
    std::swap(others[i], others[pick(rng)]);
  }
  others.resize(count);
  return others;
}

}  // namespace detail

inline PromptWeighting exact_bayes_weights(const PreferenceDataset& ds,
                                           const ResponseFeatures& y1,
                                           const ResponseFeatures& y2) {
  if (!ds.generation_model) {
    throw UnsupportedError("exact weighting needs a generation model");
  }
  PromptWeighting out;
  out.scheme = Scheme::ExactBayes;
  Vector logw;
  for (std::size_t i = 0; i < ds.prompt_pool.size(); ++i) {
    if (ds.prompt_weights[i] <= 0.0) continue;
    out.prompts.push_back(i);
    logw.push_back(detail::log_joint(ds, i, y1, y2));
  }
  if (out.prompts.empty()) throw PreconditionError("empty prompt pool");
  out.weights = detail::normalize_log_weights(logw);
  return out;
}

inline PromptWeighting pessimistic_weights(const PreferenceDataset& ds,
                                           const PreferenceSample& sample,
                                           int k, double p, std::uint64_t seed) {
  if (k < 1) throw ConfigError("K must be at least 1");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must lie in (0, 1]");
  if (k == 1 && p != 1.0) {
    throw ConfigError("a single candidate prompt requires p = 1");
  }
  const std::size_t corr = detail::find_prompt(ds, sample.prompt.id);
  const auto others_needed = static_cast<std::size_t>(k - 1);
  if (others_needed > ds.prompt_pool.size() - 1) {
    throw ConfigError("K - 1 = " + std::to_string(others_needed) +
                      " exceeds the " + std::to_string(ds.prompt_pool.size() - 1) +
                      " other prompts in the pool");
  }
  std::mt19937_64 rng(mix_seed(seed, sample.id));
  PromptWeighting out;
  out.scheme = Scheme::PessimisticFixedP;
  out.prompts.push_back(corr);
  out.weights.push_back(p);
  for (std::size_t idx : detail::draw_others(ds.prompt_pool.size(), corr,
                                             others_needed, rng)) {
    out.prompts.push_back(idx);
    out.weights.push_back((1.0 - p) / static_cast<double>(k - 1));
  }
  return out;
}

// The corresponding prompt plus K-1 distinct prompts drawn from P(X), weighted
// by P(x) P(y1|x) P(y2|x) restricted to the candidate set.
inline PromptWeighting self_generated_weights(const PreferenceDataset& ds,
                                              const PreferenceSample& sample,
                                              int k, std::uint64_t seed) {
  if (!ds.generation_model) {
    throw UnsupportedError("self-generated weighting needs a generation model");
  }
  if (k < 1) throw ConfigError("K must be at least 1");
  const std::size_t corr = detail::find_prompt(ds, sample.prompt.id);
  const auto others_needed = static_cast<std::size_t>(k - 1);
  if (others_needed > ds.prompt_pool.size() - 1) {
    throw ConfigError("K - 1 exceeds the number of other prompts in the pool");
  }
  std::mt19937_64 rng(mix_seed(seed, sample.id));
  PromptWeighting out;
  out.scheme = Scheme::SelfGenerated;
  out.prompts.push_back(corr);
  // Sequential weighted draws without replacement from P(X).
  Vector mass = ds.prompt_weights;
  mass[corr] = 0.0;
  for (std::size_t n = 0; n < others_needed; ++n) {
    std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
    const std::size_t idx = pick(rng);
    out.prompts.push_back(idx);
    mass[idx] = 0.0;
  }
  Vector logw;
  for (std::size_t idx : out.prompts) {
    logw.push_back(detail::log_joint(ds, idx, sample.chosen, sample.rejected));
  }
  out.weights = detail::normalize_log_weights(logw);
  return out;
}

inline PromptWeighting make_weighting(const PreferenceDataset& ds,
                                      const PreferenceSample& sample,
                                      const SchemeParams& params) {
  switch (params.scheme) {
    case Scheme::ExactBayes:
      return exact_bayes_weights(ds, sample.chosen, sample.rejected);
    case Scheme::SelfGenerated:
      return self_generated_weights(ds, sample, params.candidates, params.seed);
    case Scheme::PessimisticFixedP:
      return pessimistic_weights(ds, sample, params.candidates,
                                 params.corresponding_prob, params.seed);
  }
  throw ConfigError("unknown scheme");
}

// Weightings for every sample of a dataset, computed once at construction and
// read-only afterwards.
class PromptWeighter {
 public:
  PromptWeighter(const PreferenceDataset& ds, SchemeParams params)
      : dataset_(&ds), params_(params) {
    cache_.reserve(ds.samples.size());
    for (const auto& s : ds.samples) cache_.push_back(make_weighting(ds, s, params));
  }

  const PreferenceDataset& dataset() const { return *dataset_; }
  const SchemeParams& params() const { return params_; }
  const PromptWeighting& for_sample(std::size_t i) const { return cache_.at(i); }

 private:
  const PreferenceDataset* dataset_;
  SchemeParams params_;
  std::vector<PromptWeighting> cache_;
};

}  // namespace pfr

#endif  // PFR_CONDITIONAL_HPP_
