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

#ifndef PFR_DATASET_HPP_
#define PFR_DATASET_HPP_

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pfr/core.hpp"
#include "pfr/error.hpp"

namespace pfr {

// P(y | x) for (prompt id, response id) pairs.
class GenerationModel {
 public:
  void set(const std::string& prompt_id, const std::string& response_id,
           double prob) {
    table_[prompt_id][response_id] = prob;
  }

  std::optional<double> find(const std::string& prompt_id,
                             const std::string& response_id) const {
    auto row = table_.find(prompt_id);
    if (row == table_.end()) return std::nullopt;
    auto it = row->second.find(response_id);
    if (it == row->second.end()) return std::nullopt;
    return it->second;
  }

  double at(const std::string& prompt_id, const std::string& response_id) const {
    auto p = find(prompt_id, response_id);
    if (!p) {
      throw UnsupportedError("generation model has no P(" + response_id + " | " +
                             prompt_id + ")");
    }
    return *p;
  }

  bool has_prompt(const std::string& prompt_id) const {
    return table_.count(prompt_id) > 0;
  }

  // Copies the row of `from` to a new prompt id.
  void copy_row(const std::string& from, const std::string& to) {
    auto row = table_.find(from);
    if (row == table_.end()) {
      throw PreconditionError("generation model has no row for " + from);
    }
    auto copy = row->second;
    table_[to] = std::move(copy);
  }

  const std::unordered_map<std::string, std::unordered_map<std::string, double>>&
  rows() const {
    return table_;
  }

 private:
  std::unordered_map<std::string, std::unordered_map<std::string, double>> table_;
};

struct PreferenceDataset {
  std::vector<PreferenceSample> samples;
  std::vector<PromptFeatures> prompt_pool;
  std::vector<double> prompt_weights;  // P(x), aligned with prompt_pool
  std::optional<GenerationModel> generation_model;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  std::unordered_map<std::string, std::size_t> prompt_index() const {
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(prompt_pool.size());
    for (std::size_t i = 0; i < prompt_pool.size(); ++i) {
      index.emplace(prompt_pool[i].id, i);
    }
    return index;
  }
};

inline bool all_finite(const Vector& v) {
  for (double d : v) {
    if (!std::isfinite(d)) return false;
  }
  return true;
}

// Throws PreconditionError describing the first violated invariant.
inline void validate_dataset(const PreferenceDataset& ds) {
  if (ds.prompt_weights.size() != ds.prompt_pool.size()) {
    throw PreconditionError("prompt_weights and prompt_pool differ in size");
  }
  double total = 0.0;
  for (double w : ds.prompt_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw PreconditionError("prompt weights must be finite and non-negative");
    }
    total += w;
  }
  if (!ds.prompt_pool.empty() && std::abs(total - 1.0) > 1e-9) {
    throw PreconditionError("prompt weights sum to " + std::to_string(total));
  }
  std::unordered_set<std::string> ids;
  std::size_t dx = ds.prompt_pool.empty() ? 0 : ds.prompt_pool[0].vector.size();
  for (const auto& p : ds.prompt_pool) {
    if (!ids.insert(p.id).second) {
      throw PreconditionError("duplicate prompt id " + p.id);
    }
    if (p.vector.size() != dx || !all_finite(p.vector)) {
      throw PreconditionError("prompt " + p.id + " has bad features");
    }
    if (p.directive < -1 || p.directive > 1) {
      throw PreconditionError("prompt " + p.id + " has bad directive flag");
    }
  }
  std::unordered_set<std::string> sample_ids;
  for (const auto& s : ds.samples) {
    if (!sample_ids.insert(s.id).second) {
      throw PreconditionError("duplicate sample id " + s.id);
    }
    if (s.chosen.id == s.rejected.id) {
      throw PreconditionError("sample " + s.id +
                              " compares a response with itself");
    }
    if (!ids.count(s.prompt.id)) {
      throw PreconditionError("sample " + s.id + " uses prompt " + s.prompt.id +
                              " missing from the prompt pool");
    }
    for (const auto* r : {&s.chosen, &s.rejected}) {
      if (r->length < 1 || !all_finite(r->vector)) {
        throw PreconditionError("sample " + s.id + " has a bad response");
      }
    }
    if (s.reinsertion_quota < 0) {
      throw PreconditionError("sample " + s.id + " has negative quota");
    }
    const bool longer = s.chosen.length > s.rejected.length;
    if ((s.group == Group::ChosenLonger && !longer) ||
        (s.group == Group::ChosenShorter && longer)) {
      throw PreconditionError("sample " + s.id +
                              " has a length tag inconsistent with its lengths");
    }
  }
  if (ds.generation_model) {
    for (const auto& [pid, row] : ds.generation_model->rows()) {
      for (const auto& [rid, p] : row) {
        if (!(p > 0.0 && p <= 1.0)) {
          throw PreconditionError("P(" + rid + " | " + pid + ") outside (0, 1]");
        }
      }
    }
  }
}

}  // namespace pfr

#endif  // PFR_DATASET_HPP_
