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

// Diagnostics over a reward model: quadrant snapshots in the (dr1, dr2)
// plane, gaps under replaced prompts and pairwise accuracy.

#ifndef PFR_EVAL_HPP_
#define PFR_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "pfr/conditional.hpp"
#include "pfr/core.hpp"
#include "pfr/dataset.hpp"
#include "pfr/decompose.hpp"
#include "pfr/error.hpp"
#include "pfr/io.hpp"

namespace pfr {

struct QuadrantRecord {
  std::string sample_id;
  double dr1 = 0.0;
  double dr2 = 0.0;
  double total = 0.0;
  Group group = Group::Plain;
  double phi_standard_error = 0.0;
};

struct QuadrantSnapshot {
  int step = 0;
  std::vector<QuadrantRecord> records;
  std::vector<std::size_t> sample_indices;
  Vector parameters;  // model at the time of the snapshot
};

// n distinct indices in [0, size), ascending.
inline std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n,
                                               std::uint64_t seed) {
  if (n > size) {
    throw PreconditionError("cannot draw " + std::to_string(n) + " of " +
                            std::to_string(size) + " samples");
  }
  std::vector<std::size_t> all(size);
  for (std::size_t i = 0; i < size; ++i) all[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(n);
  std::sort(all.begin(), all.end());
  return all;
}

template <PairGapModel M>
QuadrantSnapshot quadrant_snapshot(const M& model, const PromptWeighter& weighter,
                                   std::size_t n, std::uint64_t seed, int step = 0,
                                   const SearchConfig& search = {}) {
  const auto& ds = weighter.dataset();
  QuadrantSnapshot snap;
  snap.step = step;
  snap.sample_indices = sample_indices(ds.size(), n, seed);
  const auto dec = decompose_batch(model, weighter, snap.sample_indices, search);
  for (std::size_t r = 0; r < dec.size(); ++r) {
    const auto& s = ds.samples[snap.sample_indices[r]];
    snap.records.push_back({s.id, dec[r].prompt_related_gap, dec[r].prompt_free_gap,
                            dec[r].total_gap, s.group, dec[r].phi_standard_error});
  }
  if constexpr (std::is_same_v<M, RewardFunction>) snap.parameters = model.parameters();
  return snap;
}

template <PairGapModel M>
QuadrantSnapshot quadrant_snapshot(const M& model, const PreferenceDataset& ds,
                                   const SchemeParams& scheme, std::size_t n,
                                   std::uint64_t seed, int step = 0,
                                   const SearchConfig& search = {}) {
  const PromptWeighter weighter(ds, scheme);
  return quadrant_snapshot(model, weighter, n, seed, step, search);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double mean_prompt_free_gap(const QuadrantSnapshot& snap) {
  std::vector<double> v;
  for (const auto& r : snap.records) v.push_back(r.dr2);
  return mean_of(v);
}

inline double mean_prompt_free_gap(const QuadrantSnapshot& snap, Group g) {
  std::vector<double> v;
  for (const auto& r : snap.records) {
    if (r.group == g) v.push_back(r.dr2);
  }
  return mean_of(v);
}

struct ReplacementGap {
  std::string sample_id;
  double original_gap = 0.0;
  double replaced_mean = std::numeric_limits<double>::quiet_NaN();
  double replaced_std = std::numeric_limits<double>::quiet_NaN();
  int replacements = 0;
};

// Gap with the true prompt and with n other pool prompts (population std).
inline std::vector<ReplacementGap> prompt_replacement_gaps(
    const RewardFunction& model, const PreferenceDataset& ds,
    std::size_t n_replacements, std::uint64_t seed) {
  if (ds.prompt_pool.size() < 2) {
    throw PreconditionError("prompt replacement needs at least two pool prompts");
  }
  if (n_replacements > ds.prompt_pool.size() - 1) {
    throw PreconditionError("more replacements requested than other prompts");
  }
  const auto index = ds.prompt_index();
  std::vector<ReplacementGap> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) {
    ReplacementGap g;
    g.sample_id = s.id;
    g.original_gap = model.gap(s.prompt, s.chosen, s.rejected);
    g.replacements = static_cast<int>(n_replacements);
    if (n_replacements > 0) {
      std::mt19937_64 rng(mix_seed(seed, s.id));
      const auto others = detail::draw_others(ds.prompt_pool.size(),
                                              index.at(s.prompt.id),
                                              n_replacements, rng);
      std::vector<double> gaps;
      for (std::size_t idx : others) {
        gaps.push_back(model.gap(ds.prompt_pool[idx], s.chosen, s.rejected));
      }
      g.replaced_mean = mean_of(gaps);
      double var = 0.0;
      for (double v : gaps) var += (v - g.replaced_mean) * (v - g.replaced_mean);
      g.replaced_std = std::sqrt(var / static_cast<double>(gaps.size()));
    }
    out.push_back(g);
  }
  return out;
}

// Fraction of samples whose chosen response gets the larger reward; ties 1/2.
template <PairGapModel M>
double heldout_accuracy(const M& model, const PreferenceDataset& ds) {
  if (ds.empty()) throw PreconditionError("accuracy of an empty dataset");
  double hits = 0.0;
  for (const auto& s : ds.samples) {
    const double g = model.gap(s.prompt, s.chosen, s.rejected);
    hits += g > 0.0 ? 1.0 : (g == 0.0 ? 0.5 : 0.0);
  }
  return hits / static_cast<double>(ds.size());
}

template <PairGapModel M>
std::map<std::string, double> group_accuracy(const M& model,
                                             const PreferenceDataset& ds) {
  std::map<std::string, std::pair<double, double>> acc;
  for (const auto& s : ds.samples) {
    const double g = model.gap(s.prompt, s.chosen, s.rejected);
    auto& [hits, count] = acc[std::string(to_string(s.group))];
    hits += g > 0.0 ? 1.0 : (g == 0.0 ? 0.5 : 0.0);
    count += 1.0;
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

// 17 significant digits round-trip every double.
inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_quadrant_csv(const std::filesystem::path& path,
                               const QuadrantSnapshot& snap) {
  std::string out = "step,sample_id,dr1,dr2,group\n";
  for (const auto& r : snap.records) {
    out += std::to_string(snap.step) + "," + r.sample_id + "," + fmt_double(r.dr1) +
           "," + fmt_double(r.dr2) + "," + std::string(to_string(r.group)) + "\n";
  }
  write_file(path, out);
}

inline void write_replacement_csv(const std::filesystem::path& path,
                                  const std::vector<ReplacementGap>& gaps) {
  std::string out = "sample_id,original_gap,replaced_mean,replaced_std,replacements\n";
  for (const auto& g : gaps) {
    out += g.sample_id + "," + fmt_double(g.original_gap) + "," +
           fmt_double(g.replaced_mean) + "," + fmt_double(g.replaced_std) + "," +
           std::to_string(g.replacements) + "\n";
  }
  write_file(path, out);
}

}  // namespace pfr

#endif  // PFR_EVAL_HPP_
