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

// Experiment configuration: a sectioned key = value file.
//
//   # comment
//   [train]
//   steps = 1500
//
// Every key has a default; unknown sections or keys are rejected. Values are
// kept as strings until a typed accessor parses them.

#ifndef PFR_CONFIG_HPP_
#define PFR_CONFIG_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pfr/conditional.hpp"
#include "pfr/core.hpp"
#include "pfr/decompose.hpp"
#include "pfr/error.hpp"
#include "pfr/io.hpp"
#include "pfr/synth.hpp"
#include "pfr/trainer.hpp"

namespace pfr {

class ExperimentConfig {
 public:
  ExperimentConfig() {
    for (const auto& [k, v] : defaults()) values_[k] = v;
  }

  // Defaults, keyed "section.key". The order here is the echo order.
  static const std::vector<std::pair<std::string, std::string>>& defaults() {
    static const std::vector<std::pair<std::string, std::string>> d = {
        {"general.seed", "0"},
        {"world.n_prompts", "200"},
        {"world.n_samples", "3000"},
        {"world.d_x", "8"},
        {"world.d_y", "8"},
        {"world.length_min", "20"},
        {"world.length_max", "400"},
        {"world.support", "4"},
        {"world.own_bonus", "0"},
        {"world.generation_temperature", "0"},
        {"world.label_noise", "0"},
        {"world.prompt_scale", "2"},
        {"world.quality_scale", "0"},
        {"world.length_bias", "0"},
        {"world.directive_strength", "4"},
        {"synth.kind", "base"},
        {"synth.chosen_longer_fraction", "0.8"},
        {"synth.transform_fraction", "0.5"},
        {"synth.heldout_samples", "2000"},
        {"model.r_min", "-5"},
        {"model.r_max", "5"},
        {"model.init_scale", "0.01"},
        {"train.dataset", ""},
        {"train.mode", "prioritized"},
        {"train.steps", "1500"},
        {"train.batch_size", "32"},
        {"train.learning_rate", "0.01"},
        {"train.ema_alpha", "0.9"},
        {"train.reinsertion_mode", "immediate"},
        {"train.reinsertion_quota", "3"},
        {"train.lambda_override", "none"},
        {"train.snapshot_samples", "200"},
        {"train.shuffle", "true"},
        {"train.allow_refill", "true"},
        {"scheme.name", "pessimistic"},
        {"scheme.candidates", "16"},
        {"scheme.corresponding_prob", "0.5"},
        {"search.epsilon", "1e-6"},
        {"search.max_iterations", "64"},
        {"verify.suite", "default"},
        {"verify.datasets", "20"},
        {"verify.max_prompts", "6"},
        {"verify.max_pairs", "6"},
        {"eval.model", ""},
        {"eval.dataset", ""},
        {"eval.heldout", ""},
        {"eval.replacements", "16"},
        {"eval.snapshot_samples", "200"},
    };
    return d;
  }

  static bool known(const std::string& key) {
    for (const auto& [k, v] : defaults()) {
      if (k == key) return true;
    }
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key: " + key);
    values_[key] = value;
  }

  // "section.key=value"
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("override must look like section.key=value: " +
                        std::string(assignment));
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  void parse(std::string_view text, const std::string& origin = "<config>") {
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto where = origin + ":" + std::to_string(lineno) + ": ";
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError(where + "malformed section header");
        section = trim(std::string_view(t).substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
      if (section.empty()) throw ConfigError(where + "key outside of any section");
      const std::string key = section + "." + trim(std::string_view(t).substr(0, eq));
      if (!known(key)) throw ConfigError(where + "unknown key " + key);
      values_[key] = trim(std::string_view(t).substr(eq + 1));
    }
  }

  void load(const std::filesystem::path& path) { parse(read_file(path), path.string()); }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
  }

  double num(const std::string& key) const {
    const auto& s = str(key);
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ConfigError(key + " = '" + s + "' is not a number");
    }
    return v;
  }

  long long integer(const std::string& key) const {
    const auto& s = str(key);
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ConfigError(key + " = '" + s + "' is not an integer");
    }
    return v;
  }

  bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + " = '" + s + "' is not a boolean");
  }

  std::uint64_t seed() const {
    const long long s = integer("general.seed");
    if (s < 0) throw ConfigError("general.seed must be non-negative");
    return static_cast<std::uint64_t>(s);
  }

  WorldConfig world() const {
    WorldConfig w;
    w.n_prompts = static_cast<int>(integer("world.n_prompts"));
    w.n_samples = static_cast<int>(integer("world.n_samples"));
    w.d_x = static_cast<int>(integer("world.d_x"));
    w.d_y = static_cast<int>(integer("world.d_y"));
    w.length_min = static_cast<int>(integer("world.length_min"));
    w.length_max = static_cast<int>(integer("world.length_max"));
    w.support = static_cast<int>(integer("world.support"));
    w.own_bonus = num("world.own_bonus");
    w.generation_temperature = num("world.generation_temperature");
    w.label_noise = num("world.label_noise");
    w.oracle.prompt_scale = num("world.prompt_scale");
    w.oracle.quality_scale = num("world.quality_scale");
    w.oracle.length_bias = num("world.length_bias");
    w.oracle.directive_strength = num("world.directive_strength");
    w.seed = seed();
    validate_world(w);
    return w;
  }

  RewardBounds bounds() const {
    RewardBounds b{num("model.r_min"), num("model.r_max")};
    if (!(b.lo < b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi)) {
      throw ConfigError("model.r_min must be below model.r_max");
    }
    return b;
  }

  SchemeParams scheme() const {
    SchemeParams p;
    p.scheme = scheme_from_string(str("scheme.name"));
    p.candidates = static_cast<int>(integer("scheme.candidates"));
    p.corresponding_prob = num("scheme.corresponding_prob");
    p.seed = seed();
    if (p.candidates < 1) throw ConfigError("scheme.candidates must be positive");
    if (!(p.corresponding_prob > 0.0 && p.corresponding_prob <= 1.0)) {
      throw ConfigError("scheme.corresponding_prob must lie in (0, 1]");
    }
    return p;
  }

  SearchConfig search() const {
    SearchConfig s;
    s.epsilon = num("search.epsilon");
    s.max_iterations = static_cast<int>(integer("search.max_iterations"));
    validate_search(s, bounds().width());
    return s;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.steps = static_cast<int>(integer("train.steps"));
    t.batch_size = static_cast<int>(integer("train.batch_size"));
    t.learning_rate = num("train.learning_rate");
    t.ema_alpha = num("train.ema_alpha");
    t.reinsertion_mode = reinsertion_mode_from_string(str("train.reinsertion_mode"));
    t.reinsertion_quota = static_cast<int>(integer("train.reinsertion_quota"));
    t.scheme = scheme();
    t.search = search();
    t.seed = seed();
    t.init_scale = num("model.init_scale");
    t.shuffle = flag("train.shuffle");
    t.allow_refill = flag("train.allow_refill");
    if (str("train.lambda_override") != "none") t.lambda_override = num("train.lambda_override");
    const long long snap = integer("train.snapshot_samples");
    if (snap < 0) throw ConfigError("train.snapshot_samples must be >= 0");
    t.snapshot_samples = static_cast<std::size_t>(snap);
    const auto& mode = str("train.mode");
    if (mode != "vanilla" && mode != "prioritized") {
      throw ConfigError("train.mode must be vanilla or prioritized");
    }
    validate_train_config(t);
    return t;
  }

  // Every key in declaration order.
  ordered_json to_json() const {
    ordered_json j;
    for (const auto& [k, v] : defaults()) j[k] = values_.at(k);
    return j;
  }

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
  }

  std::map<std::string, std::string> values_;
};

}  // namespace pfr

#endif  // PFR_CONFIG_HPP_
