// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one flat `key = value` file, every key defaulted.
// Blank lines and `#` comments are ignored; string values may be quoted.
// Command-line `--set key=value` pairs are applied on top of the file.
#pragma once

#include "herl/affinity.hpp"
#include "herl/dataio.hpp"
#include "herl/hypmath.hpp"
#include "herl/losses.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace herl::config {

struct RunConfig {
  std::string dataset = "data";  ///< dataset directory
  std::string out = "run";       ///< checkpoint / log directory

  hyp::HypConfig hyp;
  affinity::GraphConfig graph;
  loss::LossConfig loss;

  std::vector<Index> hidden{64};
  Index embed_dim = 16;
  Index prototypes = 10;
  bool prototype_softmax = false;

  int epochs = 500;
  Index batch_size = 1024;
  double lr = 2e-3;
  double momentum = 0.98;
  std::uint64_t seed = 0;

  int clusters = 0;  ///< k for evaluation; 0 = number of distinct labels
  int kmeans_restarts = 10;
  int kmeans_max_iter = 300;

  data::SynthSpec synth;
  data::MaskSpec mask;

  /// Throws ConfigError (or UnsupportedError) on the first violated invariant.
  void validate() const;
};

/// Sets one key from its textual value. Throws ConfigError for an unknown key
/// or an unparsable value.
void set_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies `key = value` lines. `origin` labels error messages.
void apply_text(RunConfig& cfg, const std::string& text, const std::string& origin = "<text>");

/// Defaults, then the file (if non-empty path), then `key=value` overrides.
RunConfig load(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});

/// Every key with its current value, in a stable order; apply_text of the
/// rendered text reproduces the config.
std::vector<std::pair<std::string, std::string>> entries(const RunConfig& cfg);
std::string render(const RunConfig& cfg);

}  // namespace herl::config
