#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mergan/data.hpp"
#include "mergan/metrics.hpp"
#include "mergan/model.hpp"
#include "mergan/trainer.hpp"

namespace mergan {

enum class DatasetKind { Glyphs, Gauss2D, Idx };

struct IdxPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

/// Everything one `mergan train` run needs. Mirrors TrainConfig and adds
/// dataset, model, evaluation and output settings.
struct RunConfig {
  TrainConfig train;

  DatasetKind dataset = DatasetKind::Glyphs;
  std::size_t categories = 5;  // M
  std::size_t n_train = 1000;  // per category
  std::size_t n_test = 200;
  std::optional<std::uint64_t> data_seed;  // defaults to the training seed
  GlyphSpec glyph;
  double gauss_radius = 1.0;
  double gauss_sigma = 0.1;
  IdxPaths idx;

  std::vector<std::size_t> generator_hidden{128, 256};
  std::vector<std::size_t> trunk_hidden{256, 128};
  double init_std = 0.02;

  EvalConfig eval;
  ClassifierConfig proxy;
  double proxy_min_accuracy = 0.95;

  std::filesystem::path output_dir = "run";
  bool grids = true;
  std::size_t grid_columns = 8;
  std::size_t grid_separator = 1;
  bool checkpoints = true;

  Architecture architecture() const;
  TaskSchedule schedule() const;
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text with `#` comments. Unknown keys, repeated keys and
/// malformed values are errors that name the key and line. Relative paths are
/// resolved against `base_dir`.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {},
                       std::string_view source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Applies MERGAN_SEED from the environment, if set, to the training seed.
void apply_environment(RunConfig& config);

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};
/// Every accepted key with its default, in documentation order.
std::vector<ConfigKey> config_keys();
/// The config rendered back to text; parse_config(render_config(c)) == c.
std::string render_config(const RunConfig& config);

std::string_view dataset_name(DatasetKind kind);

}  // namespace mergan
