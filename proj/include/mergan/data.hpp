#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mergan/model.hpp"
#include "mergan/rng.hpp"
#include "mergan/tensor.hpp"

namespace mergan {

enum class Split { Train, Test };

/// Samples stacked along the leading axis with one label per sample.
struct LabeledSet {
  Tensor samples;
  std::vector<int> labels;
  Split split = Split::Train;

  std::size_t size() const noexcept { return labels.size(); }
};

struct TaskData {
  int category = 0;
  LabeledSet train;
  LabeledSet test;
};

/// Task t (1-based) holds only category t.
struct TaskSchedule {
  std::vector<TaskData> tasks;

  std::size_t size() const noexcept { return tasks.size(); }
  const TaskData& task(int t) const;
  /// Throws unless every set is category-pure with category == task index.
  void validate() const;
};

// ---- glyphs ------------------------------------------------------------------

inline constexpr std::size_t kGlyphColumns = 5;
inline constexpr std::size_t kGlyphRows = 7;
using GlyphBitmap = std::array<const char*, kGlyphRows>;

/// 5x7 seed bitmaps of the digits 0..9; '#' is ink. Category c renders digit c - 1.
const std::array<GlyphBitmap, 10>& glyph_bitmaps();

struct GlyphSpec {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t upscale = 2;
  int max_shift = 2;
  double flip_probability = 0.02;
  double noise_sigma = 0.05;
};

/// Upscaled seed bitmap of `category`, centred and then shifted by (dx, dy)
/// pixels; ink is +1, background -1. Pixels shifted off the canvas are lost.
Tensor clean_glyph(int category, const GlyphSpec& spec, int dx = 0, int dy = 0);
/// One jittered sample, H x W. Draw order: dx, dy, one uniform per pixel for
/// flips (when the probability is nonzero), one normal per pixel for noise
/// (when sigma is nonzero).
Tensor render_glyph(int category, const GlyphSpec& spec, Rng& rng);

TaskSchedule make_glyph_tasks(std::uint64_t seed, std::size_t n_train, std::size_t n_test, std::size_t categories,
                              const GlyphSpec& spec = {});

// ---- 2-D Gaussian mixtures ---------------------------------------------------

struct Gauss2DSpec {
  std::vector<std::array<double, 2>> means;
  double sigma = 0.1;
  std::vector<double> weights;  // empty means uniform

  void validate() const;
};

/// Draw order per point: one uniform for the component (skipped for a single
/// component), then x and y normals.
Tensor sample_gauss2d(const Gauss2DSpec& spec, std::size_t n, Rng& rng);
TaskSchedule make_gauss2d_tasks(std::uint64_t seed, const std::vector<Gauss2DSpec>& specs, std::size_t n_train,
                                std::size_t n_test);
/// Categories placed evenly on a circle of the given radius, one component each.
std::vector<Gauss2DSpec> ring_gauss2d(std::size_t categories, double radius, double sigma);

// ---- IDX files ---------------------------------------------------------------

/// Malformed IDX input. The message names the file and the byte offset.
class IdxError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, CountMismatch, Truncated, Io };
  IdxError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Labels exactly as stored in the file (digits stay 0..9).
std::vector<int> read_idx_labels(const std::filesystem::path& path);
/// Images as N x rows x cols, pixels mapped from [0, 255] to [-1, 1].
Tensor read_idx_images(const std::filesystem::path& path);

/// Pairs an image file with its label file. With `resize`, images are
/// resampled to height x width by nearest neighbour. Labels are the raw file
/// values; idx_tasks() maps digit d to category d + 1.
LabeledSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                    std::optional<std::pair<std::size_t, std::size_t>> resize = std::nullopt);

/// Nearest-neighbour resample of N x h x w images; source index floor(i * h / H).
Tensor resize_nearest(const Tensor& images, std::size_t height, std::size_t width);

TaskSchedule idx_tasks(const LabeledSet& train, const LabeledSet& test, std::size_t categories);

// ---- replay ------------------------------------------------------------------

/// `batch` samples of the snapshot generator in eval mode with c ~ U{1, t-1}.
/// All categories are drawn first, then the latent batch. Labels equal c.
std::pair<Tensor, std::vector<int>> replay_batch(const ModelParams& snapshot, Rng& rng, std::size_t batch, int t);

/// Eval-mode generator output for given z and categories.
Tensor generate_eval(const ModelParams& params, const Tensor& z, std::span<const int> categories);

}  // namespace mergan
