#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mergan/metrics.hpp"

namespace mergan {

inline constexpr const char* kMetricsHeader = "global_iter,task,metric,category,value";

/// One CSV line (no newline); values use %.17g so they round-trip exactly.
std::string format_metric_row(const MetricRow& row);
std::vector<MetricRow> parse_metrics_csv(const std::filesystem::path& path);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Long-format metric log. Every append rewrites the whole file through
/// write_file_atomic, so readers never observe a partial line.
class MetricsLog {
 public:
  explicit MetricsLog(std::filesystem::path path);
  /// Keeps existing rows with global_iter <= `up_to` (used when resuming).
  void load_existing(std::size_t up_to);
  void append(std::span<const MetricRow> rows);
  const std::vector<MetricRow>& rows() const noexcept { return rows_; }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void flush() const;

  std::filesystem::path path_;
  std::vector<MetricRow> rows_;
};

/// [-1, 1] -> [0, 255], rounding to nearest and clamping.
std::uint8_t to_gray(double v);

/// Grid of `rows` x `cols` images (N x H x W or N x 1 x H x W, row-major over
/// the grid) separated by `separator` white pixels between cells only.
struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};
GrayImage image_grid(const Tensor& images, std::size_t rows, std::size_t cols, std::size_t separator);
/// Binary PGM (P5, maxval 255).
std::string encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

}  // namespace mergan
