#include "mergan/outputs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mergan {

std::string format_metric_row(const MetricRow& row) {
  char value[40];
  std::snprintf(value, sizeof value, "%.17g", row.value);
  return std::to_string(row.global_iter) + "," + std::to_string(row.task) + "," + row.metric + "," + row.category +
         "," + value;
}

std::vector<MetricRow> parse_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error(path.string() + ": missing header '" + kMetricsHeader + "'");
  }
  std::vector<MetricRow> rows;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    std::stringstream fields(line);
    std::string gi, task, metric, category, value;
    if (!std::getline(fields, gi, ',') || !std::getline(fields, task, ',') || !std::getline(fields, metric, ',') ||
        !std::getline(fields, category, ',') || !std::getline(fields, value)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(n) + ": malformed row");
    }
    rows.push_back({std::stoul(gi), std::stoi(task), metric, category, std::stod(value)});
  }
  return rows;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

MetricsLog::MetricsLog(std::filesystem::path path) : path_(std::move(path)) {}

void MetricsLog::load_existing(std::size_t up_to) {
  rows_.clear();
  if (!std::filesystem::exists(path_)) return;
  for (MetricRow& r : parse_metrics_csv(path_)) {
    if (r.global_iter <= up_to) rows_.push_back(std::move(r));
  }
}

void MetricsLog::append(std::span<const MetricRow> rows) {
  rows_.insert(rows_.end(), rows.begin(), rows.end());
  flush();
}

void MetricsLog::flush() const {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricRow& r : rows_) out += format_metric_row(r) + "\n";
  write_file_atomic(path_, out);
}

std::uint8_t to_gray(double v) {
  const double scaled = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(scaled);
}

GrayImage image_grid(const Tensor& images, std::size_t rows, std::size_t cols, std::size_t separator) {
  const Shape& s = images.shape();
  if (s.size() < 3) throw ShapeError("image_grid needs N x H x W images, got " + to_string(s));
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  if (images.rows() != rows * cols || images.size() != rows * cols * h * w) {
    throw ShapeError("image_grid: " + std::to_string(rows) + " x " + std::to_string(cols) + " cells but images are " +
                     to_string(s));
  }
  GrayImage g;
  g.width = cols * w + (cols - 1) * separator;
  g.height = rows * h + (rows - 1) * separator;
  g.pixels.assign(g.width * g.height, 255);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double* img = images.data() + (r * cols + c) * h * w;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          g.pixels[(r * (h + separator) + y) * g.width + c * (w + separator) + x] = to_gray(img[y * w + x]);
        }
    }
  return g;
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) { write_file_atomic(path, encode_pgm(image)); }

}  // namespace mergan
