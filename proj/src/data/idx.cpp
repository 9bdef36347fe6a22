#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mergan/data.hpp"

namespace mergan {

namespace {

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

struct IdxFile {
  std::filesystem::path path;
  std::vector<unsigned char> bytes;

  [[noreturn]] void fail(IdxError::Kind kind, std::size_t offset, const std::string& what) const {
    throw IdxError(kind, path.string() + " at offset " + std::to_string(offset) + ": " + what);
  }

  std::uint32_t u32(std::size_t offset) const {
    if (offset + 4 > bytes.size()) {
      fail(IdxError::Kind::Truncated, bytes.size(),
           "truncated header, needs " + std::to_string(offset + 4) + " bytes, file has " + std::to_string(bytes.size()));
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
  }

  void expect_magic(std::uint32_t magic) const {
    const std::uint32_t found = u32(0);
    if (found != magic) {
      fail(IdxError::Kind::BadMagic, 0, "bad magic " + hex32(found) + ", expected " + hex32(magic));
    }
  }

  void expect_payload(std::size_t offset, std::size_t count) const {
    if (bytes.size() < offset + count) {
      fail(IdxError::Kind::Truncated, bytes.size(),
           "truncated payload, expected " + std::to_string(count) + " bytes from offset " + std::to_string(offset) +
               ", file has " + std::to_string(bytes.size() - std::min(bytes.size(), offset)));
    }
  }
};

IdxFile read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::Io, path.string() + " at offset 0: cannot open file");
  IdxFile file{path, std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {})};
  return file;
}

constexpr std::size_t kLabelHeader = 8;
constexpr std::size_t kImageHeader = 16;

}  // namespace

std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  const IdxFile file = read_file(path);
  file.expect_magic(kIdxLabelMagic);
  const std::size_t count = file.u32(4);
  file.expect_payload(kLabelHeader, count);
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = file.bytes[kLabelHeader + i];
  return labels;
}

Tensor read_idx_images(const std::filesystem::path& path) {
  const IdxFile file = read_file(path);
  file.expect_magic(kIdxImageMagic);
  const std::size_t count = file.u32(4);
  const std::size_t rows = file.u32(8);
  const std::size_t cols = file.u32(12);
  file.expect_payload(kImageHeader, count * rows * cols);
  Tensor images(Shape{count, rows, cols});
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i] = static_cast<double>(file.bytes[kImageHeader + i]) / 127.5 - 1.0;
  }
  return images;
}

Tensor resize_nearest(const Tensor& images, std::size_t height, std::size_t width) {
  if (images.rank() != 3) throw ShapeError("resize_nearest expects N x h x w, got " + to_string(images.shape()));
  const std::size_t n = images.shape()[0], h = images.shape()[1], w = images.shape()[2];
  Tensor out(Shape{n, height, width});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t sy = y * h / height;
        const std::size_t sx = x * w / width;
        out[(i * height + y) * width + x] = images[(i * h + sy) * w + sx];
      }
  return out;
}

LabeledSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                    std::optional<std::pair<std::size_t, std::size_t>> resize) {
  Tensor pixels = read_idx_images(images);
  std::vector<int> values = read_idx_labels(labels);
  if (values.size() != pixels.shape()[0]) {
    throw IdxError(IdxError::Kind::CountMismatch,
                   labels.string() + " at offset 4: label count " + std::to_string(values.size()) +
                       " does not match image count " + std::to_string(pixels.shape()[0]) + " in " + images.string());
  }
  if (resize) pixels = resize_nearest(pixels, resize->first, resize->second);
  const Shape& s = pixels.shape();
  LabeledSet set;
  set.samples = pixels.reshaped(Shape{s[0], 1, s[1], s[2]});
  set.labels = std::move(values);
  return set;
}

TaskSchedule idx_tasks(const LabeledSet& train, const LabeledSet& test, std::size_t categories) {
  if (categories < 1 || categories > 10) {
    throw std::invalid_argument("IDX digit tasks support 1 to 10 categories, got " + std::to_string(categories));
  }
  auto select = [](const LabeledSet& from, int digit, int category, Split split) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < from.size(); ++i) {
      if (from.labels[i] == digit) rows.push_back(i);
    }
    if (rows.empty()) throw std::invalid_argument("IDX data has no samples of digit " + std::to_string(digit));
    Shape shape = from.samples.shape();
    shape[0] = rows.size();
    const std::size_t d = from.samples.cols();
    LabeledSet set;
    set.split = split;
    set.samples = Tensor(shape);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy_n(from.samples.data() + rows[r] * d, d, set.samples.data() + r * d);
    }
    set.labels.assign(rows.size(), category);
    return set;
  };
  TaskSchedule schedule;
  for (std::size_t c = 1; c <= categories; ++c) {
    const int category = static_cast<int>(c);
    schedule.tasks.push_back({category, select(train, category - 1, category, Split::Train),
                              select(test, category - 1, category, Split::Test)});
  }
  return schedule;
}

}  // namespace mergan
