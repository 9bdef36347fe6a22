#include <algorithm>
#include <string>

#include "mergan/data.hpp"

namespace mergan {

const std::array<GlyphBitmap, 10>& glyph_bitmaps() {
  static const std::array<GlyphBitmap, 10> bitmaps{{
      {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},
      {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},
      {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},
      {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "},
      {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},
      {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},
      {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "},
      {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},
      {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},
      {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "},
  }};
  return bitmaps;
}

namespace {

void check_category(int category) {
  if (category < 1 || category > 10) {
    throw std::out_of_range("glyph category " + std::to_string(category) + " outside [1, 10]");
  }
}

}  // namespace

Tensor clean_glyph(int category, const GlyphSpec& spec, int dx, int dy) {
  check_category(category);
  const std::size_t gw = kGlyphColumns * spec.upscale;
  const std::size_t gh = kGlyphRows * spec.upscale;
  if (gw > spec.width || gh > spec.height) {
    throw std::invalid_argument("glyph canvas " + std::to_string(spec.height) + "x" + std::to_string(spec.width) +
                                " too small for the upscaled bitmap");
  }
  const GlyphBitmap& bitmap = glyph_bitmaps()[static_cast<std::size_t>(category - 1)];
  const long left = static_cast<long>((spec.width - gw) / 2) + dx;
  const long top = static_cast<long>((spec.height - gh) / 2) + dy;
  Tensor image(Shape{spec.height, spec.width}, -1.0);
  for (std::size_t r = 0; r < gh; ++r) {
    for (std::size_t c = 0; c < gw; ++c) {
      if (bitmap[r / spec.upscale][c / spec.upscale] != '#') continue;
      const long y = top + static_cast<long>(r);
      const long x = left + static_cast<long>(c);
      if (y < 0 || x < 0 || y >= static_cast<long>(spec.height) || x >= static_cast<long>(spec.width)) continue;
      image.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 1.0;
    }
  }
  return image;
}

Tensor render_glyph(int category, const GlyphSpec& spec, Rng& rng) {
  const int dx = sample_category(rng, -spec.max_shift, spec.max_shift);
  const int dy = sample_category(rng, -spec.max_shift, spec.max_shift);
  Tensor image = clean_glyph(category, spec, dx, dy);
  if (spec.flip_probability > 0.0) {
    for (double& v : image.values()) {
      if (sample_uniform01(rng) < spec.flip_probability) v = -v;
    }
  }
  if (spec.noise_sigma > 0.0) {
    for (double& v : image.values()) v = std::clamp(v + spec.noise_sigma * sample_standard_normal(rng), -1.0, 1.0);
  }
  return image;
}

TaskSchedule make_glyph_tasks(std::uint64_t seed, std::size_t n_train, std::size_t n_test, std::size_t categories,
                              const GlyphSpec& spec) {
  if (categories < 1 || categories > 10) {
    throw std::invalid_argument("glyph datasets support 1 to 10 categories, got " + std::to_string(categories));
  }
  if (spec.max_shift < 0) throw std::invalid_argument("glyph max_shift must be nonnegative");
  const Rng root(seed);
  const std::size_t pixels = spec.height * spec.width;
  TaskSchedule schedule;
  for (std::size_t c = 1; c <= categories; ++c) {
    const int category = static_cast<int>(c);
    TaskData task;
    task.category = category;
    auto fill = [&](LabeledSet& set, Split split, std::size_t n, std::string_view stream) {
      Rng rng = root.split(stream, c);
      set.split = split;
      set.samples = Tensor(Shape{n, 1, spec.height, spec.width});
      set.labels.assign(n, category);
      for (std::size_t i = 0; i < n; ++i) {
        const Tensor image = render_glyph(category, spec, rng);
        std::copy(image.values().begin(), image.values().end(), set.samples.data() + i * pixels);
      }
    };
    fill(task.train, Split::Train, n_train, "glyph-train");
    fill(task.test, Split::Test, n_test, "glyph-test");
    schedule.tasks.push_back(std::move(task));
  }
  return schedule;
}

}  // namespace mergan
