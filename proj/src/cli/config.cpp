#include "mergan/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace mergan {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("not a number: '" + v + "'");
  return out;
}

std::size_t parse_size(const std::string& v) { return parse_number<std::size_t>(v); }
double parse_real(const std::string& v) { return parse_number<double>(v); }

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_size(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::string real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Key {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MERGAN_SIZE(key, field, help) \
  Key{key, help, [](RunConfig& c, const std::string& v) { c.field = parse_size(v); }, \
      [](const RunConfig& c) { return std::to_string(c.field); }}
#define MERGAN_REAL(key, field, help) \
  Key{key, help, [](RunConfig& c, const std::string& v) { c.field = parse_real(v); }, \
      [](const RunConfig& c) { return real(c.field); }}
#define MERGAN_BOOL(key, field, help) \
  Key{key, help, [](RunConfig& c, const std::string& v) { c.field = parse_bool(v); }, \
      [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define MERGAN_LIST(key, field, help) \
  Key{key, help, [](RunConfig& c, const std::string& v) { c.field = parse_list(v); }, \
      [](const RunConfig& c) { return list(c.field); }}
#define MERGAN_PATH(key, field, help) \
  Key{key, help, [](RunConfig& c, const std::string& v) { c.field = v; }, \
      [](const RunConfig& c) { return c.field.string(); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"strategy", "JT, SFT, EWC, MERGAN_JTR or MERGAN_RA",
          [](RunConfig& c, const std::string& v) {
            const auto s = parse_strategy(v);
            if (!s) throw std::invalid_argument("unknown strategy '" + v + "'");
            c.train.strategy = *s;
          },
          [](const RunConfig& c) { return std::string(strategy_name(c.train.strategy)); }},
      Key{"seed", "training seed; MERGAN_SEED overrides it",
          [](RunConfig& c, const std::string& v) { c.train.seed = parse_number<std::uint64_t>(v); },
          [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      MERGAN_REAL("learning_rate", train.learning_rate, "Adam step size"),
      MERGAN_REAL("adam.beta1", train.adam_beta1, "Adam first-moment decay"),
      MERGAN_REAL("adam.beta2", train.adam_beta2, "Adam second-moment decay"),
      MERGAN_SIZE("batch_size", train.batch_size, "minibatch size"),
      MERGAN_SIZE("n_critic", train.n_critic, "critic updates per generator update"),
      MERGAN_SIZE("iters_per_task", train.iters_per_task, "generator updates per task"),
      MERGAN_REAL("lambda.cls", train.lambda.cls, "classification loss weight"),
      MERGAN_REAL("lambda.gp", train.lambda.gp, "gradient penalty weight"),
      MERGAN_REAL("lambda.ewc", train.lambda.ewc, "EWC penalty weight"),
      MERGAN_REAL("lambda.ra", train.lambda.ra, "replay alignment weight"),
      MERGAN_SIZE("fisher_samples", train.fisher_samples, "single-sample draws for the Fisher estimate"),
      MERGAN_SIZE("latent_dim", train.latent_dim, "size of z"),
      MERGAN_SIZE("eval_every", train.eval_every, "iterations between evaluations"),

      Key{"data.kind", "glyphs, gauss2d or idx",
          [](RunConfig& c, const std::string& v) {
            if (v == "glyphs") c.dataset = DatasetKind::Glyphs;
            else if (v == "gauss2d") c.dataset = DatasetKind::Gauss2D;
            else if (v == "idx") c.dataset = DatasetKind::Idx;
            else throw std::invalid_argument("unknown dataset '" + v + "'");
          },
          [](const RunConfig& c) { return std::string(dataset_name(c.dataset)); }},
      MERGAN_SIZE("data.categories", categories, "number of tasks M, one category each"),
      MERGAN_SIZE("data.n_train", n_train, "training samples per category (synthetic data)"),
      MERGAN_SIZE("data.n_test", n_test, "test samples per category (synthetic data)"),
      Key{"data.seed", "dataset seed; defaults to the training seed",
          [](RunConfig& c, const std::string& v) { c.data_seed = parse_number<std::uint64_t>(v); },
          [](const RunConfig& c) { return c.data_seed ? std::to_string(*c.data_seed) : std::string(); }},
      MERGAN_SIZE("data.glyph.height", glyph.height, "canvas height (also the IDX resize target)"),
      MERGAN_SIZE("data.glyph.width", glyph.width, "canvas width (also the IDX resize target)"),
      MERGAN_SIZE("data.glyph.upscale", glyph.upscale, "integer upscale of the 5x7 bitmaps"),
      Key{"data.glyph.max_shift", "maximum jitter shift in pixels",
          [](RunConfig& c, const std::string& v) { c.glyph.max_shift = parse_number<int>(v); },
          [](const RunConfig& c) { return std::to_string(c.glyph.max_shift); }},
      MERGAN_REAL("data.glyph.flip_prob", glyph.flip_probability, "per-pixel flip probability"),
      MERGAN_REAL("data.glyph.noise_sigma", glyph.noise_sigma, "intensity noise"),
      MERGAN_REAL("data.gauss2d.radius", gauss_radius, "radius of the ring of category means"),
      MERGAN_REAL("data.gauss2d.sigma", gauss_sigma, "isotropic standard deviation"),
      MERGAN_PATH("data.idx.train_images", idx.train_images, "IDX image file (train)"),
      MERGAN_PATH("data.idx.train_labels", idx.train_labels, "IDX label file (train)"),
      MERGAN_PATH("data.idx.test_images", idx.test_images, "IDX image file (test)"),
      MERGAN_PATH("data.idx.test_labels", idx.test_labels, "IDX label file (test)"),

      MERGAN_LIST("model.generator_hidden", generator_hidden, "generator hidden widths"),
      MERGAN_LIST("model.trunk_hidden", trunk_hidden, "critic/classifier trunk widths"),
      MERGAN_REAL("model.init_std", init_std, "weight init standard deviation"),

      MERGAN_SIZE("eval.samples_per_category", eval.samples_per_category, "generated samples per category"),
      MERGAN_SIZE("eval.probe_count", eval.probe_count, "fixed probe latents per category"),
      MERGAN_LIST("proxy.hidden", proxy.hidden, "proxy classifier hidden widths"),
      MERGAN_SIZE("proxy.iterations", proxy.iterations, "proxy training steps"),
      MERGAN_REAL("proxy.learning_rate", proxy.learning_rate, "proxy Adam step size"),
      MERGAN_SIZE("proxy.batch_size", proxy.batch_size, "proxy minibatch size"),
      MERGAN_REAL("proxy.min_accuracy", proxy_min_accuracy, "abort below this proxy test accuracy"),

      MERGAN_PATH("output.dir", output_dir, "run directory"),
      MERGAN_BOOL("output.grids", grids, "write a PGM grid at every evaluation"),
      MERGAN_SIZE("output.grid_columns", grid_columns, "latent vectors per grid row"),
      MERGAN_SIZE("output.grid_separator", grid_separator, "separator width in pixels"),
      MERGAN_BOOL("output.checkpoints", checkpoints, "write a checkpoint at the end of every task"),
  };
  return table;
}

#undef MERGAN_SIZE
#undef MERGAN_REAL
#undef MERGAN_BOOL
#undef MERGAN_LIST
#undef MERGAN_PATH

void resolve(std::filesystem::path& p, const std::filesystem::path& base) {
  if (!p.empty() && p.is_relative() && !base.empty()) p = base / p;
}

}  // namespace

std::string_view dataset_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Glyphs: return "glyphs";
    case DatasetKind::Gauss2D: return "gauss2d";
    case DatasetKind::Idx: return "idx";
  }
  return "?";
}

Architecture RunConfig::architecture() const {
  Architecture a = dataset == DatasetKind::Gauss2D ? Architecture::points(categories) : Architecture{};
  a.categories = categories;
  a.latent_dim = train.latent_dim;
  if (dataset != DatasetKind::Gauss2D) {
    a.height = glyph.height;
    a.width = glyph.width;
  }
  a.generator_hidden = generator_hidden;
  a.trunk_hidden = trunk_hidden;
  a.init_std = init_std;
  return a;
}

TaskSchedule RunConfig::schedule() const {
  const std::uint64_t seed = data_seed.value_or(train.seed);
  switch (dataset) {
    case DatasetKind::Glyphs: return make_glyph_tasks(seed, n_train, n_test, categories, glyph);
    case DatasetKind::Gauss2D:
      return make_gauss2d_tasks(seed, ring_gauss2d(categories, gauss_radius, gauss_sigma), n_train, n_test);
    case DatasetKind::Idx: {
      const std::pair<std::size_t, std::size_t> size{glyph.height, glyph.width};
      const LabeledSet tr = load_idx(idx.train_images, idx.train_labels, size);
      const LabeledSet te = load_idx(idx.test_images, idx.test_labels, size);
      return idx_tasks(tr, te, categories);
    }
  }
  throw std::logic_error("unreachable dataset kind");
}

void RunConfig::validate() const {
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (categories == 0 || categories > 10) throw ConfigError("data.categories must lie in [1, 10]");
  if (n_train == 0 || n_test < 2) throw ConfigError("data.n_train must be positive and data.n_test at least 2");
  if (eval.samples_per_category < 2) throw ConfigError("eval.samples_per_category must be at least 2");
  if (grid_columns == 0) throw ConfigError("output.grid_columns must be positive");
  if (dataset == DatasetKind::Idx) {
    for (const auto* p : {&idx.train_images, &idx.train_labels, &idx.test_images, &idx.test_labels}) {
      if (p->empty()) throw ConfigError("data.kind = idx needs all four data.idx.* paths");
    }
  }
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir, std::string_view source) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return key == k.name; });
    if (it == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' given twice");
    try {
      it->set(config, value);
    } catch (const std::exception& e) {
      throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
    }
  }
  for (auto* p : {&config.idx.train_images, &config.idx.train_labels, &config.idx.test_images,
                  &config.idx.test_labels, &config.output_dir}) {
    resolve(*p, base_dir);
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path(), path.string());
}

void apply_environment(RunConfig& config) {
  const char* env = std::getenv("MERGAN_SEED");
  if (env == nullptr || *env == '\0') return;
  try {
    config.train.seed = parse_number<std::uint64_t>(env);
  } catch (const std::exception&) {
    throw ConfigError(std::string("MERGAN_SEED is not an unsigned integer: '") + env + "'");
  }
}

std::vector<ConfigKey> config_keys() {
  const RunConfig defaults;
  std::vector<ConfigKey> out;
  for (const Key& k : keys()) out.push_back({k.name, k.get(defaults), k.help});
  return out;
}

std::string render_config(const RunConfig& config) {
  std::string out;
  for (const Key& k : keys()) {
    const std::string v = k.get(config);
    if (!v.empty()) out += std::string(k.name) + " = " + v + "\n";
  }
  return out;
}

}  // namespace mergan
