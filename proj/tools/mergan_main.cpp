#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "mergan/commands.hpp"

namespace {

std::string config_reference() {
  std::string out = "Config keys (key = default):\n";
  for (const mergan::ConfigKey& k : mergan::config_keys()) {
    out += "  " + k.name + " = " + (k.default_value.empty() ? "<unset>" : k.default_value) + "\n      " + k.help + "\n";
  }
  return out + "MERGAN_SEED in the environment overrides `seed`.\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential conditional GAN training with memory replay"};
  app.require_subcommand(1);

  std::string config_path, resume, checkpoint, out = "samples.pgm", csv;
  auto* train = app.add_subcommand("train", "train a strategy over the task sequence");
  train->add_option("config", config_path, "run config (key = value lines)")->required()->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "continue from a task-boundary checkpoint")->check(CLI::ExistingFile);
  train->footer(config_reference());

  std::vector<int> categories;
  std::size_t n = 8, separator = 1;
  std::uint64_t z_seed = 0;
  auto* sample = app.add_subcommand("sample", "write a PGM grid: rows are categories, columns latent vectors");
  sample->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  sample->add_option("-c,--categories", categories, "1-based categories (default: all)")->delimiter(',');
  sample->add_option("-n", n, "latent vectors per row")->capture_default_str();
  sample->add_option("--z-seed", z_seed, "seed of the shared latent vectors")->capture_default_str();
  sample->add_option("-o,--out", out, "output PGM")->capture_default_str();
  sample->add_option("--separator", separator, "separator width in pixels")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "accuracy, reverse accuracy and FD of a checkpoint");
  eval->add_option("checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("config", config_path, "run config naming the dataset")->required()->check(CLI::ExistingFile);
  eval->add_option("--csv", csv, "metrics CSV to append to (default: <output.dir>/metrics.csv)");

  mergan::SuiteOptions suite;
  std::string fault;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every op and loss");
  grad->add_option("--instances", suite.instances, "random instances per check")->capture_default_str();
  grad->add_option("--seed", suite.seed)->capture_default_str();
  grad->add_option("--inject-fault", fault, "corrupt the adjoint of this op (e.g. matmul)");
  grad->add_option("--fault-factor", suite.fault_factor)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? mergan::kExitOk : mergan::kExitError;
  }

  if (*train) {
    mergan::TrainOptions options;
    if (!resume.empty()) options.resume = resume;
    return mergan::cmd_train(config_path, options);
  }
  if (*sample) return mergan::cmd_sample(checkpoint, categories, n, z_seed, out, separator);
  if (*eval) {
    return mergan::cmd_eval(checkpoint, config_path, csv.empty() ? std::nullopt : std::optional<std::string>(csv));
  }
  if (!fault.empty()) {
    suite.fault = mergan::parse_op(fault);
    if (!suite.fault) {
      std::fprintf(stderr, "error: unknown op '%s'\n", fault.c_str());
      return mergan::kExitError;
    }
  }
  return mergan::cmd_gradcheck(suite);
}
