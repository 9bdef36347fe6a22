#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mergan/metrics.hpp"
#include "mergan/trainer.hpp"

namespace mergan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, little-endian throughout:
///   "MRGN" | version u32 | task u32 | global_iter u64 |
///   { name_len u32 | name | rank u32 | dims u32 x rank | f64 x numel }* |
///   crc32 u32 of every preceding byte.
struct Checkpoint {
  std::uint32_t task = 0;
  std::uint64_t global_iter = 0;
  std::map<std::string, Tensor, std::less<>> tensors;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// `source` only labels error messages.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---- training state <-> checkpoint -------------------------------------------
//
// Tensor names: "param/<name>", "adam.generator.{m,v}/<name>",
// "adam.critic.{m,v}/<name>", "probe/<category>", "proxy/<name>" and
// rank-0 or rank-1 "meta/<field>" entries for counters and the architecture.

Checkpoint make_checkpoint(const TrainConfig& config, const TrainingState& state,
                           const std::map<std::string, Tensor>& probe_references = {});

struct RestoredRun {
  Architecture architecture;
  Strategy strategy = Strategy::SFT;
  TrainingState state;
  std::map<std::string, Tensor> probe_references;
};
RestoredRun restore_run(const Checkpoint& ckpt);

/// Proxy classifiers reuse the container with "proxy/" tensors and meta.
Checkpoint make_proxy_checkpoint(const ProxyClassifier& proxy);
ProxyClassifier restore_proxy(const Checkpoint& ckpt);

}  // namespace mergan
