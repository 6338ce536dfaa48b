#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cssr/scoring.hpp"
#include "cssr/tensor.hpp"

namespace cssr {

// Binary checkpoint: ASCII magic "CSSR1", one version byte, a length-prefixed
// config JSON string, then named tensor records
//   (u32 name_len, name bytes, u32 rank, u32 dims[rank], f64 values[...]),
// all integers and doubles little-endian. Score statistics ride along as
// records under the reserved "__stats/" prefix.

inline constexpr char kCheckpointMagic[5] = {'C', 'S', 'S', 'R', '1'};
inline constexpr uint8_t kCheckpointVersion = 1;

struct CheckpointContents {
    std::string config_json;
    std::vector<std::pair<std::string, Tensor>> tensors; // parameters, in file order
    std::optional<ScoreStats> stats;
};

void write_checkpoint(const std::string& path, const std::string& config_json,
                      const std::vector<std::pair<std::string, Tensor>>& tensors,
                      const ScoreStats* stats);

CheckpointContents read_checkpoint(const std::string& path);

} // namespace cssr
