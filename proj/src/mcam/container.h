#pragma once

#include "model.h"

#include "json.hpp"

namespace mcam {

// MCAM container layout:
//   bytes 0..3   magic "MCAM"
//   bytes 4..7   u32 LE format version
//   bytes 8..15  u64 LE header byte length
//   header       UTF-8 JSON: metadata plus "tensors": [{name, shape, offset}, ...]
//   payload      raw little-endian f32, row-major, at the recorded offsets
//                (offsets are relative to the payload start)
inline constexpr uint32_t k_container_version = 1;

struct ContainerData {
    nlohmann::ordered_json meta;                   // header without the tensor index
    std::vector<std::pair<std::string, Mat>> tensors; // in index order

    const Mat *find(const std::string &name) const;
    const Mat &require(const std::string &name) const; // throws "tensor not found: <name>"
};

void write_container(const std::string &path, const nlohmann::ordered_json &meta,
                     const std::vector<std::pair<std::string, Mat>> &tensors);
ContainerData read_container(const std::string &path);

// model <-> container; tensor names are layer{i}.router and
// layer{i}.expert{j}.{up,gate,down}; per-expert widths come from the shapes,
// so ragged (pruned) layers round-trip
void save_model(const MoEModel &model, const std::string &path);
MoEModel load_model(const std::string &path);

} // namespace mcam
