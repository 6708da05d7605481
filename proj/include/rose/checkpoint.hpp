#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "rose/model.hpp"

namespace rose::checkpoint {

// Persisted model snapshot: a JSON manifest next to a flat little-endian
// float64 binary holding every group's data in manifest order. Round-trips
// are bit-exact.
struct CheckpointData {
    nlohmann::json config;  // run configuration snapshot
    std::uint64_t step = 0;
    model::ParamSet params;
};

// manifest_path names the JSON file; the binary sidecar lives next to it
// with the same stem and a .bin extension.
void save_checkpoint(const std::string& manifest_path, const CheckpointData& data);

CheckpointData load_checkpoint(const std::string& manifest_path);

}  // namespace rose::checkpoint
