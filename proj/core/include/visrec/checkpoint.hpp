#pragma once

#include <string>
#include <vector>

#include "visrec/network.hpp"

namespace visrec {

// Checkpoint file layout:
//   u32 metadata length, metadata JSON (UTF-8),
//   magic "NNW1", u64 float count,
//   little-endian float32 values: trainable parameters in declaration order
//   (body layers then head), then batch-norm running statistics,
//   u64 CRC-64 over everything before it.
struct Checkpoint {
  ModelSpec spec;
  std::vector<float> params;
  std::vector<float> running;
  std::string provenance_json;  // free-form JSON object
};

void save_checkpoint(const Network<float>& net,
                     const std::string& provenance_json,
                     const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

// Builds a network carrying the checkpoint's weights.
Network<float> network_from_checkpoint(const Checkpoint& ckpt);

}  // namespace visrec
