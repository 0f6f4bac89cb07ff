// Parameter checkpoints as a JSON manifest of named arrays:
//   { "tensors": { "<name>": { "shape": [..], "data": [..] }, ... } }
// Doubles are written with shortest round-trip formatting, so a
// save/load cycle restores values bit for bit.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mbdrop/tensor.hpp"

namespace mbd {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);

// Restores tensors in the order they were saved. Throws IoError when
// the file is missing or malformed, naming the path (and the tensor,
// when one is inconsistent).
NamedTensors load_checkpoint(const std::string& path);

}  // namespace mbd
