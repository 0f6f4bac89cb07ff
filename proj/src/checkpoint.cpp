#include "mbdrop/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "mbdrop/errors.hpp"

namespace mbd {

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  nlohmann::ordered_json root;
  // Start from an explicit object: operator[] alone yields JSON null, which
  // would make an empty checkpoint unreadable by load_checkpoint.
  root["tensors"] = nlohmann::ordered_json::object();
  auto& out = root["tensors"];
  for (const auto& [name, tensor] : tensors) {
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      if (!std::isfinite(tensor[i])) {
        throw IoError("save_checkpoint: tensor '" + name +
                      "' holds a non-finite value; refusing to write " + path);
      }
    }
    nlohmann::ordered_json entry;
    entry["shape"] = tensor.shape();
    entry["data"] = tensor.values();
    out[name] = std::move(entry);
  }
  std::ofstream file(path);
  if (!file) {
    throw IoError("save_checkpoint: cannot open " + path + " for writing");
  }
  file << root.dump(1) << "\n";
  if (!file) {
    throw IoError("save_checkpoint: write to " + path + " failed");
  }
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream file(path);
  if (!file) {
    throw IoError("load_checkpoint: cannot open " + path);
  }
  nlohmann::ordered_json root;
  try {
    file >> root;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_checkpoint: " + path + " is not valid JSON: " +
                  e.what());
  }
  if (!root.is_object() || !root.contains("tensors") ||
      !root["tensors"].is_object()) {
    throw IoError("load_checkpoint: " + path + " lacks a 'tensors' object");
  }
  NamedTensors tensors;
  for (const auto& [name, entry] : root["tensors"].items()) {
    if (!entry.is_object() || !entry.contains("shape") ||
        !entry.contains("data")) {
      throw IoError("load_checkpoint: tensor '" + name + "' in " + path +
                    " lacks shape or data");
    }
    std::vector<std::size_t> shape;
    std::vector<double> data;
    try {
      shape = entry["shape"].get<std::vector<std::size_t>>();
      data = entry["data"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("load_checkpoint: tensor '" + name + "' in " + path +
                    " is malformed: " + e.what());
    }
    try {
      tensors.emplace_back(name, Tensor(std::move(shape), std::move(data)));
    } catch (const std::invalid_argument& e) {
      throw IoError("load_checkpoint: tensor '" + name + "' in " + path +
                    ": " + e.what());
    }
  }
  return tensors;
}

}  // namespace mbd
