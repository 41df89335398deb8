#pragma once

#include <filesystem>
#include <vector>

#include "resqos/model.hpp"

namespace resqos {

// Model weights plus the config and vocabulary sizes needed to validate a
// load against the dataset it will serve.
struct Checkpoint {
  int schema_version = 1;
  PlresConfig config;
  VocabSizes vocab_sizes;
  std::vector<NamedTensor> params;
};

Checkpoint make_checkpoint(const PlresModel& model);

// JSON file; parameter payloads are base64 little-endian 64-bit floats.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds the model and installs the stored parameters; shape or name
// mismatches are rejected.
PlresModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace resqos
