#pragma once

#include <string>
#include <vector>

#include "foldcast/model.hpp"

namespace foldcast {

/// Checkpoint container: model configuration, the amplitude-ranked periods
/// the model was built with, and the named weight arrays (always float32 on
/// disk). The byte layout is documented in the README.
struct CheckpointHeader {
  ModelConfig config;
  std::vector<int> periods;
};

template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& model);

/// Reads only the header (config + periods).
CheckpointHeader peek_checkpoint(const std::string& path);

/// Rebuilds a model from a checkpoint. Throws DataError on a bad magic
/// string, version, or array mismatch.
template <typename T>
Model<T> load_checkpoint(const std::string& path);

}  // namespace foldcast
