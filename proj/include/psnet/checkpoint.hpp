#pragma once

#include <string>

#include "psnet/model.hpp"

namespace psnet {

// Writes `path` (a small text manifest: config, parameter names, shapes,
// byte offsets) and `path + ".bin"` (the flat little-endian float32 blob).
// Parent directories are created as needed.
void save_checkpoint(const PsnetModel& model, const std::string& path);

// Rebuilds the model described by the manifest at `path` and fills its
// parameters bit-exactly from the blob. Throws std::runtime_error on any
// structural disagreement between manifest, blob, and the rebuilt model.
PsnetModel load_checkpoint(const std::string& path);

}  // namespace psnet
