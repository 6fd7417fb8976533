#pragma once

#include <filesystem>
#include <memory>

#include "eclipse/model.hpp"

namespace eclipse {

// Layout: "ECKP", u32 version, model config as JSON text, u64 parameter count, then per
// parameter its name, group name, and tensor record.
void save_checkpoint(const EclipseModel& model, const std::filesystem::path& path);

/// Rebuilds the model from the stored config and overwrites every parameter. Missing,
/// extra, reshaped, or regrouped parameters are a FormatError.
std::unique_ptr<EclipseModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace eclipse
