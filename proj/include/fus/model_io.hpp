#pragma once

#include <memory>
#include <string>

#include "fus/model.hpp"

namespace fus {

/// Binary model checkpoint: magic, version, arch id, input dims, class
/// count, then each parameter block as float32 little-endian. Rebuilds the
/// architecture from the registry on load, then overwrites the parameters.
void save_model(Model& model, const std::string& path);
std::unique_ptr<Model> load_model(const std::string& path);

}  // namespace fus
