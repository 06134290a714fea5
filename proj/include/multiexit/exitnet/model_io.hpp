#pragma once

#include <string>

#include "multiexit/exitnet/network.hpp"

namespace multiexit::exitnet {

// Model description file: backbone block list, exit placement and head
// layout, gate layout, plus a reference to the weight checkpoint. The
// checkpoint path is stored relative to the description file.
void save_model(const MultiExitNetwork& net, const std::string& model_path,
                const std::string& checkpoint_name);

MultiExitNetwork load_model(const std::string& model_path);

}  // namespace multiexit::exitnet
