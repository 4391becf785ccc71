#pragma once

#include <json.hpp>

#include "core/net.hpp"

namespace faceqr {

nlohmann::json network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const nlohmann::json& j);

}  // namespace faceqr
