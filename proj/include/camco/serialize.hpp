#pragma once

#include "camco/design.hpp"
#include "camco/formation.hpp"
#include "camco/optimize.hpp"
#include "camco/scenario.hpp"
#include "camco/scene.hpp"
#include "json.hpp"

namespace camco {

using Json = nlohmann::ordered_json;

Json to_json(const DynamicParams& p);
Json to_json(const CameraDesign& d);
Json to_json(const ScenarioConfig& s);
Json to_json(const JointConfig& c);
Json to_json(const World& w);

/// Missing keys keep their defaults; type errors raise ConfigError.
ScenarioConfig scenario_from_json(const Json& j);
JointConfig joint_config_from_json(const Json& j);
World world_from_json(const Json& j);
CameraDesign design_from_json(const Json& j, const SensorCatalogue& catalogue);

}  // namespace camco
