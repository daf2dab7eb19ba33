#pragma once

#include <map>
#include <string>

#include "sceneflow/synthgen.hpp"
#include "sceneflow/trainer.hpp"

namespace sceneflow {

/// Builds a SceneSpec from flat key=value pairs. Mover groups use indexed
/// keys ("mover.0.velocity=0.1 0 0"); unknown keys are rejected.
SceneSpec parse_scene_spec(const std::map<std::string, std::string>& kv);

/// Overlays key=value pairs onto a base TrainConfig; unknown keys are
/// rejected.
TrainConfig parse_train_config(const std::map<std::string, std::string>& kv,
                               TrainConfig base = {});

}  // namespace sceneflow
