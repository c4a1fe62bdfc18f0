// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string_view>

#include "atmlab/pipeline.hpp"
#include "atmlab/synthbench.hpp"

namespace atmlab {

inline constexpr std::array<AblationArm, 5> kAllArms = {
    AblationArm::kFull,       AblationArm::kNoMemory,
    AblationArm::kNoGate,     AblationArm::kNoQueries,
    AblationArm::kNoDetails,
};

std::string_view arm_name(AblationArm arm);

/// Inverse of arm_name. Throws ConfigError listing the valid names.
AblationArm parse_arm(std::string_view name);

/// One full training run of the arm followed by held-out evaluation.
MetricReport run_ablation(const TrainConfig& config, AblationArm arm);

}  // namespace atmlab
