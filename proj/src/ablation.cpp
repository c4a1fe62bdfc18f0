// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/ablation.hpp"

#include <string>

#include "atmlab/errors.hpp"

namespace atmlab {

std::string_view arm_name(AblationArm arm) {
    switch (arm) {
        case AblationArm::kFull: return "full";
        case AblationArm::kNoMemory: return "no_memory";
        case AblationArm::kNoGate: return "no_gate";
        case AblationArm::kNoQueries: return "no_queries";
        case AblationArm::kNoDetails: return "no_details";
    }
    throw ContractError("arm_name: unknown arm");
}

AblationArm parse_arm(std::string_view name) {
    for (const AblationArm arm : kAllArms)
        if (arm_name(arm) == name) return arm;
    std::string valid;
    for (const AblationArm arm : kAllArms) {
        if (!valid.empty()) valid += ", ";
        valid += arm_name(arm);
    }
    throw ConfigError("unknown ablation arm '" + std::string(name) +
                      "'; valid arms: " + valid);
}

MetricReport run_ablation(const TrainConfig& config, AblationArm arm) {
    TrainState state = init_state(config, arm);
    run_all_stages(state);
    const std::vector<SynthSample> eval = eval_samples(state);
    const auto [raw, retrieved] = separation_ratios(state, eval);
    return MetricReport{
        .gate_accuracy = gate_accuracy(state, eval),
        .separation_ratio_raw = raw,
        .separation_ratio_retrieved = retrieved,
        .final_loss = final_loss(state),
        .struc_sim_value = structure_similarity(state, eval),
    };
}

}  // namespace atmlab
