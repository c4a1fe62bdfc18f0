// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "atmlab/pipeline.hpp"

namespace atmlab {

/// Parses flat `key = value` text into a copy of `base`. Lines may carry
/// `#` comments; keys use dots for the dimension group (dims.l). Unknown
/// keys and bad values throw ConfigError naming the line and key. Later
/// assignments win.
TrainConfig parse_config(std::string_view text,
                         const TrainConfig& base = TrainConfig{});

/// Applies one `key=value` assignment in place; errors name the
/// assignment instead of a line.
void apply_override(TrainConfig& cfg, std::string_view assignment);

/// Canonical text form: every key once, fixed order, shortest float
/// representation that parses back bit-identically.
std::string serialize_config(const TrainConfig& cfg);

/// "desk" is the default configuration; "paper-scale" raises it to the
/// published operating point (l=256, m=1024, stages 3000/3000/5000,
/// lr 1e-4 -> 3e-5, batch 256). Unknown name throws ConfigError.
TrainConfig preset_config(std::string_view name);

}  // namespace atmlab
