// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atmlab/ablation.hpp"
#include "atmlab/pipeline.hpp"
#include "atmlab/synthbench.hpp"

namespace atmlab {

inline constexpr std::string_view kArtifactVersion = "atmlab 1.0.0";

/// Everything one training run reports. The config echo (plus the arm)
/// reproduces the run bit-exactly when fed back in.
struct RunReport {
    TrainConfig config;
    AblationArm arm = AblationArm::kFull;
    std::vector<double> stage1_losses;
    std::vector<double> stage2_losses;
    std::vector<double> stage3_losses;
    MetricReport metrics;
    double stage1_seconds = 0.0;
    double stage2_seconds = 0.0;
    double stage3_seconds = 0.0;
};

/// Text form: version line, config echo, per-stage loss curves, metrics,
/// then wall-clock figures as the final section.
std::string render_report(const RunReport& report);

/// The rendered report with the trailing [walltime] section removed;
/// this is the deterministic part two identical runs must agree on.
std::string report_body(std::string_view rendered);

struct AblationRow {
    AblationArm arm;
    std::uint64_t seed;
    MetricReport metrics;
};

std::string render_ablation_csv(std::span<const AblationRow> rows);

/// Binary snapshot of a TrainState (versioned header, embedded config
/// text, named parameter matrices). Written atomically.
void save_checkpoint(const TrainState& state, const std::string& path);

/// Rebuilds the state: config and arm come from the header, world and
/// training data are regenerated from the seed, parameters are overwritten
/// from the stored matrices. Throws IoError with header diagnostics.
TrainState load_checkpoint(const std::string& path);

/// One CSV per memory item, "memory_item_<i>.csv" under dir; values use
/// the shortest representation that parses back bit-identically.
void export_memory_csv(const MemoryBank& bank, const std::string& dir);

/// Reads the files export_memory_csv wrote. item_count must match the
/// exported n. Returns the items in index order.
std::vector<Matrix> import_memory_csv(const std::string& dir,
                                      std::size_t item_count);

/// Rows of `points` projected onto their top-2 principal axes (N x 2).
/// Axes are eigenvectors of the sample covariance (cyclic Jacobi); each is
/// sign-fixed so its largest-magnitude loading is positive.
Matrix pca_project_2d(const Matrix& points);

/// Scatter data for a trained run: held-out pooled queries before and
/// after retrieval plus every memory row, jointly projected to 2-D.
/// Columns: x, y, label (task or item index), kind (raw|retrieved|memory).
std::string render_projection_csv(const TrainState& state);

/// Write-to-temp-then-rename; directories are not created. IoError names
/// the path on any failure.
void write_text_atomic(const std::string& path, std::string_view text);

std::string read_text(const std::string& path);

}  // namespace atmlab
