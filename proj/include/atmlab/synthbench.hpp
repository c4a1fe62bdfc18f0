// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "atmlab/matrix.hpp"

namespace atmlab {

/// The three condition families the benchmark distinguishes. Each owns one
/// contiguous third of the condition vector and one third of the target.
enum class TaskKind : std::size_t { kSubject = 0, kStyle = 1, kStructure = 2 };

inline constexpr std::size_t kTaskCount = 3;

struct SynthSample {
    Matrix x;          // 1 x d condition, three contiguous blocks
    std::size_t task;  // TaskKind index
    Matrix target;     // 1 x d_out, only the task's block is signal
};

/// The frozen world of one benchmark: task cluster centers in condition
/// space and the per-task linear maps that define targets. Fixed per seed;
/// samples are drawn against it from separate named streams.
struct SynthSpec {
    std::size_t d = 0;
    std::size_t d_out = 0;
    double noise_sigma = 0.0;
    double cluster_sigma = 0.0;
    std::vector<Matrix> centers;    // kTaskCount of 1 x d
    std::vector<Matrix> task_maps;  // kTaskCount of (d/3) x (d_out/3)
};

/// Centers are drawn standard normal and pushed apart to at least six
/// cluster widths, so the gate's job is cleanly solvable and failures
/// point at the mechanism under test rather than the data.
SynthSpec make_synth_spec(std::uint64_t seed, std::size_t d, std::size_t d_out,
                          double noise_sigma, double cluster_sigma);

/// Draw `count` samples, tasks cycling 0,1,2 (balanced within one). The
/// stream name separates train from eval draws under one seed.
std::vector<SynthSample> sample_synth(const SynthSpec& spec,
                                      std::uint64_t seed,
                                      std::string_view stream,
                                      std::size_t count);

/// Desk-scale one-call generator: d=24, d_out=12, cluster width 0.5.
std::vector<SynthSample> generate(std::uint64_t seed, std::size_t count,
                                  double noise_sigma);

/// Coordinate range [lo, hi) of a task's block within a width-`dim` vector
/// split into kTaskCount contiguous blocks.
std::pair<std::size_t, std::size_t> task_block(std::size_t dim,
                                               std::size_t task);

/// Mean pairwise distance between class centroids over the mean distance
/// of points to their own centroid. Floored denominator (1e-12) and capped
/// result (1e12) keep degenerate clusters reportable.
double separation_ratio(std::span<const Matrix> embeddings,
                        std::span<const std::size_t> labels);

/// 1 - mean absolute difference; inputs must already be normalized to
/// [0,1], so the result is too.
double struc_sim(const Matrix& a, const Matrix& b);

/// One arm's worth of run metrics, the row unit of the ablation CSV.
struct MetricReport {
    double gate_accuracy = 0.0;
    double separation_ratio_raw = 0.0;
    double separation_ratio_retrieved = 0.0;
    double final_loss = 0.0;
    double struc_sim_value = 0.0;
};

}  // namespace atmlab
