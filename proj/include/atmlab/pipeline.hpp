// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "atmlab/atm.hpp"
#include "atmlab/conditioning.hpp"
#include "atmlab/matrix.hpp"
#include "atmlab/synthbench.hpp"

namespace atmlab {

struct Dims {
    std::size_t l = 16;      // query rows
    std::size_t m = 32;      // memory slots per item
    std::size_t c = 32;      // shared feature width
    std::size_t n = 3;       // memory items / task classes
    std::size_t d = 24;      // raw condition dimension
    std::size_t v = 4;       // detail tokens per condition
    std::size_t h = 128;     // gate hidden width
    std::size_t h_dec = 64;  // decoder hidden width
    std::size_t d_out = 12;  // target dimension
};

/// Training variants for the ablation study. kFull is the standard run;
/// every other arm removes exactly one mechanism and leaves the rest of
/// the schedule (and all seeded draws) untouched.
enum class AblationArm {
    kFull,
    kNoMemory,   // decoder consumes pooled queries, retrieval skipped
    kNoGate,     // routing replaced by a seeded uniform-random index
    kNoQueries,  // q0 frozen at its initialization
    kNoDetails,  // stage 3 runs without detail tokens
};

struct TrainConfig {
    std::size_t stage1_steps = 300;
    std::size_t stage2_steps = 500;
    std::size_t stage3_steps = 500;
    double lr_early = 1e-3;
    double lr_late = 3e-4;
    std::size_t batch_size = 32;
    double alpha = 0.1;
    std::uint64_t seed = 42;
    Dims dims;
    double noise_sigma = 0.05;
    double cluster_sigma = 0.5;
    std::size_t train_samples = 3072;
    std::size_t eval_samples = 384;

    /// Throws ConfigError on an unusable combination. Step counts of zero
    /// are legal (a stage may be skipped); sizes must be positive.
    void validate() const;
};

/// Two-layer relu MLP from the mean-pooled assembled condition (1 x c)
/// to the target vector (1 x d_out). Stands in for the generator.
struct DecoderHead {
    Matrix w1;  // c x h_dec
    Matrix b1;  // 1 x h_dec
    Matrix w2;  // h_dec x d_out
    Matrix b2;  // 1 x d_out
};

Matrix decode(const DecoderHead& dec, const Matrix& pooled);

/// Everything one run owns. Stages advance `stage` 1 -> 2 -> 3; finishing
/// stage 3 freezes the bank, which is what marks the state inferable.
struct TrainState {
    TrainConfig config;
    AblationArm arm = AblationArm::kFull;

    SynthSpec world;
    std::vector<SynthSample> train_data;

    FrozenEncoder encoder;
    DetailBranch details;
    SemanticQueryBank qbank;
    MemoryBank bank;
    GateClassifier gate;
    DecoderHead decoder;

    int stage = 1;
    std::uint64_t global_step = 0;
    std::vector<double> stage1_losses = {};
    std::vector<double> stage2_losses = {};
    std::vector<double> stage3_losses = {};
    // Optimizer telemetry: the learning rate each stage actually applied.
    double stage2_lr_used = 0.0;
    double stage3_lr_used = 0.0;
};

/// Builds the world, data, and freshly initialized parameters. Every draw
/// comes from a named sub-stream of config.seed.
TrainState init_state(const TrainConfig& config,
                      AblationArm arm = AblationArm::kFull);

/// Stage 1: gate pretraining. Cross-entropy over task labels on pooled
/// encoded queries; only the gate's four matrices move.
void stage1_train(TrainState& state);

/// Stage 2: queries, memory, and decoder with lr_early. Routing is
/// teacher-forced, the EMA write runs once per step after the optimizer,
/// detail tokens stay out.
void stage2_train(TrainState& state);

/// Stage 3: as stage 2 with detail tokens appended and lr_late. Freezes
/// the bank on completion.
void stage3_train(TrainState& state);

void run_all_stages(TrainState& state);

/// Single-condition inference. Routing follows the gate unless a label is
/// given; the arm's training-time input layout is reproduced exactly.
/// Requires a frozen bank (training complete).
Matrix infer(const TrainState& state, const Matrix& x,
             std::optional<std::size_t> task_label = std::nullopt);

/// Multi-condition inference: one retrieval per (condition, task) pair,
/// retrieved rows concatenated in order, then every condition's detail
/// tokens appended in the same order, pooled, decoded.
Matrix infer_composed(
    const TrainState& state,
    std::span<const std::pair<Matrix, std::size_t>> conditions);

/// Held-out draw from the run's world ("data.eval" stream).
std::vector<SynthSample> eval_samples(const TrainState& state);

/// Fraction of samples routed to their true task under the arm's routing
/// policy (gate argmax normally, the seeded random policy for kNoGate).
double gate_accuracy(const TrainState& state,
                     std::span<const SynthSample> samples);

/// Cluster separation of per-sample pooled embeddings, before and after
/// retrieval: (raw, retrieved).
std::pair<double, double> separation_ratios(
    const TrainState& state, std::span<const SynthSample> samples);

/// Trailing-50-step mean of the last stage that ran.
double final_loss(const TrainState& state);

/// Structure-task block similarity: predictions and targets restricted to
/// the structure block, jointly normalized to [0,1] by the target range.
double structure_similarity(const TrainState& state,
                            std::span<const SynthSample> samples);

/// Mean per-block squared errors for subject+style composition against
/// the mismatched single-condition baseline.
struct CompositionEval {
    double composed_subject_err = 0.0;
    double composed_style_err = 0.0;
    double mismatched_subject_err = 0.0;
    double mismatched_style_err = 0.0;
};
CompositionEval composition_eval(const TrainState& state,
                                 std::span<const SynthSample> samples,
                                 std::size_t max_pairs = 32);

}  // namespace atmlab
