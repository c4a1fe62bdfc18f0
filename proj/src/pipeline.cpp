// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "atmlab/adam.hpp"
#include "atmlab/errors.hpp"
#include "atmlab/rng.hpp"
#include "atmlab/tape.hpp"

namespace atmlab {
namespace {

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                       double stddev) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = stddev * rng.next_gaussian();
    return m;
}

void require_positive(std::size_t value, const char* key) {
    if (value == 0)
        throw ConfigError(std::string(key) + " must be positive");
}

// One optimizer slot: the parameter matrix it owns plus its Adam moments.
// Node ids are re-bound every step because each step records a new tape.
struct Trainable {
    Matrix* param;
    AdamState adam;

    explicit Trainable(Matrix* p) : param(p), adam(p->rows(), p->cols()) {}
};

std::vector<std::size_t> draw_batch(Rng& rng, std::size_t pool,
                                    std::size_t batch) {
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = rng.next_below(static_cast<std::uint32_t>(pool));
    return idx;
}

Matrix stack_rows(const std::vector<Matrix>& rows) {
    return concat_rows(rows);
}

[[noreturn]] void rethrow_with_step(const char* stage, std::size_t step,
                                    const NumericError& e) {
    throw NumericError(std::string(stage) + " step " + std::to_string(step) +
                       ": " + e.what());
}

// Thrown without a stage prefix; the stage loop's catch adds it.
void check_loss_finite(double loss) {
    if (!std::isfinite(loss)) throw NumericError("loss is not finite");
}

Matrix block_cols(const Matrix& row, std::size_t lo, std::size_t hi) {
    Matrix out(1, hi - lo);
    for (std::size_t j = lo; j < hi; ++j) out.at(0, j - lo) = row.at(0, j);
    return out;
}

// Shared body of stages 2 and 3; `with_details` is the only structural
// difference, lr the only hyperparameter one.
void run_regression_stage(TrainState& state, std::size_t steps, double lr,
                          bool with_details, const char* stage_name,
                          std::string_view batch_stream,
                          std::vector<double>& losses) {
    const Dims& dims = state.config.dims;
    Rng batch_rng = Rng::stream(state.config.seed, batch_stream);
    Rng routing_rng = Rng::stream(state.config.seed, "ablation.routing");

    const bool with_memory = state.arm != AblationArm::kNoMemory;
    const bool train_queries = state.arm != AblationArm::kNoQueries;

    std::vector<Trainable> trainables;
    if (train_queries) trainables.emplace_back(&state.qbank.q0);
    if (with_memory)
        for (std::size_t t = 0; t < dims.n; ++t)
            trainables.emplace_back(&state.bank.items[t]);
    trainables.emplace_back(&state.decoder.w1);
    trainables.emplace_back(&state.decoder.b1);
    trainables.emplace_back(&state.decoder.w2);
    trainables.emplace_back(&state.decoder.b2);

    for (std::size_t step = 0; step < steps; ++step) {
        try {
            const auto batch = draw_batch(batch_rng, state.train_data.size(),
                                          state.config.batch_size);

            Tape tape;
            std::vector<NodeId> bound;
            bound.reserve(trainables.size());
            const NodeId q0 = train_queries
                                  ? tape.leaf(state.qbank.q0)
                                  : tape.constant(state.qbank.q0);
            if (train_queries) bound.push_back(q0);
            std::vector<NodeId> item_nodes;
            if (with_memory) {
                for (std::size_t t = 0; t < dims.n; ++t) {
                    item_nodes.push_back(tape.leaf(state.bank.items[t]));
                    bound.push_back(item_nodes.back());
                }
            }
            const NodeId w1 = tape.leaf(state.decoder.w1);
            const NodeId b1 = tape.leaf(state.decoder.b1);
            const NodeId w2 = tape.leaf(state.decoder.w2);
            const NodeId b2 = tape.leaf(state.decoder.b2);
            bound.insert(bound.end(), {w1, b1, w2, b2});

            // Per task: the encoded-query and weight nodes feeding the EMA
            // write, which runs after the optimizer on pre-step values.
            std::vector<std::vector<NodeId>> ema_q(dims.n), ema_w(dims.n);
            std::vector<NodeId> pooled_rows;
            std::vector<Matrix> target_rows;
            pooled_rows.reserve(batch.size());
            target_rows.reserve(batch.size());

            for (const std::size_t sample_idx : batch) {
                const SynthSample& sample = state.train_data[sample_idx];
                std::size_t route = sample.task;
                if (state.arm == AblationArm::kNoGate)
                    route = routing_rng.next_below(
                        static_cast<std::uint32_t>(dims.n));

                const NodeId encoded =
                    encode_nodes(tape, state.encoder, q0, sample.x);
                NodeId rep = encoded;
                if (with_memory) {
                    const RetrieveNodes rn =
                        retrieve_nodes(tape, encoded, item_nodes[route],
                                       dims.c);
                    rep = rn.retrieved;
                    ema_q[route].push_back(encoded);
                    ema_w[route].push_back(rn.weights);
                }
                if (with_details) {
                    const NodeId det = tape.constant(
                        detail_tokens(state.details, sample.x));
                    const NodeId parts[] = {rep, det};
                    rep = tape.concat_rows(parts);
                }
                pooled_rows.push_back(tape.mean_pool_rows(rep));
                target_rows.push_back(sample.target);
            }

            const NodeId pooled_batch = tape.concat_rows(pooled_rows);
            const NodeId hidden =
                tape.relu(tape.add_rowvec(tape.matmul(pooled_batch, w1), b1));
            const NodeId preds =
                tape.add_rowvec(tape.matmul(hidden, w2), b2);
            const NodeId loss =
                tape.mse(preds, tape.constant(stack_rows(target_rows)));

            const double loss_value = tape.value(loss).at(0, 0);
            check_loss_finite(loss_value);
            losses.push_back(loss_value);

            tape.backward(loss);
            for (std::size_t i = 0; i < trainables.size(); ++i)
                adam_step(trainables[i].adam, *trainables[i].param,
                          tape.grad(bound[i]), lr);

            if (with_memory) {
                for (std::size_t t = 0; t < dims.n; ++t) {
                    if (ema_q[t].empty()) continue;
                    std::vector<Matrix> qs, ws;
                    qs.reserve(ema_q[t].size());
                    ws.reserve(ema_w[t].size());
                    for (const NodeId id : ema_q[t])
                        qs.push_back(tape.value(id));
                    for (const NodeId id : ema_w[t])
                        ws.push_back(tape.value(id));
                    update(state.bank, t, stack_rows(qs), stack_rows(ws));
                }
            }
            state.global_step += 1;
        } catch (const NumericError& e) {
            rethrow_with_step(stage_name, step, e);
        }
    }
}

// Route one eval sample under the arm's policy. kNoGate draws from the
// caller's eval stream so a whole evaluation shares one random sequence.
std::size_t eval_route(const TrainState& state, const Matrix& encoded,
                       Rng& nogate_rng) {
    if (state.arm == AblationArm::kNoGate)
        return nogate_rng.next_below(
            static_cast<std::uint32_t>(state.config.dims.n));
    return gate_predict(state.gate, encoded).task;
}

}  // namespace

void TrainConfig::validate() const {
    require_positive(batch_size, "batch_size");
    require_positive(train_samples, "train_samples");
    require_positive(dims.l, "dims.l");
    require_positive(dims.m, "dims.m");
    require_positive(dims.c, "dims.c");
    require_positive(dims.d, "dims.d");
    require_positive(dims.v, "dims.v");
    require_positive(dims.h, "dims.h");
    require_positive(dims.h_dec, "dims.h_dec");
    require_positive(dims.d_out, "dims.d_out");
    if (dims.n < kTaskCount)
        throw ConfigError("dims.n must be at least " +
                          std::to_string(kTaskCount) + ", got " +
                          std::to_string(dims.n));
    if (dims.d % kTaskCount != 0)
        throw ConfigError("dims.d must be a multiple of " +
                          std::to_string(kTaskCount));
    if (dims.d_out % kTaskCount != 0)
        throw ConfigError("dims.d_out must be a multiple of " +
                          std::to_string(kTaskCount));
    if (dims.v > dims.d)
        throw ConfigError("dims.v must not exceed dims.d");
    if (lr_early <= 0.0 || lr_late <= 0.0)
        throw ConfigError("learning rates must be positive");
    if (lr_late > lr_early)
        throw ConfigError("lr_late must not exceed lr_early");
    if (alpha < 0.0 || alpha > 1.0)
        throw ConfigError("alpha must be in [0,1]");
    if (noise_sigma < 0.0 || cluster_sigma < 0.0)
        throw ConfigError("sigmas must be nonnegative");
    if (eval_samples < 2 * kTaskCount)
        throw ConfigError("eval_samples must be at least " +
                          std::to_string(2 * kTaskCount));
}

Matrix decode(const DecoderHead& dec, const Matrix& pooled) {
    const Matrix hidden = relu(add_rowvec(matmul(pooled, dec.w1), dec.b1));
    return add_rowvec(matmul(hidden, dec.w2), dec.b2);
}

TrainState init_state(const TrainConfig& config, AblationArm arm) {
    config.validate();
    const Dims& dims = config.dims;

    TrainState state{
        .config = config,
        .arm = arm,
        .world = make_synth_spec(config.seed, dims.d, dims.d_out,
                                 config.noise_sigma, config.cluster_sigma),
        .train_data = {},
        .encoder = {Matrix(1, 1), Matrix(1, 1), Matrix(1, 1)},
        .details = {Matrix(1, 1), 1},
        .qbank = {Matrix(1, 1)},
        .bank = {},
        .gate = {Matrix(1, 1), Matrix(1, 1), Matrix(1, 1), Matrix(1, 1)},
        .decoder = {Matrix(1, 1), Matrix(1, 1), Matrix(1, 1), Matrix(1, 1)},
    };
    state.train_data = sample_synth(state.world, config.seed, "data.train",
                                    config.train_samples);

    Rng enc_rng = Rng::stream(config.seed, "init.encoder");
    state.encoder = make_encoder(dims.d, dims.c, enc_rng);
    Rng det_rng = Rng::stream(config.seed, "init.detail");
    state.details = make_detail_branch(dims.d, dims.c, dims.v, det_rng);
    Rng q0_rng = Rng::stream(config.seed, "init.q0");
    state.qbank = make_query_bank(dims.l, dims.c, q0_rng);
    Rng mem_rng = Rng::stream(config.seed, "init.memory");
    state.bank = make_memory_bank(dims.n, dims.m, dims.c, config.alpha,
                                  mem_rng);
    Rng gate_rng = Rng::stream(config.seed, "init.gate");
    state.gate = make_gate(dims.c, dims.h, dims.n, gate_rng);

    Rng dec_rng = Rng::stream(config.seed, "init.decoder");
    state.decoder.w1 = gaussian_matrix(dec_rng, dims.c, dims.h_dec,
                                       1.0 / std::sqrt(double(dims.c)));
    state.decoder.b1 = Matrix(1, dims.h_dec);
    state.decoder.w2 = gaussian_matrix(dec_rng, dims.h_dec, dims.d_out,
                                       1.0 / std::sqrt(double(dims.h_dec)));
    state.decoder.b2 = Matrix(1, dims.d_out);
    return state;
}

void stage1_train(TrainState& state) {
    if (state.stage != 1)
        throw StateError("stage1_train: state is at stage " +
                         std::to_string(state.stage));

    // q0 is fixed during stage 1, so every sample's pooled encoding is a
    // constant of the whole stage; compute them once.
    std::vector<Matrix> pooled_all;
    pooled_all.reserve(state.train_data.size());
    for (const SynthSample& s : state.train_data)
        pooled_all.push_back(
            mean_pool_rows(encode(state.encoder, state.qbank, s.x)));

    std::vector<Trainable> trainables;
    trainables.emplace_back(&state.gate.w1);
    trainables.emplace_back(&state.gate.b1);
    trainables.emplace_back(&state.gate.w2);
    trainables.emplace_back(&state.gate.b2);

    Rng batch_rng = Rng::stream(state.config.seed, "batch.stage1");
    for (std::size_t step = 0; step < state.config.stage1_steps; ++step) {
        try {
            const auto batch = draw_batch(batch_rng, pooled_all.size(),
                                          state.config.batch_size);
            std::vector<Matrix> rows;
            std::vector<std::size_t> labels;
            rows.reserve(batch.size());
            labels.reserve(batch.size());
            for (const std::size_t i : batch) {
                rows.push_back(pooled_all[i]);
                labels.push_back(state.train_data[i].task);
            }

            Tape tape;
            const NodeId w1 = tape.leaf(state.gate.w1);
            const NodeId b1 = tape.leaf(state.gate.b1);
            const NodeId w2 = tape.leaf(state.gate.w2);
            const NodeId b2 = tape.leaf(state.gate.b2);
            const NodeId logits = gate_logits(
                tape, tape.constant(stack_rows(rows)), w1, b1, w2, b2);
            const NodeId loss = tape.cross_entropy(logits, labels);

            const double loss_value = tape.value(loss).at(0, 0);
            check_loss_finite(loss_value);
            state.stage1_losses.push_back(loss_value);

            tape.backward(loss);
            const NodeId bound[] = {w1, b1, w2, b2};
            for (std::size_t i = 0; i < trainables.size(); ++i)
                adam_step(trainables[i].adam, *trainables[i].param,
                          tape.grad(bound[i]), state.config.lr_early);
            state.global_step += 1;
        } catch (const NumericError& e) {
            rethrow_with_step("stage1", step, e);
        }
    }
    state.stage = 2;
}

void stage2_train(TrainState& state) {
    if (state.stage != 2)
        throw StateError("stage2_train: state is at stage " +
                         std::to_string(state.stage));
    state.stage2_lr_used = state.config.lr_early;
    run_regression_stage(state, state.config.stage2_steps,
                         state.config.lr_early, /*with_details=*/false,
                         "stage2", "batch.stage2", state.stage2_losses);
    state.stage = 3;
}

void stage3_train(TrainState& state) {
    if (state.stage != 3)
        throw StateError("stage3_train: state is at stage " +
                         std::to_string(state.stage));
    if (state.bank.frozen)
        throw StateError("stage3_train: training already completed");
    state.stage3_lr_used = state.config.lr_late;
    const bool with_details = state.arm != AblationArm::kNoDetails;
    run_regression_stage(state, state.config.stage3_steps,
                         state.config.lr_late, with_details, "stage3",
                         "batch.stage3", state.stage3_losses);
    state.bank.frozen = true;
}

void run_all_stages(TrainState& state) {
    stage1_train(state);
    stage2_train(state);
    stage3_train(state);
}

Matrix infer(const TrainState& state, const Matrix& x,
             std::optional<std::size_t> task_label) {
    if (!state.bank.frozen)
        throw StateError("infer: training has not completed");
    const Matrix encoded = encode(state.encoder, state.qbank, x);
    std::size_t route;
    if (task_label) {
        route = *task_label;
    } else if (state.arm == AblationArm::kNoGate) {
        Rng rng = Rng::stream(state.config.seed, "ablation.routing.eval");
        route = rng.next_below(static_cast<std::uint32_t>(state.config.dims.n));
    } else {
        route = gate_predict(state.gate, encoded).task;
    }

    Matrix rep = state.arm == AblationArm::kNoMemory
                     ? encoded
                     : retrieve(state.bank, route, encoded).retrieved;
    std::optional<Matrix> det;
    if (state.arm != AblationArm::kNoDetails)
        det = detail_tokens(state.details, x);
    return decode(state.decoder, mean_pool_rows(assemble(rep, det)));
}

Matrix infer_composed(
    const TrainState& state,
    std::span<const std::pair<Matrix, std::size_t>> conditions) {
    if (!state.bank.frozen)
        throw StateError("infer_composed: training has not completed");
    if (conditions.empty())
        throw ContractError("infer_composed: empty condition list");
    if (conditions.size() < 2)
        throw ContractError("infer_composed: need at least two conditions");

    std::vector<Matrix> parts;
    parts.reserve(conditions.size() * 2);
    for (const auto& [x, task] : conditions) {
        const Matrix encoded = encode(state.encoder, state.qbank, x);
        parts.push_back(state.arm == AblationArm::kNoMemory
                            ? encoded
                            : retrieve(state.bank, task, encoded).retrieved);
    }
    if (state.arm != AblationArm::kNoDetails)
        for (const auto& cond : conditions)
            parts.push_back(detail_tokens(state.details, cond.first));
    return decode(state.decoder, mean_pool_rows(concat_rows(parts)));
}

std::vector<SynthSample> eval_samples(const TrainState& state) {
    return sample_synth(state.world, state.config.seed, "data.eval",
                        state.config.eval_samples);
}

double gate_accuracy(const TrainState& state,
                     std::span<const SynthSample> samples) {
    if (samples.empty()) throw ContractError("gate_accuracy: no samples");
    Rng nogate_rng = Rng::stream(state.config.seed, "ablation.routing.eval");
    std::size_t hits = 0;
    for (const SynthSample& s : samples) {
        const Matrix encoded = encode(state.encoder, state.qbank, s.x);
        if (eval_route(state, encoded, nogate_rng) == s.task) hits += 1;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::pair<double, double> separation_ratios(
    const TrainState& state, std::span<const SynthSample> samples) {
    Rng nogate_rng = Rng::stream(state.config.seed, "ablation.routing.eval");
    std::vector<Matrix> raw, retrieved;
    std::vector<std::size_t> labels;
    raw.reserve(samples.size());
    retrieved.reserve(samples.size());
    for (const SynthSample& s : samples) {
        const Matrix encoded = encode(state.encoder, state.qbank, s.x);
        raw.push_back(mean_pool_rows(encoded));
        if (state.arm == AblationArm::kNoMemory) {
            retrieved.push_back(raw.back());
        } else {
            const std::size_t route = eval_route(state, encoded, nogate_rng);
            retrieved.push_back(mean_pool_rows(
                retrieve(state.bank, route, encoded).retrieved));
        }
        labels.push_back(s.task);
    }
    return {separation_ratio(raw, labels), separation_ratio(retrieved, labels)};
}

double final_loss(const TrainState& state) {
    const std::vector<double>* hist = nullptr;
    if (!state.stage3_losses.empty()) hist = &state.stage3_losses;
    else if (!state.stage2_losses.empty()) hist = &state.stage2_losses;
    else if (!state.stage1_losses.empty()) hist = &state.stage1_losses;
    if (hist == nullptr) return 0.0;
    const std::size_t window = std::min<std::size_t>(50, hist->size());
    double s = 0.0;
    for (std::size_t i = hist->size() - window; i < hist->size(); ++i)
        s += (*hist)[i];
    return s / static_cast<double>(window);
}

double structure_similarity(const TrainState& state,
                            std::span<const SynthSample> samples) {
    const std::size_t d_out = state.config.dims.d_out;
    const std::size_t bout = d_out / kTaskCount;
    const std::size_t lo = static_cast<std::size_t>(TaskKind::kStructure) *
                           bout;
    std::vector<Matrix> pred_rows, target_rows;
    for (const SynthSample& s : samples) {
        if (s.task != static_cast<std::size_t>(TaskKind::kStructure)) continue;
        pred_rows.push_back(block_cols(infer(state, s.x), lo, lo + bout));
        target_rows.push_back(block_cols(s.target, lo, lo + bout));
    }
    if (pred_rows.empty())
        throw ContractError("structure_similarity: no structure samples");
    const Matrix preds = stack_rows(pred_rows);
    const Matrix targets = stack_rows(target_rows);

    // Normalize both by the target range so the similarity is scale-free;
    // predictions are clamped into the unit box.
    double tlo = targets.data()[0], thi = targets.data()[0];
    for (std::size_t i = 0; i < targets.size(); ++i) {
        tlo = std::min(tlo, targets.data()[i]);
        thi = std::max(thi, targets.data()[i]);
    }
    const double span = std::max(thi - tlo, 1e-9);
    Matrix np(preds.rows(), preds.cols());
    Matrix nt(targets.rows(), targets.cols());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        nt.data()[i] = (targets.data()[i] - tlo) / span;
        np.data()[i] =
            std::clamp((preds.data()[i] - tlo) / span, 0.0, 1.0);
    }
    return struc_sim(np, nt);
}

CompositionEval composition_eval(const TrainState& state,
                                 std::span<const SynthSample> samples,
                                 std::size_t max_pairs) {
    const std::size_t d_out = state.config.dims.d_out;
    const std::size_t bout = d_out / kTaskCount;
    std::vector<const SynthSample*> subjects, styles;
    for (const SynthSample& s : samples) {
        if (s.task == static_cast<std::size_t>(TaskKind::kSubject))
            subjects.push_back(&s);
        else if (s.task == static_cast<std::size_t>(TaskKind::kStyle))
            styles.push_back(&s);
    }
    const std::size_t pairs =
        std::min({subjects.size(), styles.size(), max_pairs});
    if (pairs == 0)
        throw ContractError("composition_eval: need subject and style "
                            "samples");

    CompositionEval ev;
    for (std::size_t k = 0; k < pairs; ++k) {
        const SynthSample& subj = *subjects[k];
        const SynthSample& sty = *styles[k];
        const std::pair<Matrix, std::size_t> conds[] = {
            {subj.x, static_cast<std::size_t>(TaskKind::kSubject)},
            {sty.x, static_cast<std::size_t>(TaskKind::kStyle)},
        };
        const Matrix composed = infer_composed(state, conds);
        const Matrix single_subj =
            infer(state, subj.x, static_cast<std::size_t>(TaskKind::kSubject));
        const Matrix single_sty =
            infer(state, sty.x, static_cast<std::size_t>(TaskKind::kStyle));

        const auto subj_block = [&](const Matrix& m) {
            return block_cols(m, 0, bout);
        };
        const auto style_block = [&](const Matrix& m) {
            return block_cols(m, bout, 2 * bout);
        };
        ev.composed_subject_err +=
            mse(subj_block(composed), subj_block(subj.target));
        ev.composed_style_err +=
            mse(style_block(composed), style_block(sty.target));
        // The mismatched baseline asks a single-condition inference about
        // the block its condition never specified.
        ev.mismatched_subject_err +=
            mse(subj_block(single_sty), subj_block(subj.target));
        ev.mismatched_style_err +=
            mse(style_block(single_subj), style_block(sty.target));
    }
    const double inv = 1.0 / static_cast<double>(pairs);
    ev.composed_subject_err *= inv;
    ev.composed_style_err *= inv;
    ev.mismatched_subject_err *= inv;
    ev.mismatched_style_err *= inv;
    return ev;
}

}  // namespace atmlab
