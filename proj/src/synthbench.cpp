// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/synthbench.hpp"

#include <cmath>
#include <string>

#include "atmlab/errors.hpp"
#include "atmlab/rng.hpp"

namespace atmlab {
namespace {

constexpr double kSeparationFloor = 1e-12;
constexpr double kSeparationCap = 1e12;
// Centers are pushed to 6 cluster widths with a little slack so the
// boundary case cannot land exactly on the threshold.
constexpr double kCenterMargin = 6.3;

Matrix gaussian_row(Rng& rng, std::size_t d, double stddev) {
    Matrix m(1, d);
    for (std::size_t i = 0; i < d; ++i)
        m.at(0, i) = stddev * rng.next_gaussian();
    return m;
}

double row_distance(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double min_pairwise_distance(const std::vector<Matrix>& centers) {
    double best = -1.0;
    for (std::size_t i = 0; i < centers.size(); ++i)
        for (std::size_t j = i + 1; j < centers.size(); ++j) {
            const double d = row_distance(centers[i], centers[j]);
            if (best < 0.0 || d < best) best = d;
        }
    return best;
}

}  // namespace

std::pair<std::size_t, std::size_t> task_block(std::size_t dim,
                                               std::size_t task) {
    if (task >= kTaskCount)
        throw ContractError("task_block: task " + std::to_string(task) +
                            " out of range");
    const std::size_t width = dim / kTaskCount;
    return {task * width, (task + 1) * width};
}

SynthSpec make_synth_spec(std::uint64_t seed, std::size_t d, std::size_t d_out,
                          double noise_sigma, double cluster_sigma) {
    if (d == 0 || d % kTaskCount != 0)
        throw ContractError("make_synth_spec: d must be a positive multiple "
                            "of 3, got " + std::to_string(d));
    if (d_out == 0 || d_out % kTaskCount != 0)
        throw ContractError("make_synth_spec: d_out must be a positive "
                            "multiple of 3, got " + std::to_string(d_out));
    if (noise_sigma < 0.0 || cluster_sigma < 0.0)
        throw ContractError("make_synth_spec: sigmas must be nonnegative");

    SynthSpec spec;
    spec.d = d;
    spec.d_out = d_out;
    spec.noise_sigma = noise_sigma;
    spec.cluster_sigma = cluster_sigma;

    Rng center_rng = Rng::stream(seed, "synth.centers");
    double min_dist = 0.0;
    do {
        spec.centers.clear();
        for (std::size_t t = 0; t < kTaskCount; ++t)
            spec.centers.push_back(gaussian_row(center_rng, d, 1.0));
        min_dist = min_pairwise_distance(spec.centers);
    } while (min_dist < 1e-6);
    const double required = kCenterMargin * cluster_sigma;
    if (min_dist < required) {
        const double factor = required / min_dist;
        for (Matrix& c : spec.centers) c = scale(c, factor);
    }

    Rng map_rng = Rng::stream(seed, "synth.maps");
    const std::size_t bin = d / kTaskCount;
    const std::size_t bout = d_out / kTaskCount;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(bin));
    for (std::size_t t = 0; t < kTaskCount; ++t) {
        Matrix a(bin, bout);
        for (std::size_t i = 0; i < a.size(); ++i)
            a.data()[i] = stddev * map_rng.next_gaussian();
        spec.task_maps.push_back(std::move(a));
    }
    return spec;
}

std::vector<SynthSample> sample_synth(const SynthSpec& spec,
                                      std::uint64_t seed,
                                      std::string_view stream,
                                      std::size_t count) {
    if (count == 0) throw ContractError("sample_synth: count must be > 0");
    Rng rng = Rng::stream(seed, stream);
    const auto bin = spec.d / kTaskCount;
    const auto bout = spec.d_out / kTaskCount;

    std::vector<SynthSample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t task = i % kTaskCount;
        Matrix x = spec.centers[task];
        for (std::size_t j = 0; j < spec.d; ++j)
            x.at(0, j) += spec.cluster_sigma * rng.next_gaussian();

        const auto [lo, hi] = task_block(spec.d, task);
        Matrix block(1, bin);
        for (std::size_t j = lo; j < hi; ++j) block.at(0, j - lo) = x.at(0, j);
        const Matrix mapped = matmul(block, spec.task_maps[task]);

        Matrix target(1, spec.d_out);
        const std::size_t out_lo = task * bout;
        for (std::size_t j = 0; j < bout; ++j)
            target.at(0, out_lo + j) = mapped.at(0, j);
        for (std::size_t j = 0; j < spec.d_out; ++j)
            target.at(0, j) += spec.noise_sigma * rng.next_gaussian();

        samples.push_back(SynthSample{std::move(x), task, std::move(target)});
    }
    return samples;
}

std::vector<SynthSample> generate(std::uint64_t seed, std::size_t count,
                                  double noise_sigma) {
    const SynthSpec spec = make_synth_spec(seed, 24, 12, noise_sigma, 0.5);
    return sample_synth(spec, seed, "synth.samples", count);
}

double separation_ratio(std::span<const Matrix> embeddings,
                        std::span<const std::size_t> labels) {
    if (embeddings.size() != labels.size())
        throw ContractError("separation_ratio: " +
                            std::to_string(embeddings.size()) +
                            " embeddings vs " + std::to_string(labels.size()) +
                            " labels");
    if (embeddings.empty())
        throw ContractError("separation_ratio: empty input");
    const std::size_t width = embeddings[0].cols();
    std::size_t max_label = 0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].rows() != 1 || embeddings[i].cols() != width)
            throw DimensionError("separation_ratio: embedding " +
                                 std::to_string(i) + " is " +
                                 embeddings[i].shape_str() + ", expected 1x" +
                                 std::to_string(width));
        max_label = std::max(max_label, labels[i]);
    }

    std::vector<std::size_t> counts(max_label + 1, 0);
    std::vector<Matrix> centroids(max_label + 1, Matrix(1, width));
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        counts[labels[i]] += 1;
        for (std::size_t j = 0; j < width; ++j)
            centroids[labels[i]].at(0, j) += embeddings[i].at(0, j);
    }
    std::vector<std::size_t> present;
    for (std::size_t k = 0; k <= max_label; ++k) {
        if (counts[k] == 0) continue;
        if (counts[k] < 2)
            throw ContractError("separation_ratio: class " +
                                std::to_string(k) + " has a single point");
        for (std::size_t j = 0; j < width; ++j)
            centroids[k].at(0, j) /= static_cast<double>(counts[k]);
        present.push_back(k);
    }
    if (present.size() < 2)
        throw ContractError("separation_ratio: need at least two classes");

    double between = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < present.size(); ++a)
        for (std::size_t b = a + 1; b < present.size(); ++b) {
            between += row_distance(centroids[present[a]],
                                    centroids[present[b]]);
            pairs += 1;
        }
    between /= static_cast<double>(pairs);

    double within = 0.0;
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        within += row_distance(embeddings[i], centroids[labels[i]]);
    within /= static_cast<double>(embeddings.size());

    const double ratio = between / std::max(within, kSeparationFloor);
    return std::min(ratio, kSeparationCap);
}

double struc_sim(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw DimensionError("struc_sim: lhs is " + a.shape_str() +
                             ", rhs is " + b.shape_str());
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data()[i] < 0.0 || a.data()[i] > 1.0 || b.data()[i] < 0.0 ||
            b.data()[i] > 1.0)
            throw ContractError("struc_sim: inputs must lie in [0,1]");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::fabs(a.data()[i] - b.data()[i]);
    return 1.0 - s / static_cast<double>(a.size());
}

}  // namespace atmlab
