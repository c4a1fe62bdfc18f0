// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/config.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <string>

#include "atmlab/errors.hpp"

namespace atmlab {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

bool parse_u64(std::string_view v, std::uint64_t& out) {
    const char* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    return ec == std::errc{} && p == end;
}

bool parse_f64(std::string_view v, double& out) {
    const char* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    return ec == std::errc{} && p == end;
}

std::string format_u64(std::uint64_t v) { return std::to_string(v); }

std::string format_f64(double v) {
    std::array<char, 64> buf;
    const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), p);
}

// One settable/printable configuration key; counts parse as u64, rates
// as f64.
struct Key {
    std::string_view name;
    enum Kind { kCount, kRate } kind;
    void (*set_count)(TrainConfig&, std::uint64_t);
    std::uint64_t (*get_count)(const TrainConfig&);
    void (*set_rate)(TrainConfig&, double);
    double (*get_rate)(const TrainConfig&);
};

template <std::size_t TrainConfig::*Field>
constexpr Key count_key(std::string_view name) {
    return Key{name, Key::kCount,
               [](TrainConfig& c, std::uint64_t v) {
                   c.*Field = static_cast<std::size_t>(v);
               },
               [](const TrainConfig& c) {
                   return static_cast<std::uint64_t>(c.*Field);
               },
               nullptr, nullptr};
}

template <std::size_t Dims::*Field>
constexpr Key dim_key(std::string_view name) {
    return Key{name, Key::kCount,
               [](TrainConfig& c, std::uint64_t v) {
                   c.dims.*Field = static_cast<std::size_t>(v);
               },
               [](const TrainConfig& c) {
                   return static_cast<std::uint64_t>(c.dims.*Field);
               },
               nullptr, nullptr};
}

template <double TrainConfig::*Field>
constexpr Key rate_key(std::string_view name) {
    return Key{name, Key::kRate, nullptr, nullptr,
               [](TrainConfig& c, double v) { c.*Field = v; },
               [](const TrainConfig& c) { return c.*Field; }};
}

constexpr Key kSeedKey{
    "seed", Key::kCount,
    [](TrainConfig& c, std::uint64_t v) { c.seed = v; },
    [](const TrainConfig& c) { return c.seed; }, nullptr, nullptr};

// Canonical order: scalars first, then the dimension group.
constexpr std::array<Key, 21> kKeys = {
    count_key<&TrainConfig::stage1_steps>("stage1_steps"),
    count_key<&TrainConfig::stage2_steps>("stage2_steps"),
    count_key<&TrainConfig::stage3_steps>("stage3_steps"),
    rate_key<&TrainConfig::lr_early>("lr_early"),
    rate_key<&TrainConfig::lr_late>("lr_late"),
    count_key<&TrainConfig::batch_size>("batch_size"),
    rate_key<&TrainConfig::alpha>("alpha"),
    kSeedKey,
    rate_key<&TrainConfig::noise_sigma>("noise_sigma"),
    rate_key<&TrainConfig::cluster_sigma>("cluster_sigma"),
    count_key<&TrainConfig::train_samples>("train_samples"),
    count_key<&TrainConfig::eval_samples>("eval_samples"),
    dim_key<&Dims::l>("dims.l"),
    dim_key<&Dims::m>("dims.m"),
    dim_key<&Dims::c>("dims.c"),
    dim_key<&Dims::n>("dims.n"),
    dim_key<&Dims::d>("dims.d"),
    dim_key<&Dims::v>("dims.v"),
    dim_key<&Dims::h>("dims.h"),
    dim_key<&Dims::h_dec>("dims.h_dec"),
    dim_key<&Dims::d_out>("dims.d_out"),
};

const Key* find_key(std::string_view name) {
    for (const Key& k : kKeys)
        if (k.name == name) return &k;
    return nullptr;
}

// `where` reads like "line 3" or "override 'seed=x'".
void assign(TrainConfig& cfg, std::string_view key, std::string_view value,
            const std::string& where) {
    const Key* k = find_key(key);
    if (k == nullptr)
        throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    if (k->kind == Key::kCount) {
        std::uint64_t v = 0;
        if (!parse_u64(value, v))
            throw ConfigError(where + ": invalid count for key '" +
                              std::string(key) + "': '" + std::string(value) +
                              "'");
        k->set_count(cfg, v);
    } else {
        double v = 0.0;
        if (!parse_f64(value, v))
            throw ConfigError(where + ": invalid number for key '" +
                              std::string(key) + "': '" + std::string(value) +
                              "'");
        k->set_rate(cfg, v);
    }
}

void assign_line(TrainConfig& cfg, std::string_view line,
                 const std::string& where) {
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError(where + ": expected 'key = value', got '" +
                          std::string(line) + "'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty())
        throw ConfigError(where + ": missing key before '='");
    if (value.empty())
        throw ConfigError(where + ": missing value for key '" +
                          std::string(key) + "'");
    assign(cfg, key, value, where);
}

}  // namespace

TrainConfig parse_config(std::string_view text, const TrainConfig& base) {
    TrainConfig cfg = base;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t nl = text.find('\n');
        std::string_view line =
            nl == std::string_view::npos ? text : text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size()
                                                        : nl + 1);
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        assign_line(cfg, line, "line " + std::to_string(line_no));
    }
    return cfg;
}

void apply_override(TrainConfig& cfg, std::string_view assignment) {
    assign_line(cfg, trim(assignment),
                "override '" + std::string(assignment) + "'");
}

std::string serialize_config(const TrainConfig& cfg) {
    // The version line doubles as a comment so the output stays parseable.
    std::string out = "# atmlab config v1\n";
    for (const Key& k : kKeys) {
        out += k.name;
        out += " = ";
        out += k.kind == Key::kCount ? format_u64(k.get_count(cfg))
                                     : format_f64(k.get_rate(cfg));
        out += '\n';
    }
    return out;
}

TrainConfig preset_config(std::string_view name) {
    if (name == "desk") return TrainConfig{};
    if (name == "paper-scale") {
        TrainConfig cfg;
        cfg.dims.l = 256;
        cfg.dims.m = 1024;
        cfg.stage1_steps = 3000;
        cfg.stage2_steps = 3000;
        cfg.stage3_steps = 5000;
        cfg.lr_early = 1e-4;
        cfg.lr_late = 3e-5;
        cfg.batch_size = 256;
        return cfg;
    }
    throw ConfigError("unknown preset '" + std::string(name) +
                      "'; valid presets: desk, paper-scale");
}

}  // namespace atmlab
