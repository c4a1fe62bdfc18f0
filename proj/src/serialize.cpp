// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/serialize.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <utility>

#include "atmlab/config.hpp"
#include "atmlab/errors.hpp"

namespace atmlab {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

constexpr char kMagic[8] = {'A', 'T', 'M', 'L', 'A', 'B', 'C', 'K'};
constexpr std::uint32_t kCheckpointMajor = 1;
constexpr std::uint32_t kCheckpointMinor = 0;

std::string format_f64(double v) {
    std::array<char, 64> buf;
    const auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), p);
}

bool parse_f64(std::string_view v, double& out) {
    const char* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    return ec == std::errc{} && p == end;
}

bool parse_u64(std::string_view v, std::uint64_t& out) {
    const char* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    return ec == std::errc{} && p == end;
}

template <typename T>
void put(std::string& out, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
}

struct ByteReader {
    std::string_view buf;
    std::size_t pos = 0;
    const std::string& path;

    void need(std::size_t k, const char* what) {
        if (buf.size() - pos < k)
            throw IoError("checkpoint " + path + ": truncated (" + what +
                          ")");
    }
    template <typename T>
    T scalar(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, buf.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    std::string_view bytes(std::size_t k, const char* what) {
        need(k, what);
        const std::string_view v = buf.substr(pos, k);
        pos += k;
        return v;
    }
};

// Stable parameter naming shared by the writer and the loader.
std::vector<std::pair<std::string, Matrix*>> named_params(TrainState& s) {
    std::vector<std::pair<std::string, Matrix*>> out = {
        {"qbank.q0", &s.qbank.q0},       {"encoder.w_q", &s.encoder.w_q},
        {"encoder.w_x", &s.encoder.w_x}, {"encoder.b", &s.encoder.b},
        {"details.w_v", &s.details.w_v}, {"gate.w1", &s.gate.w1},
        {"gate.b1", &s.gate.b1},         {"gate.w2", &s.gate.w2},
        {"gate.b2", &s.gate.b2},         {"decoder.w1", &s.decoder.w1},
        {"decoder.b1", &s.decoder.b1},   {"decoder.w2", &s.decoder.w2},
        {"decoder.b2", &s.decoder.b2},
    };
    for (std::size_t t = 0; t < s.bank.items.size(); ++t)
        out.emplace_back("bank.item" + std::to_string(t), &s.bank.items[t]);
    return out;
}

void put_losses(std::string& out, const std::vector<double>& losses) {
    put<std::uint64_t>(out, losses.size());
    for (const double v : losses) put(out, v);
}

std::vector<double> read_losses(ByteReader& r, const char* what) {
    const auto n = r.scalar<std::uint64_t>(what);
    if (n > (r.buf.size() - r.pos) / sizeof(double))
        throw IoError("checkpoint " + r.path + ": truncated (" + what + ")");
    std::vector<double> out(n);
    for (auto& v : out) v = r.scalar<double>(what);
    return out;
}

void append_losses_section(std::string& out, const char* name,
                           const std::vector<double>& losses) {
    out += "\n[losses.";
    out += name;
    out += "]\n";
    for (const double v : losses) {
        out += format_f64(v);
        out += '\n';
    }
}

std::string memory_item_path(const std::string& dir, std::size_t i) {
    return dir + "/memory_item_" + std::to_string(i) + ".csv";
}

// Pulls one line off `rest`, returning it without the newline.
std::string_view next_line(std::string_view& rest) {
    const std::size_t nl = rest.find('\n');
    const std::string_view line =
        nl == std::string_view::npos ? rest : rest.substr(0, nl);
    rest.remove_prefix(nl == std::string_view::npos ? rest.size() : nl + 1);
    return line;
}

// Checks "atmlab <kind>-csv v<major>" and rejects other majors.
void check_version_line(std::string_view line, std::string_view kind,
                        std::uint64_t major, const std::string& path) {
    std::string expect = "atmlab ";
    expect += kind;
    expect += "-csv v";
    if (line.substr(0, expect.size()) != expect)
        throw IoError("read " + path + ": missing '" + expect +
                      "<major>' version line");
    std::uint64_t got = 0;
    if (!parse_u64(line.substr(expect.size()), got))
        throw IoError("read " + path + ": unparseable version line");
    if (got != major)
        throw IoError("read " + path + ": unsupported major version " +
                      std::to_string(got) + " (expected " +
                      std::to_string(major) + ")");
}

}  // namespace

std::string render_report(const RunReport& report) {
    std::string out = "atmlab report v1\n";
    out += "artifact = ";
    out += kArtifactVersion;
    out += '\n';
    out += "arm = ";
    out += arm_name(report.arm);
    out += '\n';

    out += "\n[config]\n";
    out += serialize_config(report.config);

    append_losses_section(out, "stage1", report.stage1_losses);
    append_losses_section(out, "stage2", report.stage2_losses);
    append_losses_section(out, "stage3", report.stage3_losses);

    out += "\n[metrics]\n";
    out += "gate_accuracy = " + format_f64(report.metrics.gate_accuracy);
    out += "\nseparation_ratio_raw = " +
           format_f64(report.metrics.separation_ratio_raw);
    out += "\nseparation_ratio_retrieved = " +
           format_f64(report.metrics.separation_ratio_retrieved);
    out += "\nfinal_loss = " + format_f64(report.metrics.final_loss);
    out += "\nstruc_sim = " + format_f64(report.metrics.struc_sim_value);
    out += '\n';

    out += "\n[walltime]\n";
    out += "stage1_seconds = " + format_f64(report.stage1_seconds);
    out += "\nstage2_seconds = " + format_f64(report.stage2_seconds);
    out += "\nstage3_seconds = " + format_f64(report.stage3_seconds);
    out += '\n';
    return out;
}

std::string report_body(std::string_view rendered) {
    const std::size_t at = rendered.find("\n[walltime]\n");
    return std::string(at == std::string_view::npos ? rendered
                                                    : rendered.substr(0, at));
}

std::string render_ablation_csv(std::span<const AblationRow> rows) {
    std::string out = "atmlab ablation-csv v1\n";
    out += "arm,seed,gate_acc,sep_raw,sep_retrieved,final_loss,struc_sim\n";
    for (const AblationRow& r : rows) {
        out += arm_name(r.arm);
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += format_f64(r.metrics.gate_accuracy);
        out += ',';
        out += format_f64(r.metrics.separation_ratio_raw);
        out += ',';
        out += format_f64(r.metrics.separation_ratio_retrieved);
        out += ',';
        out += format_f64(r.metrics.final_loss);
        out += ',';
        out += format_f64(r.metrics.struc_sim_value);
        out += '\n';
    }
    return out;
}

void save_checkpoint(const TrainState& state, const std::string& path) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put(out, kCheckpointMajor);
    put(out, kCheckpointMinor);
    put(out, static_cast<std::uint32_t>(state.arm));
    put(out, static_cast<std::uint32_t>(state.stage));
    put<std::uint8_t>(out, state.bank.frozen ? 1 : 0);
    put(out, state.global_step);
    put(out, state.stage2_lr_used);
    put(out, state.stage3_lr_used);
    put(out, state.bank.alpha);
    put(out, state.bank.epsilon_norm);

    const std::string cfg = serialize_config(state.config);
    put<std::uint64_t>(out, cfg.size());
    out += cfg;

    put_losses(out, state.stage1_losses);
    put_losses(out, state.stage2_losses);
    put_losses(out, state.stage3_losses);

    auto params = named_params(const_cast<TrainState&>(state));
    put<std::uint64_t>(out, params.size());
    for (const auto& [name, mat] : params) {
        put<std::uint64_t>(out, name.size());
        out += name;
        put<std::uint64_t>(out, mat->rows());
        put<std::uint64_t>(out, mat->cols());
        out.append(reinterpret_cast<const char*>(mat->data()),
                   mat->size() * sizeof(double));
    }
    write_text_atomic(path, out);
}

TrainState load_checkpoint(const std::string& path) {
    const std::string blob = read_text(path);
    ByteReader r{blob, 0, path};

    const std::string_view magic = r.bytes(sizeof(kMagic), "magic");
    if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0)
        throw IoError("checkpoint " + path + ": bad magic (not an atmlab "
                      "checkpoint)");
    const auto major = r.scalar<std::uint32_t>("version");
    (void)r.scalar<std::uint32_t>("version");
    if (major != kCheckpointMajor)
        throw IoError("checkpoint " + path + ": unsupported major version " +
                      std::to_string(major) + " (expected " +
                      std::to_string(kCheckpointMajor) + ")");

    const auto arm_index = r.scalar<std::uint32_t>("arm");
    if (arm_index >= kAllArms.size())
        throw IoError("checkpoint " + path + ": invalid arm index " +
                      std::to_string(arm_index));
    const auto stage = r.scalar<std::uint32_t>("stage");
    if (stage < 1 || stage > 3)
        throw IoError("checkpoint " + path + ": invalid stage " +
                      std::to_string(stage));
    const bool frozen = r.scalar<std::uint8_t>("frozen") != 0;
    const auto global_step = r.scalar<std::uint64_t>("step counter");
    const double s2_lr = r.scalar<double>("lr telemetry");
    const double s3_lr = r.scalar<double>("lr telemetry");
    const double alpha = r.scalar<double>("bank scalars");
    const double eps_norm = r.scalar<double>("bank scalars");

    const auto cfg_len = r.scalar<std::uint64_t>("config length");
    const std::string_view cfg_text = r.bytes(cfg_len, "config text");
    TrainConfig cfg;
    try {
        cfg = parse_config(cfg_text);
        cfg.validate();
    } catch (const ConfigError& e) {
        throw IoError("checkpoint " + path + ": embedded config: " +
                      e.what());
    }

    std::vector<double> l1 = read_losses(r, "stage1 losses");
    std::vector<double> l2 = read_losses(r, "stage2 losses");
    std::vector<double> l3 = read_losses(r, "stage3 losses");

    // World, data, and parameter shapes all re-derive from the config;
    // stored matrices then overwrite the fresh initialization.
    TrainState state = init_state(cfg, kAllArms[arm_index]);
    state.stage = static_cast<int>(stage);
    state.global_step = global_step;
    state.stage2_lr_used = s2_lr;
    state.stage3_lr_used = s3_lr;
    state.bank.alpha = alpha;
    state.bank.epsilon_norm = eps_norm;
    state.stage1_losses = std::move(l1);
    state.stage2_losses = std::move(l2);
    state.stage3_losses = std::move(l3);

    auto params = named_params(state);
    const auto count = r.scalar<std::uint64_t>("parameter count");
    if (count != params.size())
        throw IoError("checkpoint " + path + ": expected " +
                      std::to_string(params.size()) + " parameters, found " +
                      std::to_string(count));
    std::vector<bool> seen(params.size(), false);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = r.scalar<std::uint64_t>("parameter name");
        const std::string_view name = r.bytes(name_len, "parameter name");
        const auto rows = r.scalar<std::uint64_t>("parameter shape");
        const auto cols = r.scalar<std::uint64_t>("parameter shape");
        std::size_t slot = params.size();
        for (std::size_t j = 0; j < params.size(); ++j) {
            if (params[j].first == name) {
                slot = j;
                break;
            }
        }
        if (slot == params.size())
            throw IoError("checkpoint " + path + ": unknown parameter '" +
                          std::string(name) + "'");
        if (seen[slot])
            throw IoError("checkpoint " + path + ": duplicate parameter '" +
                          std::string(name) + "'");
        seen[slot] = true;
        Matrix& dst = *params[slot].second;
        if (rows != dst.rows() || cols != dst.cols())
            throw IoError("checkpoint " + path + ": shape mismatch for '" +
                          std::string(name) + "'");
        const std::string_view data =
            r.bytes(rows * cols * sizeof(double), "parameter data");
        std::memcpy(dst.data(), data.data(), data.size());
    }
    state.bank.frozen = frozen;
    return state;
}

void export_memory_csv(const MemoryBank& bank, const std::string& dir) {
    for (std::size_t i = 0; i < bank.items.size(); ++i) {
        const Matrix& item = bank.items[i];
        std::string out = "atmlab memory-csv v1\n";
        out += "n,m,c\n";
        out += std::to_string(bank.items.size()) + "," +
               std::to_string(item.rows()) + "," +
               std::to_string(item.cols()) + "\n";
        for (std::size_t r = 0; r < item.rows(); ++r) {
            for (std::size_t c = 0; c < item.cols(); ++c) {
                if (c != 0) out += ',';
                out += format_f64(item.at(r, c));
            }
            out += '\n';
        }
        write_text_atomic(memory_item_path(dir, i), out);
    }
}

std::vector<Matrix> import_memory_csv(const std::string& dir,
                                      std::size_t item_count) {
    std::vector<Matrix> items;
    items.reserve(item_count);
    for (std::size_t i = 0; i < item_count; ++i) {
        const std::string path = memory_item_path(dir, i);
        const std::string text = read_text(path);
        std::string_view rest = text;

        check_version_line(next_line(rest), "memory", 1, path);
        if (next_line(rest) != "n,m,c")
            throw IoError("read " + path + ": missing n,m,c header");
        const std::string_view shape_line = next_line(rest);
        std::uint64_t dims[3] = {0, 0, 0};
        {
            std::string_view s = shape_line;
            for (int k = 0; k < 3; ++k) {
                const std::size_t comma = s.find(',');
                const std::string_view field =
                    k < 2 ? s.substr(0, comma) : s;
                if ((k < 2 && comma == std::string_view::npos) ||
                    !parse_u64(field, dims[k]))
                    throw IoError("read " + path + ": bad shape line '" +
                                  std::string(shape_line) + "'");
                if (k < 2) s.remove_prefix(comma + 1);
            }
        }
        if (dims[0] != item_count)
            throw IoError("read " + path + ": file claims n=" +
                          std::to_string(dims[0]) + ", expected n=" +
                          std::to_string(item_count));
        if (dims[1] == 0 || dims[2] == 0)
            throw IoError("read " + path + ": degenerate shape");

        Matrix item(dims[1], dims[2]);
        for (std::uint64_t row = 0; row < dims[1]; ++row) {
            std::string_view line = next_line(rest);
            for (std::uint64_t col = 0; col < dims[2]; ++col) {
                const std::size_t comma = line.find(',');
                const std::string_view field =
                    col + 1 < dims[2] ? line.substr(0, comma) : line;
                double v = 0.0;
                if ((col + 1 < dims[2] && comma == std::string_view::npos) ||
                    !parse_f64(field, v))
                    throw IoError("read " + path + ": bad value in data row " +
                                  std::to_string(row));
                item.at(row, col) = v;
                if (col + 1 < dims[2]) line.remove_prefix(comma + 1);
            }
        }
        items.push_back(std::move(item));
    }
    return items;
}

Matrix pca_project_2d(const Matrix& points) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (n < 2)
        throw ContractError("pca_project_2d: need at least two points");
    if (d < 2)
        throw ContractError("pca_project_2d: need at least two dimensions");

    Matrix centered(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += points.at(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            centered.at(i, j) = points.at(i, j) - mean;
    }

    Matrix cov = matmul(transpose(centered), centered);
    for (std::size_t i = 0; i < cov.size(); ++i)
        cov.data()[i] /= static_cast<double>(n - 1);

    // Cyclic Jacobi diagonalization; V accumulates the eigenvectors.
    Matrix v(d, d);
    for (std::size_t i = 0; i < d; ++i) v.at(i, i) = 1.0;
    double frob = 0.0;
    for (std::size_t i = 0; i < cov.size(); ++i)
        frob += cov.data()[i] * cov.data()[i];
    const double stop = 1e-30 * std::max(frob, 1e-300);
    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q)
                off += cov.at(p, q) * cov.at(p, q);
        if (off <= stop) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = cov.at(p, q);
                if (apq == 0.0) continue;
                const double tau =
                    (cov.at(q, q) - cov.at(p, p)) / (2.0 * apq);
                const double t =
                    (tau >= 0.0 ? 1.0 : -1.0) /
                    (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = cov.at(k, p);
                    const double akq = cov.at(k, q);
                    cov.at(k, p) = c * akp - s * akq;
                    cov.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = cov.at(p, k);
                    const double aqk = cov.at(q, k);
                    cov.at(p, k) = c * apk - s * aqk;
                    cov.at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v.at(k, p);
                    const double vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::size_t top[2] = {0, 1};
    if (cov.at(1, 1) > cov.at(0, 0)) std::swap(top[0], top[1]);
    for (std::size_t j = 2; j < d; ++j) {
        if (cov.at(j, j) > cov.at(top[0], top[0])) {
            top[1] = top[0];
            top[0] = j;
        } else if (cov.at(j, j) > cov.at(top[1], top[1])) {
            top[1] = j;
        }
    }

    Matrix axes(d, 2);
    for (int a = 0; a < 2; ++a) {
        std::size_t peak = 0;
        for (std::size_t k = 1; k < d; ++k)
            if (std::abs(v.at(k, top[a])) > std::abs(v.at(peak, top[a])))
                peak = k;
        const double flip = v.at(peak, top[a]) < 0.0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < d; ++k)
            axes.at(k, a) = flip * v.at(k, top[a]);
    }
    return matmul(centered, axes);
}

std::string render_projection_csv(const TrainState& state) {
    const std::vector<SynthSample> eval = eval_samples(state);
    const std::size_t s_count = eval.size();

    std::vector<Matrix> rows;
    std::vector<std::size_t> labels;
    rows.reserve(2 * s_count + state.bank.items.size());
    for (const SynthSample& s : eval) {
        rows.push_back(mean_pool_rows(encode(state.encoder, state.qbank, s.x)));
        labels.push_back(s.task);
    }
    // Retrieval routed by the gate: this is the inference-time view of the
    // same held-out queries.
    for (const SynthSample& s : eval) {
        const Matrix encoded = encode(state.encoder, state.qbank, s.x);
        const std::size_t route = gate_predict(state.gate, encoded).task;
        rows.push_back(
            mean_pool_rows(retrieve(state.bank, route, encoded).retrieved));
        labels.push_back(s.task);
    }
    for (std::size_t t = 0; t < state.bank.items.size(); ++t) {
        rows.push_back(state.bank.items[t]);
        for (std::size_t r = 0; r < state.bank.items[t].rows(); ++r)
            labels.push_back(t);
    }

    const Matrix coords = pca_project_2d(concat_rows(rows));

    std::string out = "atmlab projection-csv v1\n";
    out += "x,y,label,kind\n";
    const auto emit = [&](std::size_t row, std::size_t label,
                          std::string_view kind) {
        out += format_f64(coords.at(row, 0));
        out += ',';
        out += format_f64(coords.at(row, 1));
        out += ',';
        out += std::to_string(label);
        out += ',';
        out += kind;
        out += '\n';
    };
    std::size_t row = 0;
    for (std::size_t i = 0; i < s_count; ++i, ++row)
        emit(row, labels[row], "raw");
    for (std::size_t i = 0; i < s_count; ++i, ++row)
        emit(row, labels[row], "retrieved");
    for (; row < coords.rows(); ++row) emit(row, labels[row], "memory");
    return out;
}

void write_text_atomic(const std::string& path, std::string_view text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("write " + path + ": cannot open " + tmp);
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        f.flush();
        if (!f) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write " + path + ": short write to " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("write " + path + ": rename failed: " + ec.message());
    }
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read " + path + ": cannot open");
    std::string out((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("read " + path + ": read failure");
    return out;
}

}  // namespace atmlab
