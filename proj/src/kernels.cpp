// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0

#include "atmlab/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "atmlab/errors.hpp"

namespace atmlab::kernels {
namespace {

std::atomic<const KernelTable*> g_active{nullptr};

const KernelTable* pick_table() {
    const char* env = std::getenv("ATMLAB_SIMD");
    std::string choice = env ? env : "auto";
    if (choice == "scalar") return &scalar_table();
    if (choice == "avx2") {
        if (!cpu_supports(Simd::kAvx2))
            throw ConfigError("ATMLAB_SIMD=avx2 but the CPU has no AVX2");
#if defined(__x86_64__) || defined(_M_X64)
        return &avx2_table();
#endif
    }
    if (choice != "auto")
        throw ConfigError("ATMLAB_SIMD must be scalar, avx2 or auto, got '" +
                          choice + "'");
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_supports(Simd::kAvx2)) return &avx2_table();
#endif
    return &scalar_table();
}

}  // namespace

bool cpu_supports(Simd level) {
    if (level == Simd::kScalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

const KernelTable& active() {
    const KernelTable* t = g_active.load(std::memory_order_acquire);
    if (t == nullptr) {
        t = pick_table();
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

void force(Simd level) {
    if (!cpu_supports(level))
        throw ContractError("requested SIMD level not supported on this CPU");
    switch (level) {
        case Simd::kScalar:
            g_active.store(&scalar_table(), std::memory_order_release);
            break;
        case Simd::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
            g_active.store(&avx2_table(), std::memory_order_release);
#endif
            break;
    }
}

}  // namespace atmlab::kernels
