#include "siglev/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace siglev::kernels {

namespace {

using detail::KernelTable;

const KernelTable* pick_default() {
#if defined(__x86_64__) || defined(_M_X64)
    const char* env = std::getenv("SIGLEV_ISA");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return &detail::scalar_table;
    if (avx2_available()) return &detail::avx2_table;
#endif
    return &detail::scalar_table;
}

std::atomic<const KernelTable*>& active_table() {
    static std::atomic<const KernelTable*> table{pick_default()};
    return table;
}

const KernelTable* table() { return active_table().load(std::memory_order_relaxed); }

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa active_isa() {
#if defined(__x86_64__) || defined(_M_X64)
    return table() == &detail::avx2_table ? Isa::avx2 : Isa::scalar;
#else
    return Isa::scalar;
#endif
}

void force_isa(Isa isa) {
#if defined(__x86_64__) || defined(_M_X64)
    if (isa == Isa::avx2 && avx2_available()) {
        active_table().store(&detail::avx2_table, std::memory_order_relaxed);
        return;
    }
#endif
    active_table().store(&detail::scalar_table, std::memory_order_relaxed);
    (void)isa;
}

double dot(std::span<const double> a, std::span<const double> b) {
    return table()->dot(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a) { return table()->sum(a.data(), a.size()); }

double sumsq(std::span<const double> a) { return table()->sumsq(a.data(), a.size()); }

void sum_sumsq(std::span<const double> a, double& s, double& ss) {
    table()->sum_sumsq(a.data(), a.size(), &s, &ss);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    table()->axpy(alpha, x.data(), y.data(), x.size());
}

void vadd(std::span<const double> x, std::span<double> y) {
    table()->vadd(x.data(), y.data(), x.size());
}

void vaddsq(std::span<const double> x, std::span<double> y) {
    table()->vaddsq(x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<const double> x, std::span<double> y) {
    table()->scale(alpha, x.data(), y.data(), x.size());
}

}  // namespace siglev::kernels
