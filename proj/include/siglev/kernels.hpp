#pragma once

#include <cstddef>
#include <span>

// Dense reduction kernels used by the U-statistic estimators. Each kernel has
// a scalar reference implementation and an AVX2+FMA variant; the active table
// is chosen once at startup from CPU features (override with force_isa or the
// SIGLEV_ISA=scalar environment variable). Scalar and SIMD variants are
// equivalence-tested against each other in the unit suite.
namespace siglev::kernels {

enum class Isa { scalar, avx2 };

bool avx2_available();
Isa active_isa();
void force_isa(Isa isa);

// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);

// sum_i a[i]
double sum(std::span<const double> a);

// sum_i a[i]^2
double sumsq(std::span<const double> a);

// s = sum_i a[i], ss = sum_i a[i]^2, one pass
void sum_sumsq(std::span<const double> a, double& s, double& ss);

// y[i] += alpha * x[i]
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// y[i] += x[i]
void vadd(std::span<const double> x, std::span<double> y);

// y[i] += x[i]^2
void vaddsq(std::span<const double> x, std::span<double> y);

// y[i] = alpha * x[i]
void scale(double alpha, std::span<const double> x, std::span<double> y);

namespace detail {

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sumsq)(const double*, std::size_t);
    void (*sum_sumsq)(const double*, std::size_t, double*, double*);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*vadd)(const double*, double*, std::size_t);
    void (*vaddsq)(const double*, double*, std::size_t);
    void (*scale)(double, const double*, double*, std::size_t);
};

extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif

}  // namespace detail

}  // namespace siglev::kernels
