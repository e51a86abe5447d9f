#include "siglev/kernels.hpp"

// Reference kernels: straight loops, no manual reassociation. Built without
// fast-math so the accumulation order is fixed; these are the ground truth
// the SIMD variants are tested against.
namespace siglev::kernels::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double sumsq_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

void sum_sumsq_scalar(const double* a, std::size_t n, double* s, double* ss) {
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i];
        acc2 += a[i] * a[i];
    }
    *s = acc;
    *ss = acc2;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vadd_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void vaddsq_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i] * x[i];
}

void scale_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

}  // namespace

const KernelTable scalar_table = {
    dot_scalar,  sum_scalar,    sumsq_scalar, sum_sumsq_scalar,
    axpy_scalar, vadd_scalar,   vaddsq_scalar, scale_scalar,
};

}  // namespace siglev::kernels::detail
