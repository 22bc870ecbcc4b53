#pragma once

// Dense double-precision kernels used by the numeric hot paths (MLP
// forward/backward, Bellman backups, residual norms, pairwise latent
// distances). Scalar reference implementations always exist; on x86 an
// AVX2+FMA variant of each kernel is selected once at startup when the
// CPU supports it. kernels::scalar and kernels::avx2 stay reachable so
// the equivalence tests can compare both paths on the same inputs.

#include <cstddef>

namespace bisimlab::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);
double sum(const double* a, std::size_t n);
double max_abs_diff(const double* a, const double* b, std::size_t n);
double sq_l2_diff(const double* a, const double* b, std::size_t n);
double l1_diff(const double* a, const double* b, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);
double sum(const double* a, std::size_t n);
double max_abs_diff(const double* a, const double* b, std::size_t n);
double sq_l2_diff(const double* a, const double* b, std::size_t n);
double l1_diff(const double* a, const double* b, std::size_t n);
}  // namespace avx2
#endif

// Active implementation, chosen at load time.
extern double (*dot)(const double*, const double*, std::size_t);
extern void (*axpy)(double*, double, const double*, std::size_t);
extern double (*sum)(const double*, std::size_t);
extern double (*max_abs_diff)(const double*, const double*, std::size_t);
extern double (*sq_l2_diff)(const double*, const double*, std::size_t);
extern double (*l1_diff)(const double*, const double*, std::size_t);

// "avx2" when the AVX2+FMA path is active, otherwise "scalar".
const char* active_backend();

// Force the scalar path (used by tests); returns the previous backend name.
const char* force_scalar_backend();

}  // namespace bisimlab::kernels
