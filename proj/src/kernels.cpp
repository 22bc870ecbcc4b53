#include "bisimlab/kernels.hpp"

#include <cmath>

namespace bisimlab::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = std::fabs(a[i] - b[i]);
    if (d > m) m = d;
  }
  return m;
}

double sq_l2_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double l1_diff(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
  return acc;
}

}  // namespace scalar

namespace {

bool avx2_usable() {
#if defined(BISIMLAB_HAVE_X86_INTRIN) && defined(__x86_64__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

}  // namespace

double (*dot)(const double*, const double*, std::size_t) = scalar::dot;
void (*axpy)(double*, double, const double*, std::size_t) = scalar::axpy;
double (*sum)(const double*, std::size_t) = scalar::sum;
double (*max_abs_diff)(const double*, const double*, std::size_t) = scalar::max_abs_diff;
double (*sq_l2_diff)(const double*, const double*, std::size_t) = scalar::sq_l2_diff;
double (*l1_diff)(const double*, const double*, std::size_t) = scalar::l1_diff;

namespace {

const char* g_backend = "scalar";

struct DispatchInit {
  DispatchInit() {
#if defined(BISIMLAB_HAVE_X86_INTRIN) && defined(__x86_64__)
    if (avx2_usable()) {
      dot = avx2::dot;
      axpy = avx2::axpy;
      sum = avx2::sum;
      max_abs_diff = avx2::max_abs_diff;
      sq_l2_diff = avx2::sq_l2_diff;
      l1_diff = avx2::l1_diff;
      g_backend = "avx2";
    }
#endif
  }
};

DispatchInit g_dispatch_init;

}  // namespace

const char* active_backend() { return g_backend; }

const char* force_scalar_backend() {
  const char* prev = g_backend;
  dot = scalar::dot;
  axpy = scalar::axpy;
  sum = scalar::sum;
  max_abs_diff = scalar::max_abs_diff;
  sq_l2_diff = scalar::sq_l2_diff;
  l1_diff = scalar::l1_diff;
  g_backend = "scalar";
  return prev;
}

}  // namespace bisimlab::kernels
