#include "idec/kernels.hpp"

#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace idec::kernels {

namespace serial {

void combine(std::span<const double> z, std::span<const double> z_noisy, double epsilon,
             std::span<double> out) {
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - epsilon * z_noisy[i];
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double max_value(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = x > m ? x : m;
  return m;
}

void softmax(std::span<const double> v, std::span<double> out) {
  const double m = max_value(v);
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] /= sum;
}

void log_softmax(std::span<const double> v, std::span<double> out) {
  const double m = max_value(v);
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  const double log_z = m + std::log(sum);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - log_z;
}

}  // namespace serial

void combine(std::span<const double> z, std::span<const double> z_noisy, double epsilon,
             std::span<double> out) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(z.size());
#pragma omp parallel for schedule(static) if (z.size() >= kParallelGrain)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = z[i] - epsilon * z_noisy[i];
}

std::size_t argmax(std::span<const double> v) {
  if (v.size() < kParallelGrain) return serial::argmax(v);
  std::size_t best = 0;
  double best_value = v[0];
#pragma omp parallel
  {
    std::size_t local = 0;
    double local_value = -std::numeric_limits<double>::infinity();
    bool seen = false;
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (!seen || v[i] > local_value) {
        local = static_cast<std::size_t>(i);
        local_value = v[i];
        seen = true;
      }
    }
#pragma omp critical(idec_argmax_merge)
    if (seen && (local_value > best_value || (local_value == best_value && local < best))) {
      best = local;
      best_value = local_value;
    }
  }
  return best;
}

double max_value(std::span<const double> v) {
  if (v.size() < kParallelGrain) return serial::max_value(v);
  double m = -std::numeric_limits<double>::infinity();
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
#pragma omp parallel for schedule(static) reduction(max : m)
  for (std::ptrdiff_t i = 0; i < n; ++i) m = v[i] > m ? v[i] : m;
  return m;
}

void softmax(std::span<const double> v, std::span<double> out) {
  if (v.size() < kParallelGrain) return serial::softmax(v, out);
  const double m = max_value(v);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
  double sum = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : sum)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  const double inv = 1.0 / sum;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] *= inv;
}

void log_softmax(std::span<const double> v, std::span<double> out) {
  if (v.size() < kParallelGrain) return serial::log_softmax(v, out);
  const double m = max_value(v);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(v.size());
  double sum = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : sum)
  for (std::ptrdiff_t i = 0; i < n; ++i) sum += std::exp(v[i] - m);
  const double log_z = m + std::log(sum);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = v[i] - log_z;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace idec::kernels
