#pragma once

#include <cstddef>
#include <span>

// Vocabulary-wide kernels used on every decoding step. The functions in
// idec::kernels are OpenMP-parallel above kParallelGrain elements; the
// idec::kernels::serial versions are the plain reference loops the tests
// compare against.
//
// argmax breaks ties toward the lowest index in both variants.

namespace idec::kernels {

inline constexpr std::size_t kParallelGrain = std::size_t{1} << 15;

// out[i] = z[i] - epsilon * z_noisy[i]
void combine(std::span<const double> z, std::span<const double> z_noisy, double epsilon,
             std::span<double> out);
std::size_t argmax(std::span<const double> v);
double max_value(std::span<const double> v);
void softmax(std::span<const double> v, std::span<double> out);
void log_softmax(std::span<const double> v, std::span<double> out);

namespace serial {
void combine(std::span<const double> z, std::span<const double> z_noisy, double epsilon,
             std::span<double> out);
std::size_t argmax(std::span<const double> v);
double max_value(std::span<const double> v);
void softmax(std::span<const double> v, std::span<double> out);
void log_softmax(std::span<const double> v, std::span<double> out);
}  // namespace serial

// Number of threads OpenMP would use for a parallel region (1 without OpenMP).
int max_threads();

}  // namespace idec::kernels
