// Serial reference vs OpenMP kernels on vocabulary-sized logit vectors and
// batched Rouge-L scoring. Prints one row per (kernel, size).

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "idec/kernels.hpp"
#include "idec/metrics.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* kernel, std::size_t n, double serial_ms, double parallel_ms) {
  std::printf("%-14s %10zu %12.4f %12.4f %8.2fx\n", kernel, n, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  namespace k = idec::kernels;
  std::printf("threads: %d\n", k::max_threads());
  std::printf("%-14s %10s %12s %12s %9s\n", "kernel", "n", "serial_ms", "omp_ms", "speedup");

  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  volatile double sink = 0.0;

  for (std::size_t n : {32000ul, 128000ul, 256000ul, 1000000ul}) {
    std::vector<double> z(n), zn(n), out(n);
    for (auto& v : z) v = dist(rng);
    for (auto& v : zn) v = dist(rng);
    const int reps = n >= 1000000 ? 20 : 100;

    row("combine", n, time_ms([&] { k::serial::combine(z, zn, 0.3, out); }, reps),
        time_ms([&] { k::combine(z, zn, 0.3, out); }, reps));
    row("argmax", n, time_ms([&] { sink = sink + double(k::serial::argmax(z)); }, reps),
        time_ms([&] { sink = sink + double(k::argmax(z)); }, reps));
    row("softmax", n, time_ms([&] { k::serial::softmax(z, out); }, reps),
        time_ms([&] { k::softmax(z, out); }, reps));
    row("log_softmax", n, time_ms([&] { k::serial::log_softmax(z, out); }, reps),
        time_ms([&] { k::log_softmax(z, out); }, reps));
  }

  const std::vector<std::string> vocab = {"the", "cat", "sat", "on", "mat", "a", "dog", "ran",
                                          "fast", "slow", "big", "small", "red", "blue"};
  for (std::size_t pairs : {1000ul, 10000ul}) {
    std::vector<std::string> cands(pairs);
    std::vector<std::vector<std::string>> refs(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
      auto sentence = [&](std::size_t len) {
        std::string s;
        for (std::size_t t = 0; t < len; ++t) s += vocab[rng() % vocab.size()] + " ";
        return s;
      };
      cands[i] = sentence(20 + rng() % 40);
      refs[i] = {sentence(20 + rng() % 40), sentence(20 + rng() % 40)};
    }
    row("rouge_l_batch", pairs,
        time_ms([&] { sink = sink + idec::serial::rouge_l_batch(cands, refs)[0]; }, 5),
        time_ms([&] { sink = sink + idec::rouge_l_batch(cands, refs)[0]; }, 5));
  }
  return 0;
}
