#include <doctest.h>

#include <random>
#include <vector>

#include "idec/kernels.hpp"

namespace k = idec::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 10.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 rng(77);
  for (std::size_t n : {std::size_t{1}, std::size_t{258}, k::kParallelGrain - 1, k::kParallelGrain,
                        k::kParallelGrain * 3 + 17}) {
    CAPTURE(n);
    const auto z = random_vector(rng, n);
    const auto zn = random_vector(rng, n);
    std::vector<double> a(n), b(n);

    k::combine(z, zn, 0.37, a);
    k::serial::combine(z, zn, 0.37, b);
    CHECK(a == b);

    CHECK(k::argmax(z) == k::serial::argmax(z));
    CHECK(k::max_value(z) == k::serial::max_value(z));

    k::softmax(z, a);
    k::serial::softmax(z, b);
    for (std::size_t i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

    k::log_softmax(z, a);
    k::serial::log_softmax(z, b);
    for (std::size_t i = 0; i < n; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("argmax picks the lowest index among ties") {
  const std::size_t n = k::kParallelGrain * 4;
  std::vector<double> v(n, 0.0);
  for (std::size_t pos : {n - 1, n / 2 + 3, n / 3, std::size_t{5}}) {
    v[pos] = 1.0;
    CHECK(k::argmax(v) == k::serial::argmax(v));
  }
  CHECK(k::argmax(v) == 5);
  std::vector<double> flat(n, -2.5);
  CHECK(k::argmax(flat) == 0);
  CHECK(k::serial::argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
}

TEST_CASE("softmax sums to one and survives large logits") {
  std::vector<double> v = {1000.0, 999.0, -1000.0};
  std::vector<double> p(3), lp(3);
  k::softmax(v, p);
  k::log_softmax(v, lp);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  CHECK(lp[2] < -1000.0);
  CHECK(std::isfinite(lp[2]));
  CHECK(k::max_threads() >= 1);
}
