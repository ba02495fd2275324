// Microbenchmarks for the O(n log n) operator kernels against a dense
// matvec baseline at the same dimension.
#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "bh/butterfly.hpp"
#include "bh/factorization.hpp"

namespace {

bh::SymmetricFactorization make_model(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-3.14159, 3.14159);
  const int half_layers = bh::log2_exact(n);
  std::vector<double> angles(static_cast<std::size_t>(n / 2) * half_layers);
  for (auto& a : angles) a = angle(rng);
  bh::ButterflyProduct q = bh::ButterflyProduct::from_angles(n, angles);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = 1.0 + std::abs(gauss(rng));
  return bh::SymmetricFactorization(std::move(q), std::move(d));
}

Eigen::VectorXd make_input(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = gauss(rng);
  return x;
}

void BM_ButterflyApply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto f = make_model(n, 7);
  const Eigen::VectorXd x = make_input(n, 11);
  for (auto _ : state) {
    Eigen::VectorXd y = f.q().apply(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetComplexityN(n);
}

void BM_Forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto f = make_model(n, 7);
  const Eigen::VectorXd x = make_input(n, 11);
  for (auto _ : state) {
    Eigen::VectorXd y = f.forward(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetComplexityN(n);
}

void BM_QuadraticForm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto f = make_model(n, 7);
  const Eigen::VectorXd x = make_input(n, 11);
  double acc = 0.0;
  for (auto _ : state) {
    acc += f.quadratic_form(x);
    benchmark::DoNotOptimize(acc);
  }
  state.SetComplexityN(n);
}

void BM_InverseApply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto f = make_model(n, 7);
  const Eigen::VectorXd x = make_input(n, 11);
  for (auto _ : state) {
    Eigen::VectorXd y = f.inverse_apply(x);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetComplexityN(n);
}

void BM_DenseMatvec(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(13);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd h(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) h(i, j) = gauss(rng);
  h = (h + h.transpose()).eval();
  const Eigen::VectorXd x = make_input(n, 11);
  for (auto _ : state) {
    Eigen::VectorXd y = h * x;
    benchmark::DoNotOptimize(y.data());
  }
  state.SetComplexityN(n);
}

}  // namespace

BENCHMARK(BM_ButterflyApply)->RangeMultiplier(4)->Range(64, 4096)->Complexity();
BENCHMARK(BM_Forward)->RangeMultiplier(4)->Range(64, 4096)->Complexity();
BENCHMARK(BM_QuadraticForm)->RangeMultiplier(4)->Range(64, 4096)->Complexity();
BENCHMARK(BM_InverseApply)->RangeMultiplier(4)->Range(64, 4096)->Complexity();
BENCHMARK(BM_DenseMatvec)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

BENCHMARK_MAIN();
