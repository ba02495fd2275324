#include "bh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bh::synth {

namespace {

// First k entries of a Fisher-Yates pass over 0..n-1, sorted.  Spelled out
// here (instead of std::sample) so the draw is identical on every toolchain.
std::vector<int> draw_without_replacement(int n, int k, std::mt19937_64& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(pool[static_cast<std::size_t>(i)],
              pool[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<int> out(pool.begin(), pool.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n < 2 || (n & (n - 1)) != 0)
    throw std::invalid_argument("SyntheticSpec: n must be a power of two >= 2, got " +
                                std::to_string(n));
  if (n_mu < 0 || n_mu > n)
    throw std::invalid_argument("SyntheticSpec: n_mu must be in [0, n]");
  if (!(bulk_std >= 0.0) || !(dominant_var >= 0.0))
    throw std::invalid_argument("SyntheticSpec: spreads must be non-negative");
}

Eigen::MatrixXd haar_rotation(int n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("haar_rotation: n must be >= 1");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd z(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) z(i, j) = gauss(rng);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  if (q.determinant() < 0.0) q.col(n - 1) = -q.col(n - 1);
  return q;
}

Eigen::MatrixXd haar_rotation(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return haar_rotation(n, rng);
}

SyntheticHessian synthetic_hessian(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  SyntheticHessian out;
  out.rotation = haar_rotation(spec.n, rng);
  out.dominant = draw_without_replacement(spec.n, spec.n_mu, rng);

  std::vector<char> is_dominant(static_cast<std::size_t>(spec.n), 0);
  for (int i : out.dominant) is_dominant[static_cast<std::size_t>(i)] = 1;

  const double dominant_std = std::sqrt(spec.dominant_var);
  std::normal_distribution<double> gauss(0.0, 1.0);
  out.eigenvalues.resize(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    const double mu = is_dominant[static_cast<std::size_t>(i)]
                          ? spec.dominant_mean + dominant_std * gauss(rng)
                          : spec.bulk_std * gauss(rng);
    out.eigenvalues[i] = std::abs(mu);
  }

  out.h = out.rotation * out.eigenvalues.asDiagonal() * out.rotation.transpose();
  return out;
}

std::vector<Eigen::VectorXd> sample_unit_sphere(int n, int count,
                                                std::uint64_t seed) {
  if (n < 1 || count < 0)
    throw std::invalid_argument("sample_unit_sphere: bad dimensions");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    Eigen::VectorXd x(n);
    double norm2 = 0.0;
    do {
      for (int i = 0; i < n; ++i) x[i] = gauss(rng);
      norm2 = x.squaredNorm();
    } while (norm2 == 0.0);
    out.push_back(x / std::sqrt(norm2));
  }
  return out;
}

std::vector<Eigen::VectorXd> sample_hypercube(int n, int count,
                                              std::uint64_t seed,
                                              double half_width) {
  if (n < 1 || count < 0)
    throw std::invalid_argument("sample_hypercube: bad dimensions");
  if (!(half_width > 0.0))
    throw std::invalid_argument("sample_hypercube: half_width must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-half_width, half_width);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = unif(rng);
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace bh::synth
