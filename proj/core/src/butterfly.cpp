#include "bh/butterfly.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>

#include "serial.hpp"

namespace bh {

namespace {

constexpr double kDegeneracyTol = 1e-12;
constexpr const char* kRecordLabel = "butterfly record";

std::uint64_t read_u64(std::istream& in, std::size_t* offset) {
  return detail::read_u64(in, offset, kRecordLabel);
}

double read_f64(std::istream& in, std::size_t* offset) {
  return detail::read_f64(in, offset, kRecordLabel);
}

using detail::write_f64;
using detail::write_u64;

}  // namespace

bool is_pow2_dim(int n) { return n >= 2 && (n & (n - 1)) == 0; }

int log2_exact(int n) {
  return std::bit_width(static_cast<unsigned>(n)) - 1;
}

bool GivensBlock::is_rotation(double tol) const {
  return std::abs(a - d) <= tol && std::abs(b + c) <= tol &&
         std::abs(a * a + b * b - 1.0) <= tol;
}

std::vector<std::pair<int, int>> pairing(int n, int layer) {
  if (!is_pow2_dim(n))
    throw std::invalid_argument("pairing: n must be a power of two >= 2, got " +
                                std::to_string(n));
  const int levels = log2_exact(n);
  if (layer < 1 || layer > levels)
    throw std::invalid_argument("pairing: layer " + std::to_string(layer) +
                                " out of range 1.." + std::to_string(levels));
  const int p = n >> layer;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) / 2);
  for (int k = 0; k < (1 << (layer - 1)); ++k)
    for (int j = 0; j < p; ++j)
      pairs.emplace_back(2 * p * k + j, 2 * p * k + p + j);
  return pairs;
}

ButterflyLayer::ButterflyLayer(int n, int index)
    : n_(n), index_(index), stride_(n >> index),
      a_(static_cast<std::size_t>(n) / 2, 1.0),
      b_(static_cast<std::size_t>(n) / 2, 0.0),
      c_(static_cast<std::size_t>(n) / 2, 0.0),
      d_(static_cast<std::size_t>(n) / 2, 1.0) {}

GivensBlock ButterflyLayer::block(int t) const {
  const auto [lo, hi] = pair(t);
  const auto u = static_cast<std::size_t>(t);
  return GivensBlock{a_[u], b_[u], c_[u], d_[u], lo, hi};
}

void ButterflyLayer::set_block(int t, double a, double b, double c, double d) {
  const auto u = static_cast<std::size_t>(t);
  a_[u] = a;
  b_[u] = b;
  c_[u] = c;
  d_[u] = d;
}

void ButterflyLayer::apply_in_place(double* x) const {
  const int p = stride_;
  int t = 0;
  for (int base = 0; base < n_; base += 2 * p) {
    for (int j = 0; j < p; ++j, ++t) {
      const double xl = x[base + j];
      const double xh = x[base + p + j];
      x[base + j] = a_[t] * xl + b_[t] * xh;
      x[base + p + j] = c_[t] * xl + d_[t] * xh;
    }
  }
}

void ButterflyLayer::apply_transpose_in_place(double* x) const {
  const int p = stride_;
  int t = 0;
  for (int base = 0; base < n_; base += 2 * p) {
    for (int j = 0; j < p; ++j, ++t) {
      const double xl = x[base + j];
      const double xh = x[base + p + j];
      x[base + j] = a_[t] * xl + c_[t] * xh;
      x[base + p + j] = b_[t] * xl + d_[t] * xh;
    }
  }
}

int ButterflyLayer::project(DegeneratePolicy policy) {
  int reset = 0;
  const int m = block_count();
  for (int t = 0; t < m; ++t) {
    const double a = a_[t], b = b_[t], c = c_[t], d = d_[t];
    const double s = a + d;
    const double r = b - c;
    const double eta = std::sqrt(s * s + r * r);
    const double mag =
        std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
    if (eta < kDegeneracyTol * std::max(1.0, mag)) {
      if (policy == DegeneratePolicy::Abort) {
        const auto [lo, hi] = pair(t);
        throw DegenerateBlockError(index_, lo, hi);
      }
      set_block(t, 1.0, 0.0, 0.0, 1.0);
      ++reset;
      continue;
    }
    a_[t] = s / eta;
    b_[t] = r / eta;
    c_[t] = -r / eta;
    d_[t] = s / eta;
  }
  return reset;
}

ButterflyProduct::ButterflyProduct(int n) : n_(n) {
  if (!is_pow2_dim(n))
    throw std::invalid_argument(
        "ButterflyProduct: n must be a power of two >= 2, got " +
        std::to_string(n));
  const int levels = log2_exact(n);
  layers_.reserve(static_cast<std::size_t>(levels));
  for (int i = 1; i <= levels; ++i) layers_.emplace_back(n, i);
}

ButterflyProduct ButterflyProduct::from_angles(int n,
                                               std::span<const double> angles) {
  ButterflyProduct q(n);
  const std::size_t expected =
      static_cast<std::size_t>(n) * static_cast<std::size_t>(q.layer_count()) / 2;
  if (angles.size() != expected)
    throw std::invalid_argument("from_angles: expected " +
                                std::to_string(expected) + " angles, got " +
                                std::to_string(angles.size()));
  std::size_t idx = 0;
  for (auto& layer : q.layers_) {
    const int m = layer.block_count();
    for (int t = 0; t < m; ++t, ++idx) {
      const double ct = std::cos(angles[idx]);
      const double st = std::sin(angles[idx]);
      layer.set_block(t, ct, -st, st, ct);
    }
  }
  return q;
}

std::size_t ButterflyProduct::parameter_count() const {
  return 4u * (static_cast<std::size_t>(n_) / 2) * layers_.size();
}

void ButterflyProduct::apply_in_place(double* x) const {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    it->apply_in_place(x);
  if (counter_)
    counter_->mul_adds += 2u * static_cast<std::uint64_t>(n_) * layers_.size();
}

void ButterflyProduct::apply_transpose_in_place(double* x) const {
  for (const auto& layer : layers_) layer.apply_transpose_in_place(x);
  if (counter_)
    counter_->mul_adds += 2u * static_cast<std::uint64_t>(n_) * layers_.size();
}

Eigen::VectorXd ButterflyProduct::apply(const Eigen::VectorXd& x) const {
  if (x.size() != n_)
    throw std::invalid_argument("apply: vector has size " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(n_));
  Eigen::VectorXd y = x;
  apply_in_place(y.data());
  return y;
}

Eigen::VectorXd ButterflyProduct::apply_transpose(const Eigen::VectorXd& x) const {
  if (x.size() != n_)
    throw std::invalid_argument("apply_transpose: vector has size " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(n_));
  Eigen::VectorXd y = x;
  apply_transpose_in_place(y.data());
  return y;
}

void ButterflyProduct::project(DegeneratePolicy policy) {
  for (auto& layer : layers_) layer.project(policy);
  relaxed_ = false;
}

Eigen::MatrixXd ButterflyProduct::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n_, n_);
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    Eigen::MatrixXd stage = Eigen::MatrixXd::Identity(n_, n_);
    const int blocks = it->block_count();
    for (int t = 0; t < blocks; ++t) {
      const GivensBlock g = it->block(t);
      stage(g.lo, g.lo) = g.a;
      stage(g.lo, g.hi) = g.b;
      stage(g.hi, g.lo) = g.c;
      stage(g.hi, g.hi) = g.d;
    }
    m = stage * m;
  }
  return m;
}

void ButterflyProduct::save(std::ostream& out) const {
  write_u64(out, static_cast<std::uint64_t>(n_));
  write_u64(out, static_cast<std::uint64_t>(layer_count()));
  write_u64(out, relaxed_ ? 1 : 0);
  for (const auto& layer : layers_) {
    const int m = layer.block_count();
    for (int t = 0; t < m; ++t) {
      const GivensBlock g = layer.block(t);
      write_f64(out, g.a);
      write_f64(out, g.b);
      write_f64(out, g.c);
      write_f64(out, g.d);
    }
  }
}

ButterflyProduct ButterflyProduct::load(std::istream& in) {
  std::size_t offset = 0;
  const std::uint64_t n64 = read_u64(in, &offset);
  if (n64 < 2 || n64 > (1u << 30) || !is_pow2_dim(static_cast<int>(n64)))
    throw FormatError("butterfly record: dimension is not a power of two", 0);
  const int n = static_cast<int>(n64);
  const std::uint64_t levels = read_u64(in, &offset);
  if (levels != static_cast<std::uint64_t>(log2_exact(n)))
    throw FormatError("butterfly record: layer count does not match dimension", 8);
  const std::uint64_t relaxed = read_u64(in, &offset);
  if (relaxed > 1)
    throw FormatError("butterfly record: relaxed flag must be 0 or 1", 16);

  ButterflyProduct q(n);
  q.relaxed_ = relaxed == 1;
  for (auto& layer : q.layers_) {
    const int m = layer.block_count();
    for (int t = 0; t < m; ++t) {
      const std::size_t field_offset = offset;
      const double a = read_f64(in, &offset);
      const double b = read_f64(in, &offset);
      const double c = read_f64(in, &offset);
      const double d = read_f64(in, &offset);
      if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) ||
          !std::isfinite(d))
        throw FormatError("butterfly record: non-finite block entry",
                          field_offset);
      layer.set_block(t, a, b, c, d);
    }
  }
  return q;
}

}  // namespace bh
