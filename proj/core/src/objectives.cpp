#include "bh/objectives.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "bh/synth.hpp"

namespace bh {

namespace {

// log(1 + exp(-z)) without overflow for large |z|.
double softplus_neg(double z) {
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = gauss(rng);
  return m;
}

}  // namespace

Objective::Objective(int n, int samples) : n_(n), m_(samples) {
  if (n < 1) throw std::invalid_argument("Objective: dimension must be >= 1");
  if (samples < 0) throw std::invalid_argument("Objective: negative sample count");
}

void Objective::check(const Eigen::VectorXd& u, std::span<const int> batch,
                      bool need_samples) const {
  if (u.size() != n_)
    throw std::invalid_argument("Objective: point has size " +
                                std::to_string(u.size()) + ", expected " +
                                std::to_string(n_));
  if (!need_samples) return;
  if (m_ == 0)
    throw std::logic_error("Objective: no minibatch structure");
  if (batch.empty()) throw std::invalid_argument("Objective: empty batch");
  for (int idx : batch)
    if (idx < 0 || idx >= m_)
      throw std::out_of_range("Objective: batch index " + std::to_string(idx) +
                              " outside [0, " + std::to_string(m_) + ")");
}

double Objective::value(const Eigen::VectorXd& u) const {
  check(u, {}, false);
  return do_value(u);
}

Eigen::VectorXd Objective::gradient(const Eigen::VectorXd& u) const {
  check(u, {}, false);
  ++gradient_evals_;
  return do_gradient(u);
}

double Objective::batch_value(const Eigen::VectorXd& u,
                              std::span<const int> batch) const {
  check(u, batch, true);
  return do_batch_value(u, batch);
}

Eigen::VectorXd Objective::batch_gradient(const Eigen::VectorXd& u,
                                          std::span<const int> batch) const {
  check(u, batch, true);
  ++gradient_evals_;
  return do_batch_gradient(u, batch);
}

double Objective::do_batch_value(const Eigen::VectorXd&,
                                 std::span<const int>) const {
  throw std::logic_error("Objective: minibatch form not implemented");
}

Eigen::VectorXd Objective::do_batch_gradient(const Eigen::VectorXd&,
                                             std::span<const int>) const {
  throw std::logic_error("Objective: minibatch form not implemented");
}

QuadraticObjective::QuadraticObjective(Eigen::MatrixXd a)
    : Objective(static_cast<int>(a.rows()), 0), a_(std::move(a)) {
  if (a_.rows() != a_.cols())
    throw std::invalid_argument("QuadraticObjective: matrix must be square");
  a_ = ((a_ + a_.transpose()) / 2.0).eval();
}

QuadraticObjective QuadraticObjective::spd(int n, double cond,
                                           std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("QuadraticObjective::spd: n must be >= 1");
  if (!(cond >= 1.0))
    throw std::invalid_argument("QuadraticObjective::spd: cond must be >= 1");
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd r = synth::haar_rotation(n, rng);
  Eigen::VectorXd lambda(n);
  for (int i = 0; i < n; ++i) {
    const double t = n == 1 ? 1.0 : static_cast<double>(i) / (n - 1);
    lambda[i] = std::pow(cond, t - 1.0);  // 1/cond .. 1, log-spaced
  }
  return QuadraticObjective(r * lambda.asDiagonal() * r.transpose());
}

double QuadraticObjective::do_value(const Eigen::VectorXd& u) const {
  return 0.5 * u.dot(a_ * u);
}

Eigen::VectorXd QuadraticObjective::do_gradient(const Eigen::VectorXd& u) const {
  return a_ * u;
}

LeastSquaresObjective::LeastSquaresObjective(Eigen::MatrixXd x,
                                             Eigen::VectorXd y)
    : Objective(static_cast<int>(x.cols()), static_cast<int>(x.rows())),
      x_(std::move(x)),
      y_(std::move(y)) {
  if (x_.rows() != y_.size())
    throw std::invalid_argument(
        "LeastSquaresObjective: row/target count mismatch");
  if (x_.rows() < 1)
    throw std::invalid_argument("LeastSquaresObjective: needs at least one row");
}

LeastSquaresObjective LeastSquaresObjective::random(int n, int m,
                                                    double noise_std,
                                                    std::uint64_t seed) {
  if (n < 1 || m < 1)
    throw std::invalid_argument("LeastSquaresObjective::random: bad shape");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd x = gaussian_matrix(m, n, rng);
  const Eigen::MatrixXd w = gaussian_matrix(n, 1, rng);
  Eigen::VectorXd y = x * w.col(0);
  if (noise_std > 0.0) {
    std::normal_distribution<double> gauss(0.0, noise_std);
    for (int i = 0; i < m; ++i) y[i] += gauss(rng);
  }
  return LeastSquaresObjective(std::move(x), std::move(y));
}

Eigen::MatrixXd LeastSquaresObjective::hessian() const {
  return x_.transpose() * x_ / static_cast<double>(x_.rows());
}

double LeastSquaresObjective::do_value(const Eigen::VectorXd& u) const {
  double acc = 0.0;
  for (int i = 0; i < x_.rows(); ++i) {
    const double r = x_.row(i).dot(u) - y_[i];
    acc += r * r;
  }
  return acc / (2.0 * static_cast<double>(x_.rows()));
}

Eigen::VectorXd LeastSquaresObjective::do_gradient(const Eigen::VectorXd& u) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (int i = 0; i < x_.rows(); ++i)
    g += (x_.row(i).dot(u) - y_[i]) * x_.row(i).transpose();
  return g / static_cast<double>(x_.rows());
}

double LeastSquaresObjective::do_batch_value(const Eigen::VectorXd& u,
                                             std::span<const int> batch) const {
  double acc = 0.0;
  for (int i : batch) {
    const double r = x_.row(i).dot(u) - y_[i];
    acc += r * r;
  }
  return acc / (2.0 * static_cast<double>(batch.size()));
}

Eigen::VectorXd LeastSquaresObjective::do_batch_gradient(
    const Eigen::VectorXd& u, std::span<const int> batch) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (int i : batch) g += (x_.row(i).dot(u) - y_[i]) * x_.row(i).transpose();
  return g / static_cast<double>(batch.size());
}

LogisticObjective::LogisticObjective(Eigen::MatrixXd x, Eigen::VectorXd labels,
                                     double reg)
    : Objective(static_cast<int>(x.cols()), static_cast<int>(x.rows())),
      x_(std::move(x)),
      y_(std::move(labels)),
      reg_(reg) {
  if (x_.rows() != y_.size())
    throw std::invalid_argument("LogisticObjective: row/label count mismatch");
  if (x_.rows() < 1)
    throw std::invalid_argument("LogisticObjective: needs at least one row");
  if (!(reg_ >= 0.0))
    throw std::invalid_argument("LogisticObjective: reg must be >= 0");
  for (int i = 0; i < y_.size(); ++i)
    if (y_[i] != 1.0 && y_[i] != -1.0)
      throw std::invalid_argument("LogisticObjective: labels must be +-1");
}

LogisticObjective LogisticObjective::random(int n, int m, double reg,
                                            std::uint64_t seed) {
  if (n < 1 || m < 1)
    throw std::invalid_argument("LogisticObjective::random: bad shape");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd x = gaussian_matrix(m, n, rng);
  const Eigen::MatrixXd w = gaussian_matrix(n, 1, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    const double margin = x.row(i).dot(w.col(0)) + 0.5 * gauss(rng);
    y[i] = margin >= 0.0 ? 1.0 : -1.0;
  }
  return LogisticObjective(std::move(x), std::move(y), reg);
}

double LogisticObjective::do_value(const Eigen::VectorXd& u) const {
  double acc = 0.0;
  for (int i = 0; i < x_.rows(); ++i) acc += softplus_neg(y_[i] * x_.row(i).dot(u));
  return acc / static_cast<double>(x_.rows()) + 0.5 * reg_ * u.squaredNorm();
}

Eigen::VectorXd LogisticObjective::do_gradient(const Eigen::VectorXd& u) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (int i = 0; i < x_.rows(); ++i) {
    const double z = y_[i] * x_.row(i).dot(u);
    const double s = 1.0 / (1.0 + std::exp(z));  // sigma(-z)
    g -= (y_[i] * s) * x_.row(i).transpose();
  }
  return g / static_cast<double>(x_.rows()) + reg_ * u;
}

double LogisticObjective::do_batch_value(const Eigen::VectorXd& u,
                                         std::span<const int> batch) const {
  double acc = 0.0;
  for (int i : batch) acc += softplus_neg(y_[i] * x_.row(i).dot(u));
  return acc / static_cast<double>(batch.size()) + 0.5 * reg_ * u.squaredNorm();
}

Eigen::VectorXd LogisticObjective::do_batch_gradient(
    const Eigen::VectorXd& u, std::span<const int> batch) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (int i : batch) {
    const double z = y_[i] * x_.row(i).dot(u);
    const double s = 1.0 / (1.0 + std::exp(z));
    g -= (y_[i] * s) * x_.row(i).transpose();
  }
  return g / static_cast<double>(batch.size()) + reg_ * u;
}

RosenbrockObjective::RosenbrockObjective(int n) : Objective(n, 0) {
  if (n < 2)
    throw std::invalid_argument("RosenbrockObjective: dimension must be >= 2");
}

double RosenbrockObjective::do_value(const Eigen::VectorXd& u) const {
  double acc = 0.0;
  for (int i = 0; i + 1 < u.size(); ++i) {
    const double a = u[i + 1] - u[i] * u[i];
    const double b = 1.0 - u[i];
    acc += 100.0 * a * a + b * b;
  }
  return acc;
}

Eigen::VectorXd RosenbrockObjective::do_gradient(const Eigen::VectorXd& u) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
  for (int i = 0; i + 1 < u.size(); ++i) {
    const double a = u[i + 1] - u[i] * u[i];
    g[i] += -400.0 * a * u[i] - 2.0 * (1.0 - u[i]);
    g[i + 1] += 200.0 * a;
  }
  return g;
}

}  // namespace bh
