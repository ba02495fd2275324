#include "bh/hesstrack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bh {

namespace {

constexpr double kSecantGuard = 1e-14;
constexpr double kArmijoC = 1e-4;
constexpr int kMaxHalvings = 30;

double median_abs(const Eigen::VectorXd& d) {
  std::vector<double> mag(static_cast<std::size_t>(d.size()));
  for (int i = 0; i < d.size(); ++i) mag[static_cast<std::size_t>(i)] = std::abs(d[i]);
  const auto mid = mag.begin() + mag.size() / 2;
  std::nth_element(mag.begin(), mid, mag.end());
  if (mag.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(mag.begin(), mid);
  return (lo + hi) / 2.0;
}

}  // namespace

void TrackerOptions::validate(int sample_count) const {
  if (!(alpha_q > 0.0) || !(alpha_d > 0.0))
    throw std::invalid_argument("TrackerOptions: alpha must be positive");
  if (!(beta >= 0.0))
    throw std::invalid_argument("TrackerOptions: beta must be non-negative");
  if (!(epsilon_rel > 0.0) || !(epsilon_abs > 0.0))
    throw std::invalid_argument("TrackerOptions: epsilon bounds must be positive");
  if (epsilon_fixed < 0.0)
    throw std::invalid_argument("TrackerOptions: epsilon_fixed must be >= 0");
  if (batch_policy != BatchPolicy::FullBatch) {
    if (sample_count == 0)
      throw std::invalid_argument(
          "TrackerOptions: objective has no minibatch structure");
    if (batch_size < 1 || batch_size > sample_count)
      throw std::invalid_argument("TrackerOptions: batch_size out of range");
    if (batch_policy == BatchPolicy::Reuse && batch_reuse < 1)
      throw std::invalid_argument("TrackerOptions: batch_reuse must be >= 1");
  }
}

namespace {

int tracked_dim(const Objective& objective) {
  const int n = objective.dim();
  if (n < 2 || (n & (n - 1)) != 0)
    throw std::invalid_argument(
        "HessianTracker: objective dimension must be a power of two >= 2, got " +
        std::to_string(n));
  return n;
}

}  // namespace

HessianTracker::HessianTracker(Objective& objective, Eigen::VectorXd u0,
                               TrackerOptions opts)
    : obj_(objective),
      opts_(opts),
      f_(SymmetricFactorization::identity(tracked_dim(objective))),
      u_(std::move(u0)),
      rng_(opts.rng_seed) {
  if (u_.size() != obj_.dim())
    throw std::invalid_argument("HessianTracker: u0 has wrong dimension");
  opts_.validate(obj_.sample_count());
}

double HessianTracker::epsilon() const {
  if (opts_.epsilon_fixed > 0.0) return opts_.epsilon_fixed;
  return std::max(opts_.epsilon_rel * median_abs(f_.diagonal()),
                  opts_.epsilon_abs);
}

void HessianTracker::draw_batch() {
  const int m = obj_.sample_count();
  if (pool_.empty()) {
    pool_.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) pool_[static_cast<std::size_t>(i)] = i;
  }
  // First batch_size entries of a partial Fisher-Yates pass, kept in
  // ascending order so a batch of everything evaluates exactly like the
  // full-dataset gradient.
  for (int i = 0; i < opts_.batch_size; ++i) {
    std::uniform_int_distribution<int> pick(i, m - 1);
    std::swap(pool_[static_cast<std::size_t>(i)],
              pool_[static_cast<std::size_t>(pick(rng_))]);
  }
  batch_.assign(pool_.begin(), pool_.begin() + opts_.batch_size);
  std::sort(batch_.begin(), batch_.end());
}

Eigen::VectorXd HessianTracker::gradient_at(const Eigen::VectorXd& u) const {
  return batch_.empty() ? obj_.gradient(u) : obj_.batch_gradient(u, batch_);
}

double HessianTracker::value_at(const Eigen::VectorXd& u) const {
  return batch_.empty() ? obj_.value(u) : obj_.batch_value(u, batch_);
}

Eigen::VectorXd HessianTracker::direction(const Eigen::VectorXd& g,
                                          double eps) const {
  switch (opts_.mode) {
    case TrackMode::PlainGd:
      return g;
    case TrackMode::TrackHessian:
      if (!opts_.literal_forward_step) return f_.inverse_apply(g, eps);
      break;
    case TrackMode::TrackInverseHessian:
      break;
  }
  // Forward action with the floored diagonal (model taken as the step map).
  Eigen::VectorXd y = g;
  f_.q().apply_transpose_in_place(y.data());
  for (int i = 0; i < y.size(); ++i) y[i] *= std::max(f_.diagonal()[i], eps);
  f_.q().apply_in_place(y.data());
  return y;
}

bool HessianTracker::update_model(const Eigen::VectorXd& du,
                                  const Eigen::VectorXd& dg,
                                  double* train_loss) {
  // Normalizer: the secant input's own norm, so the sample feeds the model a
  // unit-length input regardless of raw step scale.
  const bool inverse = opts_.mode == TrackMode::TrackInverseHessian;
  const Eigen::VectorXd& x_raw = inverse ? dg : du;
  const Eigen::VectorXd& y_raw = inverse ? du : dg;
  const double norm = x_raw.norm();
  if (!(norm >= kSecantGuard)) return false;
  if (!du.allFinite() || !dg.allFinite()) return false;

  TrainSample sample{x_raw / norm, y_raw / norm};
  *train_loss = sgd_step(f_, std::span<const TrainSample>(&sample, 1),
                         opts_.alpha_q, opts_.alpha_d, opts_.degenerate_policy);

  // Negative diagonal entries are replaced by the floor; positive ones are
  // left alone (the inverse clamps small positives on its own).
  const double eps = epsilon();
  Eigen::VectorXd& d = f_.diagonal();
  for (int i = 0; i < d.size(); ++i)
    if (d[i] < 0.0) d[i] = eps;
  return true;
}

StepReport HessianTracker::step() {
  bool batch_changed = false;
  if (opts_.batch_policy == BatchPolicy::RecomputePrev) {
    draw_batch();
    batch_changed = true;
  } else if (opts_.batch_policy == BatchPolicy::Reuse) {
    if (t_ % opts_.batch_reuse == 0) {
      draw_batch();
      batch_changed = true;
    }
  }

  const Eigen::VectorXd g = gradient_at(u_);
  if (!g.allFinite())
    throw DivergedError("non-finite gradient at step " + std::to_string(t_));

  StepReport report;
  report.t = t_;
  report.loss = value_at(u_);
  report.grad_norm = g.norm();

  if (opts_.mode != TrackMode::PlainGd && has_prev_) {
    // dg must come from the same function the current gradient used; on a
    // batch change the previous point's gradient is recomputed on the new
    // batch (this is the extra evaluation the reuse policy amortizes).
    const Eigen::VectorXd g_prev =
        (batch_changed && opts_.batch_policy != BatchPolicy::FullBatch)
            ? gradient_at(prev_u_)
            : prev_g_;
    double train_loss = 0.0;
    if (update_model(u_ - prev_u_, g - g_prev, &train_loss)) {
      report.hessian_updated = true;
      report.hessian_train_loss = train_loss;
    }
  }
  report.min_d = f_.diagonal().minCoeff();
  report.max_d = f_.diagonal().maxCoeff();

  const Eigen::VectorXd dir = direction(g, epsilon());
  double scale = opts_.beta;
  if (opts_.line_search) {
    const double slope = g.dot(dir);
    const double base = report.loss;
    for (int k = 0; k < kMaxHalvings; ++k) {
      if (value_at(u_ - scale * dir) <= base - kArmijoC * scale * slope) break;
      scale /= 2.0;
    }
  }
  report.step_scale = scale;

  prev_u_ = u_;
  prev_g_ = g;
  has_prev_ = true;
  u_ -= scale * dir;
  ++t_;
  return report;
}

std::vector<StepReport> HessianTracker::run(int steps) {
  std::vector<StepReport> out;
  out.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  for (int i = 0; i < steps; ++i) out.push_back(step());
  return out;
}

}  // namespace bh
