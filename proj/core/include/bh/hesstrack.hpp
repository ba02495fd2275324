#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bh/factorization.hpp"
#include "bh/objectives.hpp"

namespace bh {

enum class TrackMode {
  TrackHessian,         // learn H from (du, dg); precondition with the inverse
  TrackInverseHessian,  // learn H^-1 from (dg, du); precondition with forward
  PlainGd,              // baseline: no model, step along the raw gradient
};

enum class BatchPolicy {
  FullBatch,      // gradients over the whole objective
  RecomputePrev,  // fresh minibatch per step, prev gradient recomputed on it
  Reuse,          // keep each minibatch for `batch_reuse` consecutive steps
};

struct TrackerOptions {
  double alpha_q = 0.05;   // rotation-block learning rate for the model update
  double alpha_d = 0.005;  // diagonal learning rate
  double beta = 0.1;       // descent step size

  // Diagonal floor: max(epsilon_rel * median|d|, epsilon_abs), or
  // epsilon_fixed verbatim when it is > 0.
  double epsilon_rel = 1e-4;
  double epsilon_abs = 1e-8;
  double epsilon_fixed = 0.0;

  TrackMode mode = TrackMode::TrackHessian;
  // Step along the model's forward action instead of its inverse in
  // TrackHessian mode (pseudocode-literal variant, for comparison only).
  bool literal_forward_step = false;
  // Backtracking halving on the step length (Armijo, c = 1e-4).
  bool line_search = false;
  DegeneratePolicy degenerate_policy = DegeneratePolicy::ResetIdentity;

  BatchPolicy batch_policy = BatchPolicy::FullBatch;
  int batch_size = 0;   // required > 0 for the minibatch policies
  int batch_reuse = 1;  // consecutive steps per minibatch under Reuse
  std::uint64_t rng_seed = 0;

  void validate(int sample_count) const;
};

struct StepReport {
  int t = 0;
  double loss = 0.0;       // objective (or batch) value at the pre-step point
  double grad_norm = 0.0;  // norm of the gradient used for the step
  // Secant-sample loss of the model update; NaN when no update happened.
  double hessian_train_loss = std::numeric_limits<double>::quiet_NaN();
  double min_d = 0.0;
  double max_d = 0.0;
  double step_scale = 0.0;  // beta actually applied (after any line search)
  bool hessian_updated = false;
};

/// Gradient descent on an Objective that simultaneously fits a butterfly
/// factorization to the Hessian from successive (du, dg) pairs and uses it
/// to precondition each step.
class HessianTracker {
 public:
  HessianTracker(Objective& objective, Eigen::VectorXd u0, TrackerOptions opts);

  StepReport step();
  std::vector<StepReport> run(int steps);

  const Eigen::VectorXd& iterate() const { return u_; }
  const SymmetricFactorization& model() const { return f_; }
  int steps_taken() const { return t_; }
  double epsilon() const;  // current value of the diagonal floor

 private:
  void draw_batch();
  Eigen::VectorXd gradient_at(const Eigen::VectorXd& u) const;
  double value_at(const Eigen::VectorXd& u) const;
  Eigen::VectorXd direction(const Eigen::VectorXd& g, double eps) const;
  bool update_model(const Eigen::VectorXd& du, const Eigen::VectorXd& dg,
                    double* train_loss);

  Objective& obj_;
  TrackerOptions opts_;
  SymmetricFactorization f_;
  Eigen::VectorXd u_;
  Eigen::VectorXd prev_u_;
  Eigen::VectorXd prev_g_;
  bool has_prev_ = false;
  int t_ = 0;
  std::mt19937_64 rng_;
  std::vector<int> batch_;  // empty under FullBatch
  std::vector<int> pool_;   // scratch for without-replacement draws
};

}  // namespace bh
