#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bh {

/// Differentiable scalar objective ell(u).  Objectives built from a sample
/// set additionally expose minibatch forms; sample_count() == 0 means the
/// objective has no such structure.  gradient_evals() counts every gradient
/// computation (full or batch), which is what optimizer cost comparisons use.
class Objective {
 public:
  virtual ~Objective() = default;

  int dim() const { return n_; }
  int sample_count() const { return m_; }

  double value(const Eigen::VectorXd& u) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const;
  double batch_value(const Eigen::VectorXd& u, std::span<const int> batch) const;
  Eigen::VectorXd batch_gradient(const Eigen::VectorXd& u,
                                 std::span<const int> batch) const;

  std::uint64_t gradient_evals() const { return gradient_evals_; }
  void reset_gradient_evals() { gradient_evals_ = 0; }

 protected:
  Objective(int n, int samples);

 private:
  virtual double do_value(const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd do_gradient(const Eigen::VectorXd& u) const = 0;
  virtual double do_batch_value(const Eigen::VectorXd& u,
                                std::span<const int> batch) const;
  virtual Eigen::VectorXd do_batch_gradient(const Eigen::VectorXd& u,
                                            std::span<const int> batch) const;
  void check(const Eigen::VectorXd& u, std::span<const int> batch,
             bool need_samples) const;

  int n_;
  int m_;
  mutable std::uint64_t gradient_evals_ = 0;
};

/// ell(u) = 1/2 u^T A u with A symmetric; minimum 0 at the origin.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(Eigen::MatrixXd a);
  // Random SPD instance with eigenvalues log-spaced on [1/cond, 1].
  static QuadraticObjective spd(int n, double cond, std::uint64_t seed);
  const Eigen::MatrixXd& matrix() const { return a_; }

 private:
  double do_value(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd do_gradient(const Eigen::VectorXd& u) const override;
  Eigen::MatrixXd a_;
};

/// ell_A(u) = 1/(2|A|) * ||X_A u - y_A||^2 over sample rows of X.
class LeastSquaresObjective final : public Objective {
 public:
  LeastSquaresObjective(Eigen::MatrixXd x, Eigen::VectorXd y);
  static LeastSquaresObjective random(int n, int m, double noise_std,
                                      std::uint64_t seed);
  const Eigen::MatrixXd& design() const { return x_; }
  const Eigen::VectorXd& target() const { return y_; }
  Eigen::MatrixXd hessian() const;  // X^T X / m, constant in u

 private:
  double do_value(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd do_gradient(const Eigen::VectorXd& u) const override;
  double do_batch_value(const Eigen::VectorXd& u,
                        std::span<const int> batch) const override;
  Eigen::VectorXd do_batch_gradient(const Eigen::VectorXd& u,
                                    std::span<const int> batch) const override;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

/// ell2-regularized logistic regression with +-1 labels:
/// ell_A(u) = 1/|A| * sum log(1 + exp(-y_a x_a^T u)) + reg/2 ||u||^2.
class LogisticObjective final : public Objective {
 public:
  LogisticObjective(Eigen::MatrixXd x, Eigen::VectorXd labels, double reg);
  static LogisticObjective random(int n, int m, double reg, std::uint64_t seed);
  double regularization() const { return reg_; }

 private:
  double do_value(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd do_gradient(const Eigen::VectorXd& u) const override;
  double do_batch_value(const Eigen::VectorXd& u,
                        std::span<const int> batch) const override;
  Eigen::VectorXd do_batch_gradient(const Eigen::VectorXd& u,
                                    std::span<const int> batch) const override;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  double reg_;
};

/// Chained Rosenbrock: sum over i of 100 (u_{i+1} - u_i^2)^2 + (1 - u_i)^2.
/// Non-convex with a strongly position-dependent Hessian.
class RosenbrockObjective final : public Objective {
 public:
  explicit RosenbrockObjective(int n);

 private:
  double do_value(const Eigen::VectorXd& u) const override;
  Eigen::VectorXd do_gradient(const Eigen::VectorXd& u) const override;
};

}  // namespace bh
