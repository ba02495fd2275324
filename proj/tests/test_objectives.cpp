#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "bh/objectives.hpp"

namespace {

Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = gauss(rng);
  return x;
}

// Central finite-difference gradient check, worst relative error.
double fd_worst(const bh::Objective& obj, const Eigen::VectorXd& u, double h) {
  const Eigen::VectorXd g = obj.gradient(u);
  double worst = 0.0;
  Eigen::VectorXd probe = u;
  for (int i = 0; i < u.size(); ++i) {
    probe[i] = u[i] + h;
    const double up = obj.value(probe);
    probe[i] = u[i] - h;
    const double down = obj.value(probe);
    probe[i] = u[i];
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(g[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(g[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("quadratic objective matches its closed form") {
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 1.0, 1.0, 3.0;
  bh::QuadraticObjective obj(a);
  const Eigen::VectorXd u = Eigen::Vector2d(1.0, -1.0);
  CHECK(obj.value(u) == doctest::Approx(0.5 * u.dot(a * u)));
  CHECK((obj.gradient(u) - a * u).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(obj.value(Eigen::Vector2d::Zero()) == 0.0);
}

TEST_CASE("quadratic objective symmetrizes its input matrix") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 4.0, 0.0, 1.0;  // asymmetric input
  bh::QuadraticObjective obj(a);
  CHECK((obj.matrix() - obj.matrix().transpose()).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(fd_worst(obj, random_vector(2, 1), 1e-6) < 1e-7);
}

TEST_CASE("spd instances span exactly the requested condition number") {
  const auto obj = bh::QuadraticObjective::spd(16, 100.0, 3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(obj.matrix());
  CHECK(eig.eigenvalues().minCoeff() == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(eig.eigenvalues().maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
  for (int i = 0; i < 16; ++i) {
    CHECK(eig.eigenvalues()[i] >= 0.01 - 1e-12);
    CHECK(eig.eigenvalues()[i] <= 1.0 + 1e-12);
  }
}

TEST_CASE("least squares value, gradient, and hessian are consistent") {
  const auto obj = bh::LeastSquaresObjective::random(8, 32, 0.1, 5);
  const Eigen::VectorXd u = random_vector(8, 6);
  const Eigen::VectorXd r = obj.design() * u - obj.target();
  CHECK(obj.value(u) == doctest::Approx(r.squaredNorm() / (2.0 * 32)));
  CHECK(fd_worst(obj, u, 1e-6) < 1e-7);

  // Constant Hessian: gradient differences obey dg = H du exactly.
  const Eigen::VectorXd v = random_vector(8, 7);
  const Eigen::VectorXd dg = obj.gradient(v) - obj.gradient(u);
  CHECK((dg - obj.hessian() * (v - u)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("batch gradients over every sample equal the full gradient") {
  const auto obj = bh::LeastSquaresObjective::random(4, 16, 0.2, 9);
  std::vector<int> all(16);
  std::iota(all.begin(), all.end(), 0);
  const Eigen::VectorXd u = random_vector(4, 10);
  CHECK(obj.batch_gradient(u, all) == obj.gradient(u));
  CHECK(obj.batch_value(u, all) == obj.value(u));

  std::vector<int> front{0, 1, 2, 3, 4, 5, 6, 7}, back{8, 9, 10, 11, 12, 13, 14, 15};
  const Eigen::VectorXd mean =
      0.5 * (obj.batch_gradient(u, front) + obj.batch_gradient(u, back));
  CHECK((mean - obj.gradient(u)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("logistic objective is finite and correct at extreme margins") {
  const auto obj = bh::LogisticObjective::random(6, 24, 1e-3, 11);
  const Eigen::VectorXd u = random_vector(6, 12);
  CHECK(fd_worst(obj, u, 1e-6) < 1e-6);

  // Margins around +-1e3 overflow a naive exp-based form.
  const Eigen::VectorXd huge = 1e3 * random_vector(6, 13);
  CHECK(std::isfinite(obj.value(huge)));
  CHECK(obj.gradient(huge).allFinite());
}

TEST_CASE("logistic labels must be plus or minus one") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  Eigen::VectorXd labels = Eigen::Vector3d(1.0, -1.0, 0.0);
  CHECK_THROWS_AS(bh::LogisticObjective(x, labels, 1e-3),
                  std::invalid_argument);
}

TEST_CASE("rosenbrock has its global minimum at the ones vector") {
  bh::RosenbrockObjective obj(6);
  CHECK(obj.value(Eigen::VectorXd::Ones(6)) == 0.0);
  CHECK(obj.gradient(Eigen::VectorXd::Ones(6)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fd_worst(obj, random_vector(6, 14) * 0.5, 1e-6) < 1e-6);
  CHECK_THROWS_AS(bh::RosenbrockObjective(1), std::invalid_argument);
}

TEST_CASE("gradient evaluations are counted one per call") {
  const auto obj = bh::LeastSquaresObjective::random(4, 8, 0.1, 15);
  const Eigen::VectorXd u = random_vector(4, 16);
  CHECK(obj.gradient_evals() == 0);
  obj.gradient(u);
  obj.gradient(u);
  std::vector<int> batch{0, 3};
  obj.batch_gradient(u, batch);
  CHECK(obj.gradient_evals() == 3);
  obj.value(u);  // values are not gradient evaluations
  CHECK(obj.gradient_evals() == 3);
}

TEST_CASE("objectives validate their inputs") {
  const auto obj = bh::LeastSquaresObjective::random(4, 8, 0.1, 17);
  CHECK_THROWS_AS(obj.value(random_vector(3, 18)), std::invalid_argument);
  std::vector<int> bad{0, 99};
  CHECK_THROWS_AS(obj.batch_gradient(random_vector(4, 19), bad),
                  std::out_of_range);
  bh::QuadraticObjective q(Eigen::MatrixXd::Identity(2, 2));
  std::vector<int> batch{0};
  CHECK_THROWS_AS(q.batch_gradient(random_vector(2, 20), batch),
                  std::logic_error);
}
