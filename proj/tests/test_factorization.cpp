#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "bh/errors.hpp"
#include "bh/factorization.hpp"
#include "bh/synth.hpp"

namespace {

bh::SymmetricFactorization random_relaxed_model(int n, std::uint64_t seed,
                                                double d_scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  bh::ButterflyProduct q(n);
  for (int i = 0; i < q.layer_count(); ++i) {
    auto& layer = q.layer(i);
    for (int t = 0; t < layer.block_count(); ++t)
      layer.set_block(t, gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  }
  q.mark_relaxed();
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = d_scale * gauss(rng);
  return bh::SymmetricFactorization(std::move(q), std::move(d));
}

bh::SymmetricFactorization random_projected_model(int n, std::uint64_t seed) {
  auto f = random_relaxed_model(n, seed);
  f.q().project(bh::DegeneratePolicy::ResetIdentity);
  return f;
}

Eigen::VectorXd random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = gauss(rng);
  return x;
}

// Walks every relaxed parameter (block entries then diagonal) and applies fn
// to a mutable reference, mirroring the gradient layout.
template <typename Fn>
void for_each_param(bh::SymmetricFactorization& f, Fn&& fn) {
  auto& q = f.q();
  for (int i = 0; i < q.layer_count(); ++i) {
    auto& l = q.layer(i);
    for (double& v : l.a()) fn(v);
    for (double& v : l.b()) fn(v);
    for (double& v : l.c()) fn(v);
    for (double& v : l.d()) fn(v);
  }
  for (int i = 0; i < f.diagonal().size(); ++i) fn(f.diagonal()[i]);
}

template <typename Fn>
void for_each_grad(const bh::FactorizationGradient& g, Fn&& fn) {
  for (const auto& l : g.layers) {
    for (double v : l.a) fn(v);
    for (double v : l.b) fn(v);
    for (double v : l.c) fn(v);
    for (double v : l.d) fn(v);
  }
  for (int i = 0; i < g.diag.size(); ++i) fn(g.diag[i]);
}

// Central finite difference of the sample loss along one parameter slot.
double fd_slope(bh::SymmetricFactorization& f, double& param,
                const bh::TrainSample& s, double h) {
  const double saved = param;
  param = saved + h;
  const double up = bh::loss(f, s);
  param = saved - h;
  const double down = bh::loss(f, s);
  param = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("forward reduces to diagonal scaling for identity stages") {
  auto f = bh::SymmetricFactorization::identity(4);
  const Eigen::VectorXd x = random_vector(4, 1);
  CHECK(f.forward(x) == x);

  bh::ButterflyProduct q(2);
  Eigen::VectorXd d(2);
  d << 2.0, 3.0;
  bh::SymmetricFactorization diag(std::move(q), std::move(d));
  Eigen::VectorXd ones = Eigen::Vector2d(1.0, 1.0);
  const Eigen::VectorXd y = diag.forward(ones);
  CHECK(y[0] == 2.0);
  CHECK(y[1] == 3.0);
}

TEST_CASE("forward matches the dense Q diag(d) Q^T oracle") {
  auto f = random_projected_model(16, 2);
  const Eigen::MatrixXd qd = f.q().to_dense();
  const Eigen::MatrixXd dense =
      qd * f.diagonal().asDiagonal() * qd.transpose();
  const Eigen::VectorXd x = random_vector(16, 3);
  const Eigen::VectorXd fast = f.forward(x);
  const Eigen::VectorXd slow = dense * x;
  CHECK((fast - slow).norm() <= 1e-11 * slow.norm());
  CHECK((f.to_dense() - dense).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("dense materialization of a projected model is symmetric") {
  auto f = random_projected_model(32, 5);
  const Eigen::MatrixXd h = f.to_dense();
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("inverse_apply inverts clamped diagonals") {
  bh::ButterflyProduct q(2);
  Eigen::VectorXd d(2);
  d << 2.0, 4.0;
  bh::SymmetricFactorization f(std::move(q), std::move(d));
  Eigen::VectorXd x = Eigen::Vector2d(2.0, 4.0);
  Eigen::VectorXd y = f.inverse_apply(x, 1e-8);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(1.0));

  bh::ButterflyProduct q2(2);
  Eigen::VectorXd d2(2);
  d2 << 1.0, -3.0;  // -3 floors to 0.5, so the second coordinate doubles
  bh::SymmetricFactorization g(std::move(q2), std::move(d2));
  y = g.inverse_apply(Eigen::Vector2d(1.0, 1.0), 0.5);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(2.0));

  CHECK_THROWS_AS(g.inverse_apply(Eigen::Vector2d(1.0, 1.0), 0.0),
                  std::invalid_argument);
}

TEST_CASE("forward round-trips inverse_apply when no entry is clamped") {
  auto f = random_projected_model(32, 7);
  f.diagonal() = f.diagonal().cwiseAbs().array() + 0.5;
  const Eigen::VectorXd x = random_vector(32, 8);
  CHECK((f.forward(f.inverse_apply(x, 1e-8)) - x).cwiseAbs().maxCoeff() <
        1e-8);
}

TEST_CASE("quadratic_form agrees with the forward inner product") {
  bh::ButterflyProduct q(2);
  Eigen::VectorXd ones = Eigen::Vector2d(1.0, 1.0);
  bh::SymmetricFactorization f(std::move(q), ones);
  CHECK(f.quadratic_form(Eigen::Vector2d(3.0, 4.0)) == doctest::Approx(25.0));

  auto g = random_projected_model(32, 9);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(32);
  CHECK(g.quadratic_form(zero) == 0.0);
  const Eigen::VectorXd x = random_vector(32, 10);
  const double direct = g.quadratic_form(x);
  const double cross = x.dot(g.forward(x));
  CHECK(std::abs(direct - cross) <= 1e-10 * std::abs(cross));
}

TEST_CASE("operation counts match the instrumented formulas") {
  for (int n : {8, 64}) {
    auto f = random_projected_model(n, 11);
    bh::OpCounter counter;
    f.attach_counter(&counter);
    const Eigen::VectorXd x = random_vector(n, 12);
    const auto lg = static_cast<std::uint64_t>(bh::log2_exact(n));
    const auto un = static_cast<std::uint64_t>(n);

    f.forward(x);
    CHECK(counter.mul_adds == 4 * un * lg + un);
    counter.mul_adds = 0;
    f.quadratic_form(x);
    CHECK(counter.mul_adds == 2 * un * lg + 2 * un);
    counter.mul_adds = 0;
    f.inverse_apply(x, 1e-8);
    CHECK(counter.mul_adds == 4 * un * lg + un);

    CHECK(f.parameter_count() == 2 * un * lg + un);
  }
}

TEST_CASE("gradient cost stays within three forward evaluations") {
  auto f = random_relaxed_model(16, 13);
  bh::OpCounter counter;
  f.attach_counter(&counter);
  const bh::TrainSample s{random_vector(16, 14), random_vector(16, 15)};
  bh::loss_gradient(f, s);
  const std::uint64_t forward_cost = 4 * 16 * 4 + 16;
  CHECK(counter.mul_adds <= 3 * forward_cost);
}

TEST_CASE("loss measures the squared residual") {
  auto f = random_projected_model(8, 16);
  const Eigen::VectorXd x = random_vector(8, 17);
  CHECK(bh::loss(f, {x, f.forward(x)}) == doctest::Approx(0.0).epsilon(1e-15));

  bh::ButterflyProduct q(2);
  Eigen::VectorXd ones = Eigen::Vector2d(1.0, 1.0);
  bh::SymmetricFactorization g(std::move(q), ones);
  CHECK(bh::loss(g, {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 0.0)}) ==
        doctest::Approx(1.0));

  auto r = random_relaxed_model(8, 18);
  const bh::TrainSample s{random_vector(8, 19), random_vector(8, 20)};
  const Eigen::MatrixXd qd = r.q().to_dense();
  const Eigen::VectorXd dense_out =
      qd * (r.diagonal().asDiagonal() * (qd.transpose() * s.x));
  CHECK(bh::loss(r, s) ==
        doctest::Approx((dense_out - s.y).squaredNorm()).epsilon(1e-12));
}

TEST_CASE("loss gradient vanishes at a perfect fit") {
  auto f = random_projected_model(8, 21);
  const Eigen::VectorXd x = random_vector(8, 22);
  const auto g = bh::loss_gradient(f, {x, f.forward(x)});
  CHECK(g.max_abs() < 1e-12);
}

TEST_CASE("diagonal gradient matches the hand-worked scalar case") {
  // Identity Q, d = (1,1), x = (1,0), y = (2,0):
  // residual (-1, 0), dL/dd_1 = 2 (d_1 - 2) * 1 = -2.
  bh::ButterflyProduct q(2);
  Eigen::VectorXd d = Eigen::Vector2d(1.0, 1.0);
  bh::SymmetricFactorization f(std::move(q), d);
  const auto g =
      bh::loss_gradient(f, {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(2.0, 0.0)});
  CHECK(g.diag[0] == doctest::Approx(-2.0));
  CHECK(g.diag[1] == doctest::Approx(0.0));
}

TEST_CASE("loss gradient matches central finite differences") {
  const double h = 1e-5;
  for (int n : {4, 8, 16}) {
    auto f = random_relaxed_model(n, 100u + static_cast<unsigned>(n));
    const bh::TrainSample s{random_vector(n, 200u + static_cast<unsigned>(n)),
                            random_vector(n, 300u + static_cast<unsigned>(n))};
    const auto analytic = bh::loss_gradient(f, s);

    std::vector<double> flat;
    for_each_grad(analytic, [&](double v) { flat.push_back(v); });

    std::size_t k = 0;
    double worst = 0.0;
    for_each_param(f, [&](double& p) {
      const double numeric = fd_slope(f, p, s, h);
      const double denom =
          std::max({std::abs(flat[k]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(flat[k] - numeric) / denom);
      ++k;
    });
    CHECK(k == flat.size());
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("the block gradient needs both weight-sharing contributions") {
  auto f = random_relaxed_model(8, 23);
  const bh::TrainSample s{random_vector(8, 24), random_vector(8, 25)};
  const auto shared = bh::loss_gradient_shared(f, s);
  const auto total = shared.total();

  // The summed gradient passes the finite-difference check...
  std::vector<double> flat;
  for_each_grad(total, [&](double v) { flat.push_back(v); });
  std::size_t k = 0;
  double worst_total = 0.0;
  for_each_param(f, [&](double& p) {
    const double numeric = fd_slope(f, p, s, 1e-5);
    const double denom = std::max({std::abs(flat[k]), std::abs(numeric), 1e-8});
    worst_total = std::max(worst_total, std::abs(flat[k] - numeric) / denom);
    ++k;
  });
  CHECK(worst_total < 1e-5);

  // ...while either single pass alone does not.
  double worst_single = 0.0;
  for (std::size_t layer = 0; layer < shared.q_pass.size(); ++layer) {
    for (std::size_t t = 0; t < shared.q_pass[layer].a.size(); ++t) {
      const double q_only = shared.q_pass[layer].a[t];
      const double both = total.layers[layer].a[t];
      worst_single = std::max(worst_single, std::abs(q_only - both));
    }
  }
  CHECK(worst_single > 1e-3);
}

TEST_CASE("loss gradient is affine in the target") {
  auto f = random_relaxed_model(8, 26);
  const Eigen::VectorXd x = random_vector(8, 27);
  std::vector<Eigen::VectorXd> parts;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(8);
  for (int i = 0; i < 8; ++i) {
    parts.push_back(random_vector(8, 400u + static_cast<unsigned>(i)));
    mean += parts.back();
  }
  mean /= 8.0;

  auto sum = bh::FactorizationGradient::zeros_like(f);
  for (const auto& y : parts) sum.add(bh::loss_gradient(f, {x, y}), 1.0 / 8.0);
  const auto at_mean = bh::loss_gradient(f, {x, mean});

  auto diff = sum;
  diff.add(at_mean, -1.0);
  CHECK(diff.max_abs() < 1e-12);
}

TEST_CASE("sgd_step reduces the batch loss and projects the blocks") {
  auto f = bh::SymmetricFactorization::identity(8);
  std::vector<bh::TrainSample> batch;
  auto target = random_projected_model(8, 28);
  for (int i = 0; i < 4; ++i) {
    const Eigen::VectorXd x = random_vector(8, 500u + static_cast<unsigned>(i));
    batch.push_back({x, target.forward(x)});
  }
  const double before = bh::sgd_step(f, batch, 0.05, 0.005,
                                     bh::DegeneratePolicy::ResetIdentity);
  double after = 0.0;
  for (const auto& s : batch) after += bh::loss(f, s);
  after /= static_cast<double>(batch.size());
  CHECK(after < before);
  CHECK_FALSE(f.q().relaxed());
  for (int t = 0; t < f.q().layer(0).block_count(); ++t)
    CHECK(f.q().layer(0).block(t).is_rotation());
}

TEST_CASE("training a zero target from a zero diagonal is a fixed point") {
  bh::ButterflyProduct q(4);
  bh::SymmetricFactorization f(std::move(q), Eigen::VectorXd::Zero(4));
  std::vector<bh::TrainSample> samples;
  for (int i = 0; i < 8; ++i)
    samples.push_back({random_vector(4, 600u + static_cast<unsigned>(i)),
                       Eigen::VectorXd::Zero(4)});
  bh::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.trace_angle_samples = 0;
  const auto trace = bh::train(f, samples, cfg);
  for (const auto& rec : trace) CHECK(rec.mean_loss == 0.0);
  CHECK(f.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.q().to_dense() == Eigen::MatrixXd::Identity(4, 4));
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto make_samples = [] {
    std::vector<bh::TrainSample> samples;
    auto target = random_projected_model(8, 29);
    for (int i = 0; i < 32; ++i) {
      const Eigen::VectorXd x =
          random_vector(8, 700u + static_cast<unsigned>(i));
      samples.push_back({x, target.forward(x)});
    }
    return samples;
  };
  const auto samples = make_samples();
  bh::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.rng_seed = 77;
  cfg.trace_angle_samples = 16;
  const bh::MatVec oracle = [](const Eigen::VectorXd& x) {
    return (2.0 * x).eval();  // any fixed oracle; both runs share it
  };

  auto f1 = bh::SymmetricFactorization::identity(8);
  auto f2 = bh::SymmetricFactorization::identity(8);
  const auto t1 = bh::train(f1, samples, cfg, oracle);
  const auto t2 = bh::train(f2, samples, cfg, oracle);
  REQUIRE(t1.size() == t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].mean_loss == t2[i].mean_loss);
    CHECK(t1[i].angle_deg == t2[i].angle_deg);
  }
  CHECK(f1.diagonal() == f2.diagonal());
  CHECK(f1.to_dense() == f2.to_dense());
}

TEST_CASE("train fits a target that the model can represent exactly") {
  auto target = random_projected_model(8, 31);
  target.diagonal() = target.diagonal().cwiseAbs().array() + 0.5;
  std::vector<bh::TrainSample> samples;
  for (int i = 0; i < 256; ++i) {
    const Eigen::VectorXd x = random_vector(8, 800u + static_cast<unsigned>(i));
    samples.push_back({x, target.forward(x)});
  }
  auto f = bh::SymmetricFactorization::identity(8);
  bh::TrainConfig cfg;
  // Recovery needs noisy exploration first: hot single-sample steps with a
  // slow anneal, otherwise SGD parks in a shallow basin and stays there.
  cfg.lr_q = 1.6;
  cfg.lr_d = 0.16;
  cfg.lr_decay = 0.999;
  cfg.epochs = 2000;
  cfg.trace_angle_samples = 0;
  cfg.rng_seed = 5;
  const auto trace = bh::train(f, samples, cfg);
  CHECK(trace.back().mean_loss < 1e-6 * trace.front().mean_loss);
}

TEST_CASE("rotation-only training drives the loss to zero on identity") {
  bh::ButterflyProduct q(4);
  // Start away from the target so there is something to learn.
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> angle(-0.5, 0.5);
  std::vector<double> angles(4 / 2 * 2);
  for (auto& a : angles) a = angle(rng);
  q = bh::ButterflyProduct::from_angles(4, angles);

  std::vector<bh::TrainSample> samples;
  for (int i = 0; i < 64; ++i) {
    const Eigen::VectorXd x = random_vector(4, 900u + static_cast<unsigned>(i));
    samples.push_back({x, x});  // target rotation = identity
  }
  bh::TrainConfig cfg;
  cfg.epochs = 60;
  cfg.trace_angle_samples = 0;
  const auto trace = bh::train_rotation_only(q, samples, cfg);
  CHECK(trace.back().mean_loss < 1e-6 * std::max(trace.front().mean_loss, 1.0));
  for (int t = 0; t < q.layer(0).block_count(); ++t)
    CHECK(q.layer(0).block(t).is_rotation());
}

TEST_CASE("average_angle recognizes collinear and antiparallel models") {
  auto f = random_projected_model(8, 35);
  f.diagonal() = f.diagonal().cwiseAbs().array() + 0.25;
  const Eigen::MatrixXd dense = f.to_dense();
  bh::AngleOptions opts;
  opts.samples = 64;

  const bh::MatVec exact = [&](const Eigen::VectorXd& x) {
    return (dense * x).eval();
  };
  CHECK(bh::average_angle(f, exact, opts) == doctest::Approx(0.0).epsilon(1e-6));

  const bh::MatVec doubled = [&](const Eigen::VectorXd& x) {
    return (2.0 * dense * x).eval();
  };
  CHECK(bh::average_angle(f, doubled, opts) ==
        doctest::Approx(0.0).epsilon(1e-6));

  const bh::MatVec negated = [&](const Eigen::VectorXd& x) {
    return (-dense * x).eval();
  };
  CHECK(bh::average_angle(f, negated, opts) == doctest::Approx(180.0));
}

TEST_CASE("average_angle skips degenerate pairs and can run out of them") {
  auto f = bh::SymmetricFactorization::identity(4);
  bh::AngleOptions opts;
  opts.samples = 32;

  const bh::MatVec zero = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  CHECK_THROWS_AS(bh::average_angle(f, zero, opts), bh::NoValidSamplesError);

  // Oracle that collapses only some inputs: survivors still produce a mean.
  const bh::MatVec half_zero = [](const Eigen::VectorXd& x) {
    return (x[0] > 0.0 ? x : Eigen::VectorXd::Zero(x.size())).eval();
  };
  const bh::MatVec model = [&](const Eigen::VectorXd& x) {
    return f.forward(x);
  };
  const auto report = bh::average_angle_report(model, half_zero, 4, opts);
  CHECK(report.used + report.skipped == 32);
  CHECK(report.used > 0);
  CHECK(report.skipped > 0);
  CHECK(report.mean_deg == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("angle comparison can be restricted to a leading subspace") {
  auto f = bh::SymmetricFactorization::identity(8);
  bh::AngleOptions opts;
  opts.samples = 16;
  opts.active_dim = 3;
  // Model and oracle agree on the first three coordinates and disagree
  // wildly on the rest; the restricted angle must be zero.
  const bh::MatVec model = [&](const Eigen::VectorXd& x) {
    return f.forward(x);
  };
  const bh::MatVec oracle = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    y.tail(5).setConstant(1e6);
    return y.eval();
  };
  const auto report = bh::average_angle_report(model, oracle, 8, opts);
  // arccos amplifies rounding near hits, so "zero" means sub-microdegree
  CHECK(report.mean_deg < 1e-5);
}

TEST_CASE("checkpoints round-trip the full model") {
  auto f = random_relaxed_model(16, 37);
  f.set_eig_floor(3e-7);
  std::stringstream buf;
  f.save(buf);
  auto back = bh::SymmetricFactorization::load(buf);
  CHECK(back.dim() == 16);
  CHECK(back.eig_floor() == 3e-7);
  CHECK(back.diagonal() == f.diagonal());
  const Eigen::VectorXd x = random_vector(16, 38);
  CHECK(back.forward(x) == f.forward(x));
}

TEST_CASE("checkpoint loading reports truncation at the right offset") {
  auto f = random_relaxed_model(4, 39);
  std::stringstream buf;
  f.save(buf);
  const std::string bytes = buf.str();
  // Drop the trailing eig_floor field; the diagonal region stays intact.
  std::stringstream cut(bytes.substr(0, bytes.size() - 8));
  try {
    bh::SymmetricFactorization::load(cut);
    CHECK(false);
  } catch (const bh::FormatError& e) {
    CHECK(e.offset() == bytes.size() - 8);
  }
}

TEST_CASE("train validates its configuration") {
  auto f = bh::SymmetricFactorization::identity(4);
  std::vector<bh::TrainSample> samples{{random_vector(4, 40), random_vector(4, 41)}};
  bh::TrainConfig cfg;
  cfg.lr_q = 0.0;
  CHECK_THROWS_AS(bh::train(f, samples, cfg), std::invalid_argument);
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS_AS(bh::train(f, samples, cfg), std::invalid_argument);
  cfg = {};
  CHECK_THROWS_AS(bh::train(f, {}, cfg), std::invalid_argument);
}
