#include "bh/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>

#include "bh/synth.hpp"
#include "serial.hpp"

namespace bh {

namespace {

constexpr double kPi = std::numbers::pi;

void check_dim(const Eigen::VectorXd& x, int n, const char* where) {
  if (x.size() != n)
    throw std::invalid_argument(std::string(where) + ": vector has size " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(n));
}

std::uint64_t eval_cost(int n, int levels) {
  return 4u * static_cast<std::uint64_t>(n) * levels + static_cast<std::uint64_t>(n);
}

/// Scratch buffers for one backpropagation pass, reused across steps.
struct GradientWorkspace {
  std::vector<Eigen::VectorXd> u;  // transpose-pass activations, u[0] = x
  std::vector<Eigen::VectorXd> w;  // forward-pass activations, w[L] = D u[L]
  Eigen::VectorXd g;

  void resize(int n, int levels) {
    u.assign(static_cast<std::size_t>(levels) + 1, Eigen::VectorXd(n));
    w.assign(static_cast<std::size_t>(levels) + 1, Eigen::VectorXd(n));
    g.resize(n);
  }
  bool matches(int n, int levels) const {
    return !u.empty() && u.size() == static_cast<std::size_t>(levels) + 1 &&
           u[0].size() == n;
  }
};

void zero_layer_grads(std::vector<LayerGrad>& grads, const ButterflyProduct& q) {
  grads.resize(static_cast<std::size_t>(q.layer_count()));
  for (int i = 0; i < q.layer_count(); ++i) {
    const auto m = static_cast<std::size_t>(q.layer(i).block_count());
    grads[static_cast<std::size_t>(i)].a.assign(m, 0.0);
    grads[static_cast<std::size_t>(i)].b.assign(m, 0.0);
    grads[static_cast<std::size_t>(i)].c.assign(m, 0.0);
    grads[static_cast<std::size_t>(i)].d.assign(m, 0.0);
  }
}

// Backward through one stage that acted as Q_i: accumulate block gradients
// from (g_out, input activation) and turn g into the input gradient Q_i^T g.
void backward_stage_q(const ButterflyLayer& layer, const double* act,
                      double* g, LayerGrad& grad) {
  const int p = layer.stride();
  const int n = layer.dim();
  const auto a = layer.a(), b = layer.b(), c = layer.c(), d = layer.d();
  int t = 0;
  for (int base = 0; base < n; base += 2 * p) {
    for (int j = 0; j < p; ++j, ++t) {
      const int lo = base + j, hi = base + p + j;
      const double gl = g[lo], gh = g[hi];
      const double xl = act[lo], xh = act[hi];
      grad.a[static_cast<std::size_t>(t)] += gl * xl;
      grad.b[static_cast<std::size_t>(t)] += gl * xh;
      grad.c[static_cast<std::size_t>(t)] += gh * xl;
      grad.d[static_cast<std::size_t>(t)] += gh * xh;
      g[lo] = a[static_cast<std::size_t>(t)] * gl + c[static_cast<std::size_t>(t)] * gh;
      g[hi] = b[static_cast<std::size_t>(t)] * gl + d[static_cast<std::size_t>(t)] * gh;
    }
  }
}

// Backward through one stage that acted as Q_i^T (block transposed).
void backward_stage_qt(const ButterflyLayer& layer, const double* act,
                       double* g, LayerGrad& grad) {
  const int p = layer.stride();
  const int n = layer.dim();
  const auto a = layer.a(), b = layer.b(), c = layer.c(), d = layer.d();
  int t = 0;
  for (int base = 0; base < n; base += 2 * p) {
    for (int j = 0; j < p; ++j, ++t) {
      const int lo = base + j, hi = base + p + j;
      const double gl = g[lo], gh = g[hi];
      const double xl = act[lo], xh = act[hi];
      grad.a[static_cast<std::size_t>(t)] += gl * xl;
      grad.c[static_cast<std::size_t>(t)] += gl * xh;
      grad.b[static_cast<std::size_t>(t)] += gh * xl;
      grad.d[static_cast<std::size_t>(t)] += gh * xh;
      g[lo] = a[static_cast<std::size_t>(t)] * gl + b[static_cast<std::size_t>(t)] * gh;
      g[hi] = c[static_cast<std::size_t>(t)] * gl + d[static_cast<std::size_t>(t)] * gh;
    }
  }
}

// Full backpropagation for the loss ||Q D Q^T x - y||^2.  Accumulates (+=)
// into gq / gqt / gdiag; gq and gqt may alias to collect the summed
// shared-weight gradient in one place.  Returns the sample loss.
double backprop(const SymmetricFactorization& f, const TrainSample& s,
                std::vector<LayerGrad>* gq, std::vector<LayerGrad>* gqt,
                Eigen::VectorXd* gdiag, GradientWorkspace& ws) {
  const int n = f.dim();
  const int levels = f.q().layer_count();
  check_dim(s.x, n, "loss_gradient");
  check_dim(s.y, n, "loss_gradient");
  if (!ws.matches(n, levels)) ws.resize(n, levels);

  const ButterflyProduct& q = f.q();
  const Eigen::VectorXd& d = f.diagonal();

  // Evaluation, keeping every stage input.
  ws.u[0] = s.x;
  for (int i = 1; i <= levels; ++i) {
    ws.u[static_cast<std::size_t>(i)] = ws.u[static_cast<std::size_t>(i) - 1];
    q.layer(i - 1).apply_transpose_in_place(ws.u[static_cast<std::size_t>(i)].data());
  }
  ws.w[static_cast<std::size_t>(levels)] =
      d.cwiseProduct(ws.u[static_cast<std::size_t>(levels)]);
  for (int i = levels; i >= 1; --i) {
    ws.w[static_cast<std::size_t>(i) - 1] = ws.w[static_cast<std::size_t>(i)];
    q.layer(i - 1).apply_in_place(ws.w[static_cast<std::size_t>(i) - 1].data());
  }

  ws.g = ws.w[0] - s.y;
  const double sample_loss = ws.g.squaredNorm();
  ws.g *= 2.0;

  // Output side first: the stages that acted as Q_i, in application order
  // reversed (stage 1 was applied last).
  for (int i = 1; i <= levels; ++i)
    backward_stage_q(q.layer(i - 1), ws.w[static_cast<std::size_t>(i)].data(),
                     ws.g.data(), (*gq)[static_cast<std::size_t>(i) - 1]);

  // Diagonal stage.
  gdiag->noalias() += ws.g.cwiseProduct(ws.u[static_cast<std::size_t>(levels)]);
  ws.g.array() *= d.array();

  // Transpose-pass stages, unwinding back to the input.
  for (int i = levels; i >= 1; --i)
    backward_stage_qt(q.layer(i - 1), ws.u[static_cast<std::size_t>(i) - 1].data(),
                      ws.g.data(), (*gqt)[static_cast<std::size_t>(i) - 1]);

  if (OpCounter* counter = f.counter())
    counter->mul_adds += 3u * eval_cost(n, levels);
  return sample_loss;
}

AngleReport mean_angle_pairs(const MatVec& model,
                             const std::vector<Eigen::VectorXd>& xs,
                             const std::vector<Eigen::VectorXd>& ys,
                             int active_dim) {
  double sum = 0.0;
  int used = 0, skipped = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Eigen::VectorXd yhat = model(xs[i]);
    const Eigen::VectorXd& yref = ys[i];
    const int a = active_dim > 0 ? active_dim : static_cast<int>(yhat.size());
    const auto vh = yhat.head(a);
    const auto vr = yref.head(a);
    const double nh = vh.norm(), nr = vr.norm();
    if (nh < 1e-300 || nr < 1e-300) {
      ++skipped;
      continue;
    }
    const double cosang = std::clamp(vh.dot(vr) / (nh * nr), -1.0, 1.0);
    sum += std::acos(cosang) * 180.0 / kPi;
    ++used;
  }
  if (used == 0)
    throw NoValidSamplesError("average_angle: all " + std::to_string(skipped) +
                              " sample pairs were degenerate");
  return AngleReport{sum / used, used, skipped};
}

std::vector<Eigen::VectorXd> draw_angle_inputs(int n, const AngleOptions& opts) {
  if (opts.samples < 1)
    throw std::invalid_argument("average_angle: sample count must be >= 1");
  return opts.domain == SampleDomain::UnitSphere
             ? synth::sample_unit_sphere(n, opts.samples, opts.seed)
             : synth::sample_hypercube(n, opts.samples, opts.seed);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_q > 0.0) || !(lr_d > 0.0))
    throw std::invalid_argument("TrainConfig: learning rates must be positive");
  if (!(lr_decay > 0.0) || lr_decay > 1.0)
    throw std::invalid_argument("TrainConfig: lr_decay must be in (0, 1]");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (steps_per_epoch < 0)
    throw std::invalid_argument("TrainConfig: steps_per_epoch must be >= 0");
}

SymmetricFactorization::SymmetricFactorization(ButterflyProduct q,
                                               Eigen::VectorXd d,
                                               double eig_floor)
    : q_(std::move(q)), d_(std::move(d)), eig_floor_(eig_floor) {
  if (d_.size() != q_.dim())
    throw std::invalid_argument(
        "SymmetricFactorization: diagonal size does not match dimension");
  if (!(eig_floor_ > 0.0))
    throw std::invalid_argument("SymmetricFactorization: eig_floor must be > 0");
}

SymmetricFactorization SymmetricFactorization::identity(int n) {
  return SymmetricFactorization(ButterflyProduct(n), Eigen::VectorXd::Ones(n));
}

void SymmetricFactorization::attach_counter(OpCounter* counter) {
  counter_ = counter;
  q_.attach_counter(counter);
}

Eigen::VectorXd SymmetricFactorization::forward(const Eigen::VectorXd& x) const {
  check_dim(x, dim(), "forward");
  Eigen::VectorXd y = x;
  q_.apply_transpose_in_place(y.data());
  y.array() *= d_.array();
  if (counter_) counter_->mul_adds += static_cast<std::uint64_t>(dim());
  q_.apply_in_place(y.data());
  return y;
}

Eigen::VectorXd SymmetricFactorization::inverse_apply(const Eigen::VectorXd& x,
                                                      double eps) const {
  check_dim(x, dim(), "inverse_apply");
  if (!(eps > 0.0))
    throw std::invalid_argument("inverse_apply: eps must be > 0");
  Eigen::VectorXd y = x;
  q_.apply_transpose_in_place(y.data());
  for (int i = 0; i < y.size(); ++i) y[i] /= std::max(d_[i], eps);
  if (counter_) counter_->mul_adds += static_cast<std::uint64_t>(dim());
  q_.apply_in_place(y.data());
  return y;
}

double SymmetricFactorization::quadratic_form(const Eigen::VectorXd& x) const {
  check_dim(x, dim(), "quadratic_form");
  Eigen::VectorXd y = x;
  q_.apply_transpose_in_place(y.data());
  double acc = 0.0;
  for (int i = 0; i < y.size(); ++i) acc += d_[i] * y[i] * y[i];
  if (counter_) counter_->mul_adds += 2u * static_cast<std::uint64_t>(dim());
  return acc;
}

Eigen::MatrixXd SymmetricFactorization::to_dense() const {
  const Eigen::MatrixXd qd = q_.to_dense();
  return qd * d_.asDiagonal() * qd.transpose();
}

void SymmetricFactorization::save(std::ostream& out) const {
  q_.save(out);
  for (int i = 0; i < d_.size(); ++i) detail::write_f64(out, d_[i]);
  detail::write_f64(out, eig_floor_);
}

SymmetricFactorization SymmetricFactorization::load(std::istream& in) {
  ButterflyProduct q = ButterflyProduct::load(in);
  const int n = q.dim();
  // Tail starts after the butterfly record: 24-byte header plus its entries.
  std::size_t offset = 24 + static_cast<std::size_t>(q.parameter_count()) * 8;
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) {
    const std::size_t at = offset;
    d[i] = detail::read_f64(in, &offset, "factorization checkpoint");
    if (!std::isfinite(d[i]))
      throw FormatError("factorization checkpoint: non-finite diagonal entry", at);
  }
  const std::size_t at = offset;
  const double eps = detail::read_f64(in, &offset, "factorization checkpoint");
  if (!std::isfinite(eps) || !(eps > 0.0))
    throw FormatError("factorization checkpoint: eig_floor must be > 0", at);
  return SymmetricFactorization(std::move(q), std::move(d), eps);
}

FactorizationGradient FactorizationGradient::zeros_like(
    const SymmetricFactorization& f) {
  FactorizationGradient g;
  zero_layer_grads(g.layers, f.q());
  g.diag = Eigen::VectorXd::Zero(f.dim());
  return g;
}

void FactorizationGradient::set_zero() {
  for (auto& l : layers) {
    std::fill(l.a.begin(), l.a.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
    std::fill(l.c.begin(), l.c.end(), 0.0);
    std::fill(l.d.begin(), l.d.end(), 0.0);
  }
  diag.setZero();
}

void FactorizationGradient::add(const FactorizationGradient& other, double s) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t t = 0; t < layers[i].a.size(); ++t) {
      layers[i].a[t] += s * other.layers[i].a[t];
      layers[i].b[t] += s * other.layers[i].b[t];
      layers[i].c[t] += s * other.layers[i].c[t];
      layers[i].d[t] += s * other.layers[i].d[t];
    }
  }
  diag += s * other.diag;
}

void FactorizationGradient::scale(double s) {
  for (auto& l : layers) {
    for (auto& v : l.a) v *= s;
    for (auto& v : l.b) v *= s;
    for (auto& v : l.c) v *= s;
    for (auto& v : l.d) v *= s;
  }
  diag *= s;
}

double FactorizationGradient::max_abs() const {
  double m = diag.size() ? diag.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& l : layers)
    for (std::size_t t = 0; t < l.a.size(); ++t)
      m = std::max({m, std::abs(l.a[t]), std::abs(l.b[t]), std::abs(l.c[t]),
                    std::abs(l.d[t])});
  return m;
}

FactorizationGradient SharedWeightGradient::total() const {
  FactorizationGradient g;
  g.layers = q_pass;
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    for (std::size_t t = 0; t < g.layers[i].a.size(); ++t) {
      g.layers[i].a[t] += qt_pass[i].a[t];
      g.layers[i].b[t] += qt_pass[i].b[t];
      g.layers[i].c[t] += qt_pass[i].c[t];
      g.layers[i].d[t] += qt_pass[i].d[t];
    }
  }
  g.diag = diag;
  return g;
}

double loss(const SymmetricFactorization& f, const TrainSample& s) {
  check_dim(s.y, f.dim(), "loss");
  const Eigen::VectorXd r = f.forward(s.x) - s.y;
  if (OpCounter* counter = f.counter())
    counter->mul_adds += static_cast<std::uint64_t>(f.dim());
  return r.squaredNorm();
}

FactorizationGradient loss_gradient(const SymmetricFactorization& f,
                                    const TrainSample& s) {
  FactorizationGradient g = FactorizationGradient::zeros_like(f);
  GradientWorkspace ws;
  backprop(f, s, &g.layers, &g.layers, &g.diag, ws);
  return g;
}

SharedWeightGradient loss_gradient_shared(const SymmetricFactorization& f,
                                          const TrainSample& s) {
  SharedWeightGradient g;
  zero_layer_grads(g.q_pass, f.q());
  zero_layer_grads(g.qt_pass, f.q());
  g.diag = Eigen::VectorXd::Zero(f.dim());
  GradientWorkspace ws;
  backprop(f, s, &g.q_pass, &g.qt_pass, &g.diag, ws);
  return g;
}

double sgd_step(SymmetricFactorization& f, std::span<const TrainSample> batch,
                double lr_q, double lr_d, DegeneratePolicy policy) {
  if (batch.empty()) throw std::invalid_argument("sgd_step: empty batch");
  FactorizationGradient grad = FactorizationGradient::zeros_like(f);
  GradientWorkspace ws;
  double mean_loss = 0.0;
  for (const TrainSample& s : batch)
    mean_loss += backprop(f, s, &grad.layers, &grad.layers, &grad.diag, ws);
  mean_loss /= static_cast<double>(batch.size());
  const double inv = 1.0 / static_cast<double>(batch.size());

  ButterflyProduct& q = f.q();
  for (int i = 0; i < q.layer_count(); ++i) {
    auto& layer = q.layer(i);
    const auto& lg = grad.layers[static_cast<std::size_t>(i)];
    auto a = layer.a(), b = layer.b(), c = layer.c(), d = layer.d();
    for (std::size_t t = 0; t < a.size(); ++t) {
      a[t] -= lr_q * inv * lg.a[t];
      b[t] -= lr_q * inv * lg.b[t];
      c[t] -= lr_q * inv * lg.c[t];
      d[t] -= lr_q * inv * lg.d[t];
    }
  }
  q.mark_relaxed();
  f.diagonal() -= (lr_d * inv) * grad.diag;
  q.project(policy);
  return mean_loss;
}

namespace {

// Shared epoch loop for both trainers.  `do_step` consumes one batch of
// sample indices under the epoch's learning rates and returns its mean loss.
TrainTrace run_epochs(int n, const std::vector<TrainSample>& samples,
                      const TrainConfig& cfg, const MatVec& oracle,
                      const MatVec& model, const EpochCallback& on_epoch,
                      const std::function<double(std::span<const int>, double,
                                                 double)>& do_step) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("train: no samples");
  for (const TrainSample& s : samples) {
    check_dim(s.x, n, "train");
    check_dim(s.y, n, "train");
  }

  std::vector<Eigen::VectorXd> eval_x;
  std::vector<Eigen::VectorXd> eval_y;
  if (oracle && cfg.trace_angle_samples > 0) {
    eval_x = synth::sample_unit_sphere(n, cfg.trace_angle_samples,
                                       cfg.rng_seed ^ 0x5bf03635ULL);
    eval_y.reserve(eval_x.size());
    for (const auto& x : eval_x) eval_y.push_back(oracle(x));
  }

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  const int steps =
      cfg.steps_per_epoch > 0
          ? cfg.steps_per_epoch
          : static_cast<int>((samples.size() + cfg.batch_size - 1) /
                             static_cast<std::size_t>(cfg.batch_size));

  TrainTrace trace;
  trace.reserve(static_cast<std::size_t>(cfg.epochs));
  std::vector<int> batch(static_cast<std::size_t>(cfg.batch_size));
  double lr_q = cfg.lr_q, lr_d = cfg.lr_d;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int s = 0; s < steps; ++s) {
      for (auto& idx : batch) idx = static_cast<int>(pick(rng));
      loss_sum += do_step(batch, lr_q, lr_d);
    }
    EpochRecord rec{epoch, loss_sum / steps,
                    std::numeric_limits<double>::quiet_NaN()};
    if (!eval_x.empty())
      rec.angle_deg = mean_angle_pairs(model, eval_x, eval_y, 0).mean_deg;
    trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
    lr_q *= cfg.lr_decay;
    lr_d *= cfg.lr_decay;
  }
  return trace;
}

}  // namespace

TrainTrace train(SymmetricFactorization& f,
                 const std::vector<TrainSample>& samples,
                 const TrainConfig& cfg, const MatVec& oracle,
                 const EpochCallback& on_epoch) {
  auto ws = std::make_shared<GradientWorkspace>();
  auto grad = std::make_shared<FactorizationGradient>(
      FactorizationGradient::zeros_like(f));
  auto do_step = [&f, &samples, &cfg, ws, grad](std::span<const int> batch,
                                                double lr_q, double lr_d) {
    grad->set_zero();
    double mean_loss = 0.0;
    for (int idx : batch)
      mean_loss += backprop(f, samples[static_cast<std::size_t>(idx)],
                            &grad->layers, &grad->layers, &grad->diag, *ws);
    mean_loss /= static_cast<double>(batch.size());
    const double inv = 1.0 / static_cast<double>(batch.size());

    ButterflyProduct& q = f.q();
    for (int i = 0; i < q.layer_count(); ++i) {
      auto& layer = q.layer(i);
      const auto& lg = grad->layers[static_cast<std::size_t>(i)];
      auto a = layer.a(), b = layer.b(), c = layer.c(), d = layer.d();
      for (std::size_t t = 0; t < a.size(); ++t) {
        a[t] -= lr_q * inv * lg.a[t];
        b[t] -= lr_q * inv * lg.b[t];
        c[t] -= lr_q * inv * lg.c[t];
        d[t] -= lr_q * inv * lg.d[t];
      }
    }
    q.mark_relaxed();
    f.diagonal() -= (lr_d * inv) * grad->diag;
    q.project(cfg.degenerate_policy);
    return mean_loss;
  };
  MatVec model = [&f](const Eigen::VectorXd& x) { return f.forward(x); };
  return run_epochs(f.dim(), samples, cfg, oracle, model, on_epoch, do_step);
}

namespace {

// Backpropagation for the rotation-only loss ||Q x - y||^2.
double rotation_backprop(ButterflyProduct& q, const TrainSample& s,
                         std::vector<LayerGrad>& grads,
                         std::vector<Eigen::VectorXd>& acts,
                         Eigen::VectorXd& g) {
  const int levels = q.layer_count();
  acts.resize(static_cast<std::size_t>(levels) + 1);
  acts[0] = s.x;
  for (int k = 0; k < levels; ++k) {
    acts[static_cast<std::size_t>(k) + 1] = acts[static_cast<std::size_t>(k)];
    q.layer(levels - 1 - k)
        .apply_in_place(acts[static_cast<std::size_t>(k) + 1].data());
  }
  g = acts[static_cast<std::size_t>(levels)] - s.y;
  const double sample_loss = g.squaredNorm();
  g *= 2.0;
  for (int k = levels - 1; k >= 0; --k) {
    const int li = levels - 1 - k;
    backward_stage_q(q.layer(li), acts[static_cast<std::size_t>(k)].data(),
                     g.data(), grads[static_cast<std::size_t>(li)]);
  }
  return sample_loss;
}

}  // namespace

TrainTrace train_rotation_only(ButterflyProduct& q,
                               const std::vector<TrainSample>& samples,
                               const TrainConfig& cfg, const MatVec& oracle,
                               const EpochCallback& on_epoch) {
  auto grads = std::make_shared<std::vector<LayerGrad>>();
  zero_layer_grads(*grads, q);
  auto acts = std::make_shared<std::vector<Eigen::VectorXd>>();
  auto g = std::make_shared<Eigen::VectorXd>();

  auto do_step = [&q, &samples, &cfg, grads, acts, g](std::span<const int> batch,
                                                      double lr_q, double) {
    for (auto& lg : *grads) {
      std::fill(lg.a.begin(), lg.a.end(), 0.0);
      std::fill(lg.b.begin(), lg.b.end(), 0.0);
      std::fill(lg.c.begin(), lg.c.end(), 0.0);
      std::fill(lg.d.begin(), lg.d.end(), 0.0);
    }
    double mean_loss = 0.0;
    for (int idx : batch)
      mean_loss += rotation_backprop(q, samples[static_cast<std::size_t>(idx)],
                                     *grads, *acts, *g);
    mean_loss /= static_cast<double>(batch.size());
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (int i = 0; i < q.layer_count(); ++i) {
      auto& layer = q.layer(i);
      const auto& lg = (*grads)[static_cast<std::size_t>(i)];
      auto a = layer.a(), b = layer.b(), c = layer.c(), d = layer.d();
      for (std::size_t t = 0; t < a.size(); ++t) {
        a[t] -= lr_q * inv * lg.a[t];
        b[t] -= lr_q * inv * lg.b[t];
        c[t] -= lr_q * inv * lg.c[t];
        d[t] -= lr_q * inv * lg.d[t];
      }
    }
    q.mark_relaxed();
    q.project(cfg.degenerate_policy);
    return mean_loss;
  };
  MatVec model = [&q](const Eigen::VectorXd& x) { return q.apply(x); };
  return run_epochs(q.dim(), samples, cfg, oracle, model, on_epoch, do_step);
}

AngleReport average_angle_report(const MatVec& model, const MatVec& oracle,
                                 int n, const AngleOptions& opts) {
  const std::vector<Eigen::VectorXd> xs = draw_angle_inputs(n, opts);
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(xs.size());
  for (const auto& x : xs) ys.push_back(oracle(x));
  return mean_angle_pairs(model, xs, ys, opts.active_dim);
}

double average_angle(const SymmetricFactorization& f, const MatVec& oracle,
                     const AngleOptions& opts) {
  MatVec model = [&f](const Eigen::VectorXd& x) { return f.forward(x); };
  return average_angle_report(model, oracle, f.dim(), opts).mean_deg;
}

}  // namespace bh
