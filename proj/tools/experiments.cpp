#include "experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

#include "bh/synth.hpp"

namespace bhcli {

namespace {

// Seed-derivation tags so each consumer of a config seed gets its own stream.
constexpr std::uint64_t kTagSamples = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kTagTrain = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kTagFinalAngle = 0x94d049bb133111ebULL;
constexpr std::uint64_t kTagStart = 0xd6e8feb86659fd93ULL;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + tag;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double mean_sample_loss(const bh::SymmetricFactorization& f,
                        const std::vector<bh::TrainSample>& samples) {
  double acc = 0.0;
  for (const auto& s : samples) acc += bh::loss(f, s);
  return acc / static_cast<double>(samples.size());
}

double mean_rotation_loss(const bh::ButterflyProduct& q,
                          const std::vector<bh::TrainSample>& samples) {
  double acc = 0.0;
  for (const auto& s : samples) acc += (q.apply(s.x) - s.y).squaredNorm();
  return acc / static_cast<double>(samples.size());
}

// Target drawn from an exact factorization: uniform angles, Gaussian diagonal.
bh::SymmetricFactorization exact_butterfly_target(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi,
                                               std::numbers::pi);
  const int blocks = n / 2 * bh::log2_exact(n);
  std::vector<double> angles(static_cast<std::size_t>(blocks));
  for (auto& a : angles) a = angle(rng);
  bh::ButterflyProduct q = bh::ButterflyProduct::from_angles(n, angles);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = gauss(rng);
  return bh::SymmetricFactorization(std::move(q), std::move(d));
}

std::vector<bh::TrainSample> paired_samples(const bh::MatVec& oracle, int n,
                                            int m, std::uint64_t seed) {
  std::vector<bh::TrainSample> samples;
  samples.reserve(static_cast<std::size_t>(m));
  for (auto& x : bh::synth::sample_unit_sphere(n, m, seed))
    samples.push_back({x, oracle(x)});
  return samples;
}

// Written to from the benchmark bodies so their results stay observable and
// the timed calls cannot be optimized away.
volatile double bench_guard = 0.0;

}  // namespace

void parallel_for_ordered(int jobs, int workers,
                          const std::function<void(int)>& fn) {
  if (jobs <= 0) return;
  int count = workers > 0 ? workers
                          : static_cast<int>(std::thread::hardware_concurrency());
  count = std::clamp(count, 1, jobs);
  if (count == 1) {
    for (int j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int j = next.fetch_add(1);
      if (j >= jobs) return;
      try {
        fn(j);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string csv_cell(double v) {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

ApproxResult run_synth_approx(const ApproxConfig& cfg) {
  bh::MatVec oracle;
  if (cfg.target == ApproxTarget::Ensemble) {
    bh::synth::SyntheticSpec spec;
    spec.n = cfg.n;
    spec.n_mu = cfg.n_mu;
    spec.seed = cfg.seed;
    const Eigen::MatrixXd h = bh::synth::synthetic_hessian(spec).h;
    oracle = [h](const Eigen::VectorXd& x) -> Eigen::VectorXd { return h * x; };
  } else {
    auto target = std::make_shared<bh::SymmetricFactorization>(
        exact_butterfly_target(cfg.n, cfg.seed));
    oracle = [target](const Eigen::VectorXd& x) { return target->forward(x); };
  }

  const std::vector<bh::TrainSample> samples =
      paired_samples(oracle, cfg.n, cfg.m, mix_seed(cfg.seed, kTagSamples));

  bh::SymmetricFactorization f = bh::SymmetricFactorization::identity(cfg.n);
  bh::TrainConfig tc;
  tc.lr_q = cfg.lr_q;
  tc.lr_d = cfg.lr_d;
  tc.lr_decay = cfg.lr_decay;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.steps_per_epoch = cfg.steps_per_epoch;
  tc.rng_seed = mix_seed(cfg.seed, kTagTrain);
  tc.trace_angle_samples = cfg.trace_angle_samples;

  ApproxResult out;
  out.initial_loss = mean_sample_loss(f, samples);
  out.trace = bh::train(f, samples, tc,
                        cfg.trace_angle_samples > 0 ? oracle : bh::MatVec());
  out.final_loss = mean_sample_loss(f, samples);

  bh::AngleOptions ao;
  ao.samples = cfg.final_angle_samples;
  ao.seed = mix_seed(cfg.seed, kTagFinalAngle);
  out.final_angle = bh::average_angle(f, oracle, ao);
  return out;
}

ApproxResult run_rotation(const RotationConfig& cfg) {
  bh::MatVec oracle;
  if (cfg.target == RotationTarget::Haar) {
    const Eigen::MatrixXd r = bh::synth::haar_rotation(cfg.n, cfg.seed);
    oracle = [r](const Eigen::VectorXd& x) -> Eigen::VectorXd { return r * x; };
  } else {
    auto target = std::make_shared<bh::ButterflyProduct>(
        exact_butterfly_target(cfg.n, cfg.seed).q());
    oracle = [target](const Eigen::VectorXd& x) { return target->apply(x); };
  }

  const std::vector<bh::TrainSample> samples =
      paired_samples(oracle, cfg.n, cfg.m, mix_seed(cfg.seed, kTagSamples));

  bh::ButterflyProduct q(cfg.n);
  bh::TrainConfig tc;
  tc.lr_q = cfg.lr_q;
  tc.lr_d = 1.0;  // unused by the rotation path; must merely validate
  tc.lr_decay = cfg.lr_decay;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.steps_per_epoch = cfg.steps_per_epoch;
  tc.rng_seed = mix_seed(cfg.seed, kTagTrain);
  tc.trace_angle_samples = cfg.trace_angle_samples;

  ApproxResult out;
  out.initial_loss = mean_rotation_loss(q, samples);
  out.trace = bh::train_rotation_only(
      q, samples, tc, cfg.trace_angle_samples > 0 ? oracle : bh::MatVec());
  out.final_loss = mean_rotation_loss(q, samples);

  bh::MatVec model = [&q](const Eigen::VectorXd& x) { return q.apply(x); };
  bh::AngleOptions ao;
  ao.samples = cfg.final_angle_samples;
  ao.seed = mix_seed(cfg.seed, kTagFinalAngle);
  out.final_angle =
      bh::average_angle_report(model, oracle, cfg.n, ao).mean_deg;
  return out;
}

SweepResult run_nmu_sweep(const SweepConfig& cfg) {
  if (cfg.n_mu_values.empty())
    throw std::invalid_argument("nmu sweep: no n_mu values");
  if (cfg.seeds < 1) throw std::invalid_argument("nmu sweep: seeds must be >= 1");

  const int jobs = static_cast<int>(cfg.n_mu_values.size()) * cfg.seeds;
  SweepResult out;
  out.cells.resize(static_cast<std::size_t>(jobs));
  parallel_for_ordered(jobs, cfg.workers, [&](int job) {
    const int vi = job / cfg.seeds;
    const int si = job % cfg.seeds;
    ApproxConfig run = cfg.run;
    run.n_mu = cfg.n_mu_values[static_cast<std::size_t>(vi)];
    run.seed = cfg.base_seed + 7919ULL * static_cast<std::uint64_t>(vi) +
               static_cast<std::uint64_t>(si);
    run.trace_angle_samples = 0;  // sweep cells only need the final angle
    SweepCell& cell = out.cells[static_cast<std::size_t>(job)];
    cell.n_mu = run.n_mu;
    cell.seed = run.seed;
    cell.angle = run_synth_approx(run).final_angle;
  });

  for (std::size_t vi = 0; vi < cfg.n_mu_values.size(); ++vi) {
    double acc = 0.0;
    for (int si = 0; si < cfg.seeds; ++si)
      acc += out.cells[vi * static_cast<std::size_t>(cfg.seeds) +
                       static_cast<std::size_t>(si)]
                 .angle;
    out.means.emplace_back(cfg.n_mu_values[vi], acc / cfg.seeds);
  }
  return out;
}

CovarianceResult run_covariance(const CovarianceConfig& cfg) {
  const DatasetMatrix ds = cfg.format == CovarianceConfig::Format::Idx
                               ? read_idx_images(cfg.path)
                               : read_csv_matrix(cfg.path);
  CovarianceResult out;
  out.provenance = ds.provenance;
  out.rows = static_cast<long>(ds.rows());
  out.raw_dim = static_cast<int>(ds.cols());
  out.padded_dim = next_pow2(out.raw_dim);
  const int p = out.raw_dim;
  const int n = out.padded_dim;

  out.cov_active = covariance(ds.data);
  const Eigen::MatrixXd& c = out.cov_active;
  bh::MatVec oracle = [&c, p, n](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    y.head(p) = c * x.head(p);
    return y;
  };

  // Training mix: mean-centered data rows plus unit-sphere draws, both
  // zero-padded into the power-of-two space.
  if (cfg.m_train < 1)
    throw std::invalid_argument("covariance: m_train must be >= 1");
  if (cfg.data_fraction < 0.0 || cfg.data_fraction > 1.0)
    throw std::invalid_argument("covariance: data_fraction must be in [0,1]");
  const int n_data = static_cast<int>(std::lround(cfg.m_train * cfg.data_fraction));
  const int n_sphere = cfg.m_train - n_data;
  const Eigen::RowVectorXd mean = ds.data.colwise().mean();

  std::vector<bh::TrainSample> samples;
  samples.reserve(static_cast<std::size_t>(cfg.m_train));
  std::mt19937_64 rng(mix_seed(cfg.seed, kTagSamples));
  std::uniform_int_distribution<long> pick(0, out.rows - 1);
  for (int i = 0; i < n_data; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x.head(p) = (ds.data.row(pick(rng)) - mean).transpose();
    samples.push_back({x, oracle(x)});
  }
  for (auto& xs : bh::synth::sample_unit_sphere(
           p, n_sphere, mix_seed(cfg.seed, kTagSamples ^ 0xffULL))) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x.head(p) = xs;
    samples.push_back({x, oracle(x)});
  }

  bh::SymmetricFactorization f = bh::SymmetricFactorization::identity(n);
  bh::TrainConfig tc;
  tc.lr_q = cfg.lr_q;
  tc.lr_d = cfg.lr_d;
  tc.lr_decay = cfg.lr_decay;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.rng_seed = mix_seed(cfg.seed, kTagTrain);
  tc.trace_angle_samples = cfg.trace_angle_samples;
  out.trace = bh::train(f, samples, tc,
                        cfg.trace_angle_samples > 0 ? oracle : bh::MatVec());

  bh::MatVec model = [&f](const Eigen::VectorXd& x) { return f.forward(x); };
  bh::AngleOptions ao;
  ao.samples = cfg.angle_samples;
  ao.seed = mix_seed(cfg.seed, kTagFinalAngle);
  ao.active_dim = p;
  try {
    out.angle = bh::average_angle_report(model, oracle, n, ao);
  } catch (const bh::NoValidSamplesError&) {
    out.angle = bh::AngleReport{std::numeric_limits<double>::quiet_NaN(), 0,
                                cfg.angle_samples};
  }

  out.model_active = dense_from_forward(f).topLeftCorner(p, p);
  out.model = std::move(f);
  return out;
}

std::unique_ptr<bh::Objective> make_objective(const OptimizeConfig& cfg) {
  if (cfg.objective == "quadratic")
    return std::make_unique<bh::QuadraticObjective>(
        bh::QuadraticObjective::spd(cfg.n, cfg.cond, cfg.seed));
  if (cfg.objective == "lstsq")
    return std::make_unique<bh::LeastSquaresObjective>(
        bh::LeastSquaresObjective::random(cfg.n, cfg.m, cfg.noise, cfg.seed));
  if (cfg.objective == "logistic")
    return std::make_unique<bh::LogisticObjective>(
        bh::LogisticObjective::random(cfg.n, cfg.m, cfg.reg, cfg.seed));
  if (cfg.objective == "rosenbrock")
    return std::make_unique<bh::RosenbrockObjective>(cfg.n);
  throw std::invalid_argument("unknown objective '" + cfg.objective + "'");
}

Eigen::VectorXd default_start(const OptimizeConfig& cfg) {
  std::mt19937_64 rng(mix_seed(cfg.seed, kTagStart));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u(cfg.n);
  for (int i = 0; i < cfg.n; ++i) u[i] = gauss(rng);
  return u;
}

OptimizeResult run_optimize(const OptimizeConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("optimize: steps must be >= 1");
  std::unique_ptr<bh::Objective> obj = make_objective(cfg);
  bh::HessianTracker tracker(*obj, default_start(cfg), cfg.tracker);

  OptimizeResult out;
  out.log.reserve(static_cast<std::size_t>(cfg.steps));
  for (int i = 0; i < cfg.steps; ++i) {
    const bh::StepReport rep = tracker.step();
    out.log.push_back(rep);
    if (cfg.target_loss > 0.0 && rep.loss <= cfg.target_loss) {
      out.iterations_to_target = rep.t;
      break;
    }
  }
  out.final_loss = obj->value(tracker.iterate());
  out.gradient_evals = obj->gradient_evals();
  return out;
}

BenchResult run_bench(const std::vector<int>& sizes, bool measure_time,
                      std::uint64_t seed) {
  BenchResult out;
  for (int n : sizes) {
    bh::SymmetricFactorization f(
        exact_butterfly_target(n, mix_seed(seed, static_cast<std::uint64_t>(n))));
    bh::OpCounter counter;
    f.attach_counter(&counter);
    const Eigen::VectorXd x = bh::synth::sample_unit_sphere(
        n, 1, mix_seed(seed, kTagSamples ^ static_cast<std::uint64_t>(n)))[0];

    const auto timed = [&](const char* op, const std::function<void()>& body,
                           std::uint64_t muladds) {
      double ns = 0.0;
      if (measure_time) {
        const int reps = static_cast<int>(std::clamp<std::uint64_t>(
            40'000'000ULL / std::max<std::uint64_t>(muladds, 1), 3, 200'000));
        const auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) body();
        const auto t1 = std::chrono::steady_clock::now();
        ns = std::chrono::duration<double, std::nano>(t1 - t0).count() / reps;
      }
      out.rows.push_back(BenchRow{n, op, muladds, ns});
    };

    counter.mul_adds = 0;
    Eigen::VectorXd sink = f.q().apply(x);
    const std::uint64_t apply_cost = counter.mul_adds;
    timed("apply", [&] { sink.noalias() += f.q().apply(x); }, apply_cost);

    counter.mul_adds = 0;
    sink = f.forward(x);
    const std::uint64_t forward_cost = counter.mul_adds;
    timed("forward", [&] { sink.noalias() += f.forward(x); }, forward_cost);

    counter.mul_adds = 0;
    double qacc = f.quadratic_form(x);
    const std::uint64_t qform_cost = counter.mul_adds;
    timed("quadratic_form", [&] { qacc += f.quadratic_form(x); }, qform_cost);

    const Eigen::MatrixXd dense = Eigen::MatrixXd::NullaryExpr(
        n, n, [](Eigen::Index i, Eigen::Index j) {
          return std::sin(0.001 * static_cast<double>(i * 131 + j));
        });
    timed("dense_matvec", [&] { sink.noalias() += dense * x; },
          static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n));
    bench_guard = bench_guard + sink.sum() + qacc;
  }
  return out;
}

std::string trace_csv(const bh::TrainTrace& trace) {
  std::string csv = "epoch,mean_loss,angle_deg\n";
  for (const auto& rec : trace)
    csv += std::to_string(rec.epoch) + "," + csv_cell(rec.mean_loss) + "," +
           csv_cell(rec.angle_deg) + "\n";
  return csv;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string csv = "n_mu,seed,angle_deg\n";
  for (const auto& cell : sweep.cells)
    csv += std::to_string(cell.n_mu) + "," + std::to_string(cell.seed) + "," +
           csv_cell(cell.angle) + "\n";
  return csv;
}

std::string sweep_mean_csv(const SweepResult& sweep) {
  std::string csv = "n_mu,mean_angle_deg\n";
  for (const auto& [n_mu, angle] : sweep.means)
    csv += std::to_string(n_mu) + "," + csv_cell(angle) + "\n";
  return csv;
}

std::string steps_csv(const std::vector<bh::StepReport>& log) {
  std::string csv = "t,loss,grad_norm,hessian_train_loss,min_d,max_d\n";
  for (const auto& rep : log)
    csv += std::to_string(rep.t) + "," + csv_cell(rep.loss) + "," +
           csv_cell(rep.grad_norm) + "," + csv_cell(rep.hessian_train_loss) +
           "," + csv_cell(rep.min_d) + "," + csv_cell(rep.max_d) + "\n";
  return csv;
}

std::string bench_csv(const BenchResult& bench) {
  std::string csv = "n,op,muladds\n";
  for (const auto& row : bench.rows)
    csv += std::to_string(row.n) + "," + row.op + "," +
           std::to_string(row.muladds) + "\n";
  return csv;
}

Eigen::MatrixXd dense_from_forward(const bh::SymmetricFactorization& f) {
  const int n = f.dim();
  Eigen::MatrixXd out(n, n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    out.col(j) = f.forward(e);
    e[j] = 0.0;
  }
  return out;
}

}  // namespace bhcli
