#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bh/factorization.hpp"
#include "bh/hesstrack.hpp"
#include "bh/objectives.hpp"
#include "dataset.hpp"

namespace bhcli {

// Runs fn(0..jobs-1) on a small thread pool; results must be written to
// job-indexed slots so aggregation order never depends on scheduling.
// workers == 0 picks the hardware default.  Worker exceptions are rethrown.
void parallel_for_ordered(int jobs, int workers,
                          const std::function<void(int)>& fn);

std::string csv_cell(double v);  // fixed "%.12g" rendering, "nan" for NaN

// ---------------------------------------------------------------- training

enum class ApproxTarget {
  Ensemble,        // synthetic spectrum ensemble via bh::synth
  ExactButterfly,  // target drawn from an exact factorization (recovery test)
};

struct ApproxConfig {
  int n = 64;
  int n_mu = 5;
  int m = 1000;  // training pairs (x, Hx)
  int epochs = 2000;
  double lr_q = 0.05;
  double lr_d = 0.005;
  double lr_decay = 1.0;
  int batch = 1;
  int steps_per_epoch = 0;  // 0: one pass worth of draws per epoch
  std::uint64_t seed = 0;
  int trace_angle_samples = 128;   // per-epoch diagnostic angle (0 = off)
  int final_angle_samples = 1000;  // fresh evaluation set for the result
  ApproxTarget target = ApproxTarget::Ensemble;
};

struct ApproxResult {
  bh::TrainTrace trace;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_angle = 0.0;
};

ApproxResult run_synth_approx(const ApproxConfig& cfg);

enum class RotationTarget { Haar, ExactButterfly };

struct RotationConfig {
  int n = 64;
  int m = 1000;
  int epochs = 2000;
  double lr_q = 0.05;
  double lr_decay = 1.0;
  int batch = 1;
  int steps_per_epoch = 0;
  std::uint64_t seed = 0;
  int trace_angle_samples = 128;
  int final_angle_samples = 1000;
  RotationTarget target = RotationTarget::Haar;
};

ApproxResult run_rotation(const RotationConfig& cfg);

struct SweepConfig {
  std::vector<int> n_mu_values;
  int seeds = 5;
  std::uint64_t base_seed = 0;
  ApproxConfig run;  // per-cell template; n_mu and seed are overridden
  int workers = 0;
};

struct SweepCell {
  int n_mu = 0;
  std::uint64_t seed = 0;
  double angle = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;                 // grid-ordered
  std::vector<std::pair<int, double>> means;    // (n_mu, mean angle)
};

SweepResult run_nmu_sweep(const SweepConfig& cfg);

// -------------------------------------------------------------- covariance

struct CovarianceConfig {
  std::string path;
  enum class Format { Idx, Csv } format = Format::Csv;
  int m_train = 2000;
  int epochs = 300;
  double lr_q = 0.05;
  double lr_d = 0.005;
  double lr_decay = 1.0;
  int batch = 1;
  double data_fraction = 0.5;  // centered data rows; the rest is unit sphere
  std::uint64_t seed = 0;
  int trace_angle_samples = 0;
  int angle_samples = 500;
};

struct CovarianceResult {
  std::string provenance;
  long rows = 0;
  int raw_dim = 0;
  int padded_dim = 0;
  bh::TrainTrace trace;
  bh::AngleReport angle{0.0, 0, 0};  // mean NaN + used 0 when all degenerate
  Eigen::MatrixXd cov_active;        // empirical covariance, unpadded block
  Eigen::MatrixXd model_active;      // learned operator, same block
  std::optional<bh::SymmetricFactorization> model;
};

CovarianceResult run_covariance(const CovarianceConfig& cfg);

// ---------------------------------------------------------------- optimize

struct OptimizeConfig {
  std::string objective = "quadratic";  // quadratic|lstsq|logistic|rosenbrock
  int n = 64;
  double cond = 100.0;  // quadratic spectrum spread
  int m = 256;          // sample count for data-backed objectives
  double noise = 0.1;   // lstsq label noise
  double reg = 1e-3;    // logistic l2 weight
  bh::TrackerOptions tracker;
  int steps = 2000;
  double target_loss = 0.0;  // > 0: stop once the step's loss reaches it
  std::uint64_t seed = 0;
};

struct OptimizeResult {
  std::vector<bh::StepReport> log;
  double final_loss = 0.0;
  int iterations_to_target = -1;
  std::uint64_t gradient_evals = 0;
};

std::unique_ptr<bh::Objective> make_objective(const OptimizeConfig& cfg);
Eigen::VectorXd default_start(const OptimizeConfig& cfg);
OptimizeResult run_optimize(const OptimizeConfig& cfg);

// ------------------------------------------------------------------- bench

struct BenchRow {
  int n = 0;
  std::string op;
  std::uint64_t muladds = 0;
  double ns_per_call = 0.0;  // informational; excluded from the CSV
};

struct BenchResult {
  std::vector<BenchRow> rows;
};

BenchResult run_bench(const std::vector<int>& sizes, bool measure_time,
                      std::uint64_t seed);

// --------------------------------------------------------------------- CSV

std::string trace_csv(const bh::TrainTrace& trace);
std::string sweep_csv(const SweepResult& sweep);
std::string sweep_mean_csv(const SweepResult& sweep);
std::string steps_csv(const std::vector<bh::StepReport>& log);
std::string bench_csv(const BenchResult& bench);

// Dense matrix of the model's action, one forward per basis vector.
Eigen::MatrixXd dense_from_forward(const bh::SymmetricFactorization& f);

}  // namespace bhcli
