#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bh/errors.hpp"
#include "experiments.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace {

using namespace bhcli;

std::string out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

void add_common_train_options(CLI::App* cmd, ApproxConfig& cfg) {
  cmd->add_option("--n", cfg.n, "problem dimension (power of two)");
  cmd->add_option("--m", cfg.m, "training pair count");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--lr-q", cfg.lr_q, "rotation-block learning rate");
  cmd->add_option("--lr-d", cfg.lr_d, "diagonal learning rate");
  cmd->add_option("--lr-decay", cfg.lr_decay, "per-epoch learning rate factor");
  cmd->add_option("--batch", cfg.batch, "minibatch size");
  cmd->add_option("--steps-per-epoch", cfg.steps_per_epoch,
                  "SGD steps per epoch (0: one pass)");
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_option("--trace-angle-samples", cfg.trace_angle_samples,
                  "per-epoch angle diagnostic sample count (0: off)");
  cmd->add_option("--angle-samples", cfg.final_angle_samples,
                  "final angle evaluation sample count");
}

int cmd_synth_approx(const ApproxConfig& cfg, const std::string& out_dir) {
  const ApproxResult res = run_synth_approx(cfg);
  const std::string trace_path = out_path(out_dir, "synth_approx_trace.csv");
  write_text_file(trace_path, trace_csv(res.trace));

  std::vector<Series> angle_series, loss_series;
  Series angle{"average angle (deg)", {}, {}}, lossrow{"mean loss", {}, {}};
  for (const auto& rec : res.trace) {
    angle.x.push_back(rec.epoch);
    angle.y.push_back(rec.angle_deg);
    lossrow.x.push_back(rec.epoch);
    lossrow.y.push_back(rec.mean_loss);
  }
  angle_series.push_back(std::move(angle));
  loss_series.push_back(std::move(lossrow));
  PlotOptions po;
  po.title = "average error angle vs epoch";
  po.x_label = "epoch";
  po.y_label = "angle (deg)";
  const std::string angle_path = out_path(out_dir, "synth_approx_angle.svg");
  write_text_file(angle_path, line_plot_svg(angle_series, po));
  po.title = "training loss vs epoch";
  po.y_label = "mean squared error";
  po.log_y = true;
  const std::string loss_path = out_path(out_dir, "synth_approx_loss.svg");
  write_text_file(loss_path, line_plot_svg(loss_series, po));

  std::printf("target=%s n=%d n_mu=%d m=%d epochs=%d seed=%llu\n",
              cfg.target == ApproxTarget::Ensemble ? "ensemble" : "butterfly",
              cfg.n, cfg.n_mu, cfg.m, cfg.epochs,
              static_cast<unsigned long long>(cfg.seed));
  std::printf("initial loss %.6g, final loss %.6g\n", res.initial_loss,
              res.final_loss);
  std::printf("final average angle: %.3f deg (%d samples)\n", res.final_angle,
              cfg.final_angle_samples);
  std::printf("wrote %s, %s, %s\n", trace_path.c_str(), angle_path.c_str(),
              loss_path.c_str());
  return 0;
}

int cmd_rotation(const RotationConfig& cfg, const std::string& out_dir) {
  const ApproxResult res = run_rotation(cfg);
  const std::string trace_path = out_path(out_dir, "rotation_trace.csv");
  write_text_file(trace_path, trace_csv(res.trace));

  Series angle{"average angle (deg)", {}, {}};
  for (const auto& rec : res.trace) {
    angle.x.push_back(rec.epoch);
    angle.y.push_back(rec.angle_deg);
  }
  PlotOptions po;
  po.title = "rotation learning: average angle vs epoch";
  po.x_label = "epoch";
  po.y_label = "angle (deg)";
  const std::string angle_path = out_path(out_dir, "rotation_angle.svg");
  write_text_file(angle_path, line_plot_svg({angle}, po));

  std::printf("target=%s n=%d m=%d epochs=%d seed=%llu\n",
              cfg.target == RotationTarget::Haar ? "haar" : "butterfly", cfg.n,
              cfg.m, cfg.epochs, static_cast<unsigned long long>(cfg.seed));
  std::printf("initial loss %.6g, final loss %.6g\n", res.initial_loss,
              res.final_loss);
  std::printf("final average angle: %.3f deg (%d samples)\n", res.final_angle,
              cfg.final_angle_samples);
  std::printf("wrote %s, %s\n", trace_path.c_str(), angle_path.c_str());
  return 0;
}

int cmd_nmu_sweep(const SweepConfig& cfg, const std::string& out_dir) {
  const SweepResult res = run_nmu_sweep(cfg);
  const std::string cells_path = out_path(out_dir, "nmu_sweep.csv");
  const std::string mean_path = out_path(out_dir, "nmu_sweep_mean.csv");
  write_text_file(cells_path, sweep_csv(res));
  write_text_file(mean_path, sweep_mean_csv(res));

  Series mean{"mean final angle (deg)", {}, {}};
  for (const auto& [n_mu, angle] : res.means) {
    mean.x.push_back(n_mu);
    mean.y.push_back(angle);
  }
  PlotOptions po;
  po.title = "final angle vs dominant eigenvalue count";
  po.x_label = "n_mu";
  po.y_label = "angle (deg)";
  const std::string plot_path = out_path(out_dir, "nmu_sweep.svg");
  write_text_file(plot_path, line_plot_svg({mean}, po));

  std::printf("n=%d seeds=%d epochs=%d m=%d\n", cfg.run.n, cfg.seeds,
              cfg.run.epochs, cfg.run.m);
  for (const auto& [n_mu, angle] : res.means)
    std::printf("n_mu=%3d  mean angle %.3f deg\n", n_mu, angle);
  std::printf("wrote %s, %s, %s\n", cells_path.c_str(), mean_path.c_str(),
              plot_path.c_str());
  return 0;
}

int cmd_covariance(const CovarianceConfig& cfg, const std::string& out_dir) {
  const CovarianceResult res = run_covariance(cfg);

  const std::string ckpt_path = out_path(out_dir, "covariance.ckpt");
  {
    std::ofstream ck(ckpt_path, std::ios::binary);
    if (!ck) throw std::runtime_error("cannot write " + ckpt_path);
    res.model->save(ck);
  }
  std::string summary = "key,value\n";
  summary += "source,\"" + res.provenance + "\"\n";
  summary += "rows," + std::to_string(res.rows) + "\n";
  summary += "raw_dim," + std::to_string(res.raw_dim) + "\n";
  summary += "padded_dim," + std::to_string(res.padded_dim) + "\n";
  summary += "angle_deg," + csv_cell(res.angle.mean_deg) + "\n";
  summary += "angle_samples_used," + std::to_string(res.angle.used) + "\n";
  summary += "angle_samples_skipped," + std::to_string(res.angle.skipped) + "\n";
  const std::string summary_path = out_path(out_dir, "covariance_summary.csv");
  write_text_file(summary_path, summary);

  const std::string heat_path = out_path(out_dir, "covariance_heatmaps.svg");
  write_text_file(heat_path,
                  heatmap_pair_svg(res.cov_active, "empirical covariance",
                                   res.model_active, "learned approximation"));
  if (!res.trace.empty() && cfg.trace_angle_samples > 0) {
    write_text_file(out_path(out_dir, "covariance_trace.csv"),
                    trace_csv(res.trace));
  }

  std::printf("source: %s\n", res.provenance.c_str());
  std::printf("covariance %dx%d, padded to %d\n", res.raw_dim, res.raw_dim,
              res.padded_dim);
  if (res.angle.used == 0)
    std::printf("average angle: no valid samples (%d degenerate pairs)\n",
                res.angle.skipped);
  else
    std::printf("average angle over unpadded subspace: %.3f deg (%d used, %d skipped)\n",
                res.angle.mean_deg, res.angle.used, res.angle.skipped);
  std::printf("wrote %s, %s, %s\n", ckpt_path.c_str(), summary_path.c_str(),
              heat_path.c_str());
  return 0;
}

int cmd_optimize(const OptimizeConfig& cfg, bool with_baseline,
                 double beta_plain, const std::string& out_dir) {
  const OptimizeResult res = run_optimize(cfg);
  const std::string run_path = out_path(out_dir, "optimize_run.csv");
  write_text_file(run_path, steps_csv(res.log));

  const char* mode_name =
      cfg.tracker.mode == bh::TrackMode::TrackHessian
          ? "track_hessian"
          : cfg.tracker.mode == bh::TrackMode::TrackInverseHessian
                ? "track_inverse_hessian"
                : "plain_gd";

  std::vector<Series> series;
  Series main_series{std::string(mode_name), {}, {}};
  for (const auto& rep : res.log) {
    main_series.x.push_back(rep.t);
    main_series.y.push_back(rep.loss);
  }
  series.push_back(std::move(main_series));

  std::printf("objective=%s n=%d mode=%s beta=%g steps=%zu\n",
              cfg.objective.c_str(), cfg.n, mode_name, cfg.tracker.beta,
              res.log.size());
  std::printf("final loss %.6g, gradient evals %llu\n", res.final_loss,
              static_cast<unsigned long long>(res.gradient_evals));
  if (cfg.target_loss > 0.0) {
    if (res.iterations_to_target >= 0)
      std::printf("reached target %.3g at iteration %d\n", cfg.target_loss,
                  res.iterations_to_target);
    else
      std::printf("target %.3g not reached\n", cfg.target_loss);
  }

  if (with_baseline && cfg.tracker.mode != bh::TrackMode::PlainGd) {
    OptimizeConfig base = cfg;
    base.tracker.mode = bh::TrackMode::PlainGd;
    base.tracker.batch_policy = bh::BatchPolicy::FullBatch;
    if (beta_plain > 0.0) base.tracker.beta = beta_plain;
    const OptimizeResult plain = run_optimize(base);
    const std::string plain_path = out_path(out_dir, "optimize_plain.csv");
    write_text_file(plain_path, steps_csv(plain.log));
    Series plain_series{"plain_gd", {}, {}};
    for (const auto& rep : plain.log) {
      plain_series.x.push_back(rep.t);
      plain_series.y.push_back(rep.loss);
    }
    series.push_back(std::move(plain_series));
    std::printf("plain GD baseline: final loss %.6g (beta=%g), wrote %s\n",
                plain.final_loss, base.tracker.beta, plain_path.c_str());
  }

  PlotOptions po;
  po.title = std::string("optimization on ") + cfg.objective;
  po.x_label = "iteration";
  po.y_label = "loss";
  po.log_y = true;
  const std::string plot_path = out_path(out_dir, "optimize_loss.svg");
  write_text_file(plot_path, line_plot_svg(series, po));
  std::printf("wrote %s, %s\n", run_path.c_str(), plot_path.c_str());
  return 0;
}

int cmd_bench(const std::vector<int>& sizes, bool no_time, std::uint64_t seed,
              const std::string& out_dir) {
  const BenchResult res = run_bench(sizes, !no_time, seed);
  const std::string csv_path = out_path(out_dir, "bench.csv");
  write_text_file(csv_path, bench_csv(res));

  std::printf("%6s  %-15s  %12s  %14s\n", "n", "op", "muladds", "ns/call");
  for (const auto& row : res.rows) {
    if (no_time)
      std::printf("%6d  %-15s  %12llu  %14s\n", row.n, row.op.c_str(),
                  static_cast<unsigned long long>(row.muladds), "-");
    else
      std::printf("%6d  %-15s  %12llu  %14.1f\n", row.n, row.op.c_str(),
                  static_cast<unsigned long long>(row.muladds),
                  row.ns_per_call);
  }
  std::printf("wrote %s (counts only; timings are run-dependent)\n",
              csv_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "bh: butterfly-factorized symmetric operators - training and "
      "optimization experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string out_dir = "bh_out";
  app.add_option("--out", out_dir, "output directory")->capture_default_str();

  // synth-approx
  auto* sa = app.add_subcommand(
      "synth-approx", "learn a synthetic symmetric matrix from (x, Hx) pairs");
  sa->set_config("--config", "", "key=value config file");
  ApproxConfig sa_cfg;
  add_common_train_options(sa, sa_cfg);
  sa->add_option("--n-mu", sa_cfg.n_mu, "dominant eigenvalue count");
  std::string sa_target = "ensemble";
  sa->add_option("--target", sa_target,
                 "target kind: ensemble | butterfly (exact recovery)")
      ->check(CLI::IsMember({"ensemble", "butterfly"}));

  // rotation
  auto* ro = app.add_subcommand("rotation",
                                "learn a rotation matrix with a single "
                                "butterfly product");
  ro->set_config("--config", "", "key=value config file");
  RotationConfig ro_cfg;
  ro->add_option("--n", ro_cfg.n, "problem dimension (power of two)");
  ro->add_option("--m", ro_cfg.m, "training pair count");
  ro->add_option("--epochs", ro_cfg.epochs, "training epochs");
  ro->add_option("--lr-q", ro_cfg.lr_q, "rotation-block learning rate");
  ro->add_option("--lr-decay", ro_cfg.lr_decay, "per-epoch learning rate factor");
  ro->add_option("--batch", ro_cfg.batch, "minibatch size");
  ro->add_option("--steps-per-epoch", ro_cfg.steps_per_epoch,
                 "SGD steps per epoch (0: one pass)");
  ro->add_option("--seed", ro_cfg.seed, "RNG seed");
  ro->add_option("--trace-angle-samples", ro_cfg.trace_angle_samples,
                 "per-epoch angle diagnostic sample count (0: off)");
  ro->add_option("--angle-samples", ro_cfg.final_angle_samples,
                 "final angle evaluation sample count");
  std::string ro_target = "haar";
  ro->add_option("--target", ro_target, "target kind: haar | butterfly")
      ->check(CLI::IsMember({"haar", "butterfly"}));

  // nmu-sweep
  auto* sw = app.add_subcommand(
      "nmu-sweep", "final angle as a function of the dominant eigenvalue count");
  sw->set_config("--config", "", "key=value config file");
  SweepConfig sw_cfg;
  sw_cfg.n_mu_values = {0, 2, 4, 8, 16, 32, 48, 62, 64};
  sw_cfg.run.trace_angle_samples = 0;
  sw->add_option("--n-mu", sw_cfg.n_mu_values, "n_mu grid values");
  sw->add_option("--seeds", sw_cfg.seeds, "seeds per grid point");
  sw->add_option("--base-seed", sw_cfg.base_seed, "seed offset for the grid");
  sw->add_option("--workers", sw_cfg.workers, "parallel workers (0: auto)");
  add_common_train_options(sw, sw_cfg.run);

  // covariance
  auto* cv = app.add_subcommand(
      "covariance", "learn the empirical covariance of a dataset");
  cv->set_config("--config", "", "key=value config file");
  CovarianceConfig cv_cfg;
  std::string cv_path;
  std::string cv_format = "auto";
  cv->add_option("--data", cv_path, "dataset file (IDX images or numeric CSV)")
      ->required();
  cv->add_option("--format", cv_format, "idx | csv | auto (by extension)")
      ->check(CLI::IsMember({"idx", "csv", "auto"}));
  cv->add_option("--m-train", cv_cfg.m_train, "training vector count");
  cv->add_option("--epochs", cv_cfg.epochs, "training epochs");
  cv->add_option("--lr-q", cv_cfg.lr_q, "rotation-block learning rate");
  cv->add_option("--lr-d", cv_cfg.lr_d, "diagonal learning rate");
  cv->add_option("--lr-decay", cv_cfg.lr_decay, "per-epoch learning rate factor");
  cv->add_option("--batch", cv_cfg.batch, "minibatch size");
  cv->add_option("--data-fraction", cv_cfg.data_fraction,
                 "fraction of training vectors drawn from the data");
  cv->add_option("--seed", cv_cfg.seed, "RNG seed");
  cv->add_option("--trace-angle-samples", cv_cfg.trace_angle_samples,
                 "per-epoch angle diagnostic sample count (0: off)");
  cv->add_option("--angle-samples", cv_cfg.angle_samples,
                 "final angle evaluation sample count");

  // optimize
  auto* op = app.add_subcommand(
      "optimize", "gradient descent with an online-tracked Hessian model");
  op->set_config("--config", "", "key=value config file");
  OptimizeConfig op_cfg;
  std::string op_mode = "track";
  std::string op_policy = "full";
  bool op_literal = false, op_line_search = false, op_no_baseline = false;
  double op_beta_plain = 0.0;
  op->add_option("--objective", op_cfg.objective,
                 "quadratic | lstsq | logistic | rosenbrock");
  op->add_option("--n", op_cfg.n, "problem dimension (power of two)");
  op->add_option("--cond", op_cfg.cond, "quadratic condition number");
  op->add_option("--m", op_cfg.m, "sample count (lstsq / logistic)");
  op->add_option("--noise", op_cfg.noise, "lstsq label noise");
  op->add_option("--reg", op_cfg.reg, "logistic l2 regularization");
  op->add_option("--mode", op_mode, "track | inverse | plain")
      ->check(CLI::IsMember({"track", "inverse", "plain"}));
  op->add_option("--beta", op_cfg.tracker.beta, "descent step size");
  op->add_option("--alpha-q", op_cfg.tracker.alpha_q,
                 "model rotation learning rate");
  op->add_option("--alpha-d", op_cfg.tracker.alpha_d,
                 "model diagonal learning rate");
  op->add_option("--epsilon-rel", op_cfg.tracker.epsilon_rel,
                 "diagonal floor, relative to median |d|");
  op->add_option("--epsilon-abs", op_cfg.tracker.epsilon_abs,
                 "diagonal floor, absolute lower bound");
  op->add_option("--epsilon-fixed", op_cfg.tracker.epsilon_fixed,
                 "fixed diagonal floor overriding the adaptive one");
  op->add_flag("--literal-forward", op_literal,
               "step along the model's forward action (pseudocode-literal)");
  op->add_flag("--line-search", op_line_search,
               "Armijo backtracking on the step size");
  op->add_option("--policy", op_policy,
                 "minibatch policy: full | recompute | reuse")
      ->check(CLI::IsMember({"full", "recompute", "reuse"}));
  op->add_option("--batch-size", op_cfg.tracker.batch_size, "minibatch size");
  op->add_option("--reuse", op_cfg.tracker.batch_reuse,
                 "consecutive steps per minibatch under the reuse policy");
  op->add_option("--steps", op_cfg.steps, "iteration budget");
  op->add_option("--target-loss", op_cfg.target_loss,
                 "stop once the loss reaches this value (0: run all steps)");
  op->add_option("--seed", op_cfg.seed, "RNG seed");
  op->add_flag("--no-baseline", op_no_baseline,
               "skip the plain-GD comparison run");
  op->add_option("--beta-plain", op_beta_plain,
                 "step size for the baseline (default: same as --beta)");

  // bench
  auto* be = app.add_subcommand(
      "bench", "MulAdd counts and wall time vs a dense baseline");
  be->set_config("--config", "", "key=value config file");
  std::vector<int> be_sizes = {256, 1024, 4096};
  bool be_no_time = false;
  std::uint64_t be_seed = 0;
  be->add_option("--sizes", be_sizes, "dimensions to benchmark");
  be->add_flag("--no-time", be_no_time, "skip wall-clock measurements");
  be->add_option("--seed", be_seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sa->parsed()) {
      sa_cfg.target = sa_target == "butterfly" ? ApproxTarget::ExactButterfly
                                               : ApproxTarget::Ensemble;
      return cmd_synth_approx(sa_cfg, out_dir);
    }
    if (ro->parsed()) {
      ro_cfg.target = ro_target == "butterfly" ? RotationTarget::ExactButterfly
                                               : RotationTarget::Haar;
      return cmd_rotation(ro_cfg, out_dir);
    }
    if (sw->parsed()) return cmd_nmu_sweep(sw_cfg, out_dir);
    if (cv->parsed()) {
      cv_cfg.path = cv_path;
      if (cv_format == "auto")
        cv_format = cv_path.size() >= 4 &&
                            cv_path.compare(cv_path.size() - 4, 4, ".csv") == 0
                        ? "csv"
                        : "idx";
      cv_cfg.format = cv_format == "idx" ? CovarianceConfig::Format::Idx
                                         : CovarianceConfig::Format::Csv;
      return cmd_covariance(cv_cfg, out_dir);
    }
    if (op->parsed()) {
      op_cfg.tracker.mode = op_mode == "plain"
                                ? bh::TrackMode::PlainGd
                                : op_mode == "inverse"
                                      ? bh::TrackMode::TrackInverseHessian
                                      : bh::TrackMode::TrackHessian;
      op_cfg.tracker.batch_policy =
          op_policy == "full" ? bh::BatchPolicy::FullBatch
                              : op_policy == "recompute"
                                    ? bh::BatchPolicy::RecomputePrev
                                    : bh::BatchPolicy::Reuse;
      op_cfg.tracker.literal_forward_step = op_literal;
      op_cfg.tracker.line_search = op_line_search;
      op_cfg.tracker.rng_seed = op_cfg.seed + 1;
      return cmd_optimize(op_cfg, !op_no_baseline, op_beta_plain, out_dir);
    }
    if (be->parsed()) return cmd_bench(be_sizes, be_no_time, be_seed, out_dir);
  } catch (const bh::FormatError& e) {
    std::fprintf(stderr, "data format error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
