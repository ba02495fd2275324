#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bh/butterfly.hpp"

namespace bh {

/// One supervised pair for matrix learning: y is the target product H x.
struct TrainSample {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// Callable computing the target product x -> H x.
using MatVec = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct TrainConfig {
  double lr_q = 0.05;   ///< learning rate for block entries
  double lr_d = 0.005;  ///< learning rate for the diagonal (kept smaller)
  double lr_decay = 1.0;  ///< per-epoch multiplier applied to both rates
  int epochs = 200;
  int batch_size = 1;  ///< 1 = single-sample SGD; >1 averages the batch
  int steps_per_epoch = 0;  ///< 0: ceil(sample count / batch_size)
  std::uint64_t rng_seed = 0;
  DegeneratePolicy degenerate_policy = DegeneratePolicy::ResetIdentity;
  /// Sample count for the per-epoch angle column of the trace (only used
  /// when an oracle is supplied).  The evaluation set is drawn once.
  int trace_angle_samples = 128;

  void validate() const;
};

/// Symmetric model H_hat = Q D Q^T with butterfly Q and diagonal D.
/// The diagonal is unconstrained during learning; inverse application
/// floors it at eig_floor.
class SymmetricFactorization {
 public:
  SymmetricFactorization(ButterflyProduct q, Eigen::VectorXd d,
                         double eig_floor = 1e-8);
  /// Identity model: Q = I rotation product, D = ones.
  static SymmetricFactorization identity(int n);

  int dim() const { return q_.dim(); }
  const ButterflyProduct& q() const { return q_; }
  ButterflyProduct& q() { return q_; }
  const Eigen::VectorXd& diagonal() const { return d_; }
  Eigen::VectorXd& diagonal() { return d_; }
  double eig_floor() const { return eig_floor_; }
  void set_eig_floor(double eps) { eig_floor_ = eps; }

  /// Stored relaxed parameters: 2 n lg n block entries plus n diagonal ones.
  std::size_t parameter_count() const { return q_.parameter_count() + d_.size(); }

  void attach_counter(OpCounter* counter);
  OpCounter* counter() const { return counter_; }

  /// Q (D (Q^T x)); 4 n lg n + n multiply-adds.
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  /// Q (clamp(D, eps)^-1 (Q^T x)) with clamp(d, eps)_i = max(d_i, eps):
  /// negative and tiny diagonal entries are floored before inversion.
  Eigen::VectorXd inverse_apply(const Eigen::VectorXd& x, double eps) const;
  Eigen::VectorXd inverse_apply(const Eigen::VectorXd& x) const {
    return inverse_apply(x, eig_floor_);
  }

  /// sum_i d_i (Q^T x)_i^2; 2 n lg n + 2 n multiply-adds.
  double quadratic_form(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd to_dense() const;

  /// Checkpoint record: butterfly record, then n f64 diagonal entries, then
  /// f64 eig_floor, little-endian.
  void save(std::ostream& out) const;
  static SymmetricFactorization load(std::istream& in);

 private:
  ButterflyProduct q_;
  Eigen::VectorXd d_;
  double eig_floor_;
  OpCounter* counter_ = nullptr;
};

/// Gradient with the same shape as the relaxed parameter set.
struct LayerGrad {
  std::vector<double> a, b, c, d;
};

struct FactorizationGradient {
  std::vector<LayerGrad> layers;
  Eigen::VectorXd diag;

  static FactorizationGradient zeros_like(const SymmetricFactorization& f);
  void set_zero();
  void add(const FactorizationGradient& other, double scale = 1.0);
  void scale(double s);
  double max_abs() const;
};

/// The two weight-sharing contributions to the block gradient: each layer
/// acts once inside Q and once inside Q^T, and the true gradient is their
/// sum.  The diagonal has a single occurrence.
struct SharedWeightGradient {
  std::vector<LayerGrad> q_pass;   ///< accumulated where the layer acts as Q_i
  std::vector<LayerGrad> qt_pass;  ///< accumulated where the layer acts as Q_i^T
  Eigen::VectorXd diag;

  FactorizationGradient total() const;
};

/// ||forward(x) - y||_2^2.
double loss(const SymmetricFactorization& f, const TrainSample& s);

/// Exact gradient of `loss` with respect to every relaxed parameter,
/// by backpropagation through the 2 lg(n) + 1 sparse stages.  Instrumented
/// cost: evaluation + backward pass + gradient accumulation, each
/// 4 n lg n + n multiply-adds.
FactorizationGradient loss_gradient(const SymmetricFactorization& f,
                                    const TrainSample& s);
SharedWeightGradient loss_gradient_shared(const SymmetricFactorization& f,
                                          const TrainSample& s);

/// One relaxed gradient step on the mean batch loss, then projection.
/// Returns the mean pre-update loss.
double sgd_step(SymmetricFactorization& f, std::span<const TrainSample> batch,
                double lr_q, double lr_d, DegeneratePolicy policy);

struct EpochRecord {
  int epoch;
  double mean_loss;
  double angle_deg;  ///< NaN when no oracle was supplied
};
using TrainTrace = std::vector<EpochRecord>;
using EpochCallback = std::function<void(const EpochRecord&)>;

/// SGD matrix learning: per step, draw a sample (or batch) uniformly at
/// random, take one relaxed gradient step, and project Q back onto the
/// rotation products.  Deterministic for a fixed seed.
TrainTrace train(SymmetricFactorization& f,
                 const std::vector<TrainSample>& samples,
                 const TrainConfig& cfg, const MatVec& oracle = {},
                 const EpochCallback& on_epoch = {});

/// Rotation-only variant: the model is just Q and the loss ||Q x - y||_2^2
/// with y = R x.  Projection after every step, as in `train`.
TrainTrace train_rotation_only(ButterflyProduct& q,
                               const std::vector<TrainSample>& samples,
                               const TrainConfig& cfg,
                               const MatVec& oracle = {},
                               const EpochCallback& on_epoch = {});

enum class SampleDomain { UnitSphere, Hypercube };

struct AngleOptions {
  int samples = 1000;
  std::uint64_t seed = 0;
  SampleDomain domain = SampleDomain::UnitSphere;
  /// Compare only the leading `active_dim` coordinates (0 = all); used when
  /// the model works in a zero-padded space.
  int active_dim = 0;
};

struct AngleReport {
  double mean_deg;
  int used;
  int skipped;
};

/// Mean angle, in degrees, between model(x) and oracle(x) over random
/// test vectors.  Pairs where either vector is numerically zero are skipped
/// and counted; throws NoValidSamplesError when nothing remains.
AngleReport average_angle_report(const MatVec& model, const MatVec& oracle,
                                 int n, const AngleOptions& opts);
double average_angle(const SymmetricFactorization& f, const MatVec& oracle,
                     const AngleOptions& opts);

}  // namespace bh
