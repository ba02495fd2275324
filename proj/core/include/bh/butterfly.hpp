#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bh/errors.hpp"

namespace bh {

/// Multiply-add tally.  Attached by the owner of the enclosing structure;
/// kernels add to it only while a counter is attached.
struct OpCounter {
  std::uint64_t mul_adds = 0;
};

/// What to do with a degenerate block during projection.
enum class DegeneratePolicy {
  Abort,          ///< throw DegenerateBlockError
  ResetIdentity,  ///< replace the block with the identity rotation
};

/// One 2x2 block [[a, b], [c, d]] acting on the coordinate pair (lo, hi).
/// Relaxed during a gradient step; a rotation (a=d, b=-c, a^2+b^2=1) after
/// projection.
struct GivensBlock {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
  int lo = 0, hi = 1;

  bool is_rotation(double tol = 1e-12) const;
};

/// Coordinate pairs of butterfly stage `layer` (1-based, 1..lg n) in
/// dimension n: with p = n / 2^layer the pairs are (2pk + j, 2pk + p + j)
/// for k = 0..2^(layer-1)-1, j = 0..p-1.  The n/2 pairs partition
/// {0,...,n-1}.
std::vector<std::pair<int, int>> pairing(int n, int layer);

/// True when n is a power of two (n >= 2).
bool is_pow2_dim(int n);

/// floor(log2 n) for a power-of-two n.
int log2_exact(int n);

/// One sparse rotation stage: n/2 independent 2x2 blocks on the stage's
/// coordinate pairs.  Parameters are stored as four contiguous arrays in
/// block order, which is what the relaxed SGD update walks.
class ButterflyLayer {
 public:
  ButterflyLayer(int n, int index);  // identity blocks

  int dim() const { return n_; }
  int index() const { return index_; }      ///< 1-based stage index
  int stride() const { return stride_; }    ///< pair distance p = n / 2^index
  int block_count() const { return n_ / 2; }

  std::pair<int, int> pair(int t) const {
    const int k = t / stride_, j = t % stride_;
    const int lo = 2 * stride_ * k + j;
    return {lo, lo + stride_};
  }
  GivensBlock block(int t) const;
  void set_block(int t, double a, double b, double c, double d);

  std::span<double> a() { return a_; }
  std::span<double> b() { return b_; }
  std::span<double> c() { return c_; }
  std::span<double> d() { return d_; }
  std::span<const double> a() const { return a_; }
  std::span<const double> b() const { return b_; }
  std::span<const double> c() const { return c_; }
  std::span<const double> d() const { return d_; }

  void apply_in_place(double* x) const;
  void apply_transpose_in_place(double* x) const;

  /// Nearest-rotation projection of every block.  Returns the number of
  /// degenerate blocks reset (ResetIdentity) or throws (Abort).
  int project(DegeneratePolicy policy);

 private:
  int n_, index_, stride_;
  std::vector<double> a_, b_, c_, d_;
};

/// Product of lg(n) butterfly stages, Q = Q_1 Q_2 ... Q_lg(n).  Applying Q
/// to a vector costs 2 n lg(n) multiply-adds; the relaxed parameter storage
/// is 2 n lg(n) doubles.  Immutable operations (apply/apply_transpose/
/// to_dense) are safe for concurrent readers; projection and parameter
/// updates need exclusive access.
class ButterflyProduct {
 public:
  explicit ButterflyProduct(int n);  // identity

  /// Build from n·lg(n)/2 rotation angles, layer-major, pair order inside a
  /// layer.  Every block becomes (cos t, -sin t, sin t, cos t).
  static ButterflyProduct from_angles(int n, std::span<const double> angles);

  int dim() const { return n_; }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  ButterflyLayer& layer(int i) { return layers_[static_cast<std::size_t>(i)]; }
  const ButterflyLayer& layer(int i) const { return layers_[static_cast<std::size_t>(i)]; }

  /// True while parameters may be off the rotation manifold (after a raw
  /// update, before projection).
  bool relaxed() const { return relaxed_; }
  void mark_relaxed() { relaxed_ = true; }

  std::size_t parameter_count() const;  // 2 n lg n

  void attach_counter(OpCounter* counter) { counter_ = counter; }
  OpCounter* counter() const { return counter_; }

  /// Q x = Q_1 (Q_2 (... (Q_lg(n) x))).
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// Q^T x = Q_lg(n)^T (... (Q_1^T x)).
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const;

  void apply_in_place(double* x) const;
  void apply_transpose_in_place(double* x) const;

  /// Project every block onto the nearest 2x2 rotation,
  ///   proj [[a,b],[c,d]] = 1/eta [[a+d, b-c], [c-b, a+d]],
  ///   eta = sqrt((a+d)^2 + (b-c)^2),
  /// the polar factor of the block.  Idempotent.  Blocks with
  /// eta < 1e-12 * max(1, |block|_max) follow `policy`.
  void project(DegeneratePolicy policy = DegeneratePolicy::Abort);

  /// Explicit n x n matrix, built from scattered per-stage dense factors.
  /// Intended for testing and small-n materialization.
  Eigen::MatrixXd to_dense() const;

  /// Binary record: u64 n, u64 lg n, u64 relaxed flag, then per layer
  /// ascending, per block in pair order, f64 (a, b, c, d), all little-endian.
  void save(std::ostream& out) const;
  static ButterflyProduct load(std::istream& in);

 private:
  int n_ = 0;
  bool relaxed_ = false;
  std::vector<ButterflyLayer> layers_;
  OpCounter* counter_ = nullptr;
};

}  // namespace bh
