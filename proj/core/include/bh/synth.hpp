#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace bh::synth {

/// Ensemble of symmetric test matrices: H = R diag(lambda) R^T with R Haar
/// rotation, lambda_i = |mu_i|.  A few "dominant" entries draw mu around
/// dominant_mean; the bulk draws mu around zero with bulk_std.
struct SyntheticSpec {
  int n = 64;
  int n_mu = 5;
  double bulk_std = 0.1;
  double dominant_mean = 1.0;
  double dominant_var = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticHessian {
  Eigen::MatrixXd h;
  Eigen::MatrixXd rotation;     // columns are the eigenvectors
  Eigen::VectorXd eigenvalues;  // aligned with rotation's columns
  std::vector<int> dominant;    // sorted positions of the dominant draws
};

// Haar-distributed rotation (det +1): QR of an i.i.d. Gaussian matrix with
// the R-diagonal sign correction, then one column flip if det is -1.
Eigen::MatrixXd haar_rotation(int n, std::mt19937_64& rng);
Eigen::MatrixXd haar_rotation(int n, std::uint64_t seed);

SyntheticHessian synthetic_hessian(const SyntheticSpec& spec);

// count i.i.d. draws, uniform on the unit sphere (normalized Gaussians).
std::vector<Eigen::VectorXd> sample_unit_sphere(int n, int count,
                                                std::uint64_t seed);

// count i.i.d. draws, uniform on [-half_width, half_width]^n.
std::vector<Eigen::VectorXd> sample_hypercube(int n, int count,
                                              std::uint64_t seed,
                                              double half_width = 1.0);

}  // namespace bh::synth
