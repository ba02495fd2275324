#pragma once

#include <string>

#include <Eigen/Dense>

namespace bhcli {

/// Row-major sample matrix loaded from disk: one sample per row.
struct DatasetMatrix {
  Eigen::MatrixXd data;
  std::string provenance;  // source file, format, shape, scaling applied

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }
};

// IDX image file (big-endian magic 0x00000803, dims count/rows/cols, one
// byte per pixel).  Pixels are scaled to [0,1].  Malformed input throws
// bh::FormatError carrying the byte offset.
DatasetMatrix read_idx_images(const std::string& path);

// Numeric CSV, one sample per row, comma-separated real64 decimal fields,
// no quoting and no header.  Ragged rows or non-numeric fields throw
// bh::FormatError carrying the byte offset.
DatasetMatrix read_csv_matrix(const std::string& path);

// Empirical covariance (1/m) * sum (x - mean)(x - mean)^T over rows.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& samples);

int next_pow2(int n);

// Zero-pads a square matrix up to next_pow2(size), at least 2.
Eigen::MatrixXd pad_to_pow2(const Eigen::MatrixXd& square);

}  // namespace bhcli
