#include "dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <vector>

#include "bh/errors.hpp"

namespace bhcli {

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bh::FormatError("cannot open " + path, 0);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (static_cast<std::uint32_t>(b[at]) << 24) |
         (static_cast<std::uint32_t>(b[at + 1]) << 16) |
         (static_cast<std::uint32_t>(b[at + 2]) << 8) |
         static_cast<std::uint32_t>(b[at + 3]);
}

}  // namespace

DatasetMatrix read_idx_images(const std::string& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  if (bytes.size() < 16)
    throw bh::FormatError("IDX header truncated in " + path, bytes.size());
  const std::uint32_t magic = be32(bytes, 0);
  if (magic != 0x00000803u)
    throw bh::FormatError("bad IDX magic in " + path + " (expected 0x00000803)",
                          0);
  const std::uint32_t count = be32(bytes, 4);
  const std::uint32_t rows = be32(bytes, 8);
  const std::uint32_t cols = be32(bytes, 12);
  if (count == 0 || rows == 0 || cols == 0)
    throw bh::FormatError("IDX dims contain zero in " + path, 4);
  const std::uint64_t pixels =
      static_cast<std::uint64_t>(count) * rows * cols;
  if (bytes.size() < 16 + pixels)
    throw bh::FormatError("IDX pixel data truncated in " + path, bytes.size());

  DatasetMatrix out;
  out.data.resize(static_cast<Eigen::Index>(count),
                  static_cast<Eigen::Index>(rows * cols));
  for (std::uint32_t s = 0; s < count; ++s)
    for (std::uint32_t p = 0; p < rows * cols; ++p)
      out.data(s, p) =
          bytes[16 + static_cast<std::size_t>(s) * rows * cols + p] / 255.0;
  out.provenance = path + ", IDX " + std::to_string(count) + "x" +
                   std::to_string(rows) + "x" + std::to_string(cols) +
                   ", pixels scaled to [0,1]";
  return out;
}

DatasetMatrix read_csv_matrix(const std::string& path) {
  const std::vector<unsigned char> bytes = slurp(path);
  std::vector<std::vector<double>> rows;
  std::size_t i = 0;
  const std::size_t size = bytes.size();
  while (i < size) {
    // One record per line; a trailing newline does not add an empty record.
    std::vector<double> fields;
    bool line_done = false;
    while (!line_done) {
      const std::size_t field_start = i;
      std::size_t j = i;
      while (j < size && bytes[j] != ',' && bytes[j] != '\n' && bytes[j] != '\r')
        ++j;
      if (j == field_start)
        throw bh::FormatError("empty CSV field in " + path, field_start);
      std::string text(bytes.begin() + static_cast<std::ptrdiff_t>(field_start),
                       bytes.begin() + static_cast<std::ptrdiff_t>(j));
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (end != text.c_str() + text.size() || errno == ERANGE ||
          !std::isfinite(v))
        throw bh::FormatError("non-numeric CSV field '" + text + "' in " + path,
                              field_start);
      fields.push_back(v);
      if (j >= size) {
        i = j;
        line_done = true;
      } else if (bytes[j] == ',') {
        i = j + 1;
      } else {
        i = j + 1;
        if (bytes[j] == '\r') {
          if (i >= size || bytes[i] != '\n')
            throw bh::FormatError("bare CR in " + path, j);
          ++i;
        }
        line_done = true;
      }
    }
    if (!rows.empty() && fields.size() != rows.front().size())
      throw bh::FormatError("ragged CSV row (got " +
                                std::to_string(fields.size()) + " fields, expected " +
                                std::to_string(rows.front().size()) + ") in " + path,
                            i);
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw bh::FormatError("empty CSV file " + path, 0);

  DatasetMatrix out;
  out.data.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows.front().size(); ++c)
      out.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
  out.provenance = path + ", CSV " + std::to_string(rows.size()) + "x" +
                   std::to_string(rows.front().size());
  return out;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 1)
    throw std::invalid_argument("covariance: no samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  return centered.transpose() * centered /
         static_cast<double>(samples.rows());
}

int next_pow2(int n) {
  if (n < 2) return 2;
  int p = 2;
  while (p < n) p *= 2;
  return p;
}

Eigen::MatrixXd pad_to_pow2(const Eigen::MatrixXd& square) {
  if (square.rows() != square.cols())
    throw std::invalid_argument("pad_to_pow2: matrix must be square");
  const int n = static_cast<int>(square.rows());
  const int padded = next_pow2(n);
  if (padded == n) return square;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(padded, padded);
  out.topLeftCorner(n, n) = square;
  return out;
}

}  // namespace bhcli
