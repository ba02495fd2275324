#include <doctest.h>

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "bh/errors.hpp"
#include "dataset.hpp"

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("bh_dataset_" + name);
}

void write_bytes(const std::filesystem::path& path,
                 const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!bytes.empty())
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

void push_be32(std::vector<unsigned char>& bytes, std::uint32_t v) {
  bytes.push_back(static_cast<unsigned char>(v >> 24));
  bytes.push_back(static_cast<unsigned char>(v >> 16));
  bytes.push_back(static_cast<unsigned char>(v >> 8));
  bytes.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> idx_bytes(std::uint32_t magic, std::uint32_t count,
                                     std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<unsigned char>& pixels) {
  std::vector<unsigned char> bytes;
  push_be32(bytes, magic);
  push_be32(bytes, count);
  push_be32(bytes, rows);
  push_be32(bytes, cols);
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  return bytes;
}

}  // namespace

TEST_CASE("idx images load as unit-scaled rows") {
  const auto path = temp_file("ok.idx");
  write_bytes(path, idx_bytes(0x00000803u, 2, 2, 2,
                              {0, 51, 102, 153, 204, 255, 0, 128}));
  const auto ds = bhcli::read_idx_images(path.string());
  REQUIRE(ds.rows() == 2);
  REQUIRE(ds.cols() == 4);
  CHECK(ds.data(0, 0) == 0.0);
  CHECK(ds.data(0, 1) == 51.0 / 255.0);
  CHECK(ds.data(0, 3) == 153.0 / 255.0);
  CHECK(ds.data(1, 1) == 1.0);
  CHECK(ds.data(1, 3) == 128.0 / 255.0);
  CHECK(ds.data.maxCoeff() <= 1.0);
  CHECK(ds.data.minCoeff() >= 0.0);
  CHECK(ds.provenance.find("2x2x2") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("idx rejects a bad magic at offset zero") {
  const auto path = temp_file("magic.idx");
  write_bytes(path, idx_bytes(0x00000801u, 1, 1, 1, {7}));
  try {
    bhcli::read_idx_images(path.string());
    FAIL("expected FormatError");
  } catch (const bh::FormatError& e) {
    CHECK(e.offset() == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("idx rejects a truncated header at its end") {
  const auto path = temp_file("header.idx");
  write_bytes(path, {0, 0, 8, 3, 0, 0, 0, 1, 0, 0});
  try {
    bhcli::read_idx_images(path.string());
    FAIL("expected FormatError");
  } catch (const bh::FormatError& e) {
    CHECK(e.offset() == 10);
  }
  std::filesystem::remove(path);
}

TEST_CASE("idx rejects missing pixel bytes at the file end") {
  const auto path = temp_file("pixels.idx");
  auto bytes = idx_bytes(0x00000803u, 2, 2, 2, {1, 2, 3});  // needs 8 pixels
  write_bytes(path, bytes);
  try {
    bhcli::read_idx_images(path.string());
    FAIL("expected FormatError");
  } catch (const bh::FormatError& e) {
    CHECK(e.offset() == bytes.size());
  }
  std::filesystem::remove(path);
}

TEST_CASE("idx rejects zero dimensions") {
  const auto path = temp_file("zero.idx");
  write_bytes(path, idx_bytes(0x00000803u, 0, 2, 2, {}));
  CHECK_THROWS_AS(bhcli::read_idx_images(path.string()), bh::FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("a missing file reports a format error, not a crash") {
  CHECK_THROWS_AS(bhcli::read_idx_images("/nonexistent/bh.idx"),
                  bh::FormatError);
  CHECK_THROWS_AS(bhcli::read_csv_matrix("/nonexistent/bh.csv"),
                  bh::FormatError);
}

TEST_CASE("csv parses signed and exponent-form numbers") {
  const auto path = temp_file("ok.csv");
  write_text(path, "1,2.5\n-3e2,+4.25\n0.125,-0.5\n");
  const auto ds = bhcli::read_csv_matrix(path.string());
  REQUIRE(ds.rows() == 3);
  REQUIRE(ds.cols() == 2);
  CHECK(ds.data(0, 0) == 1.0);
  CHECK(ds.data(0, 1) == 2.5);
  CHECK(ds.data(1, 0) == -300.0);
  CHECK(ds.data(1, 1) == 4.25);
  CHECK(ds.data(2, 0) == 0.125);
  CHECK(ds.data(2, 1) == -0.5);
  std::filesystem::remove(path);
}

TEST_CASE("csv accepts crlf endings and a missing final newline") {
  const auto crlf = temp_file("crlf.csv");
  write_text(crlf, "1,2\r\n3,4\r\n");
  const auto a = bhcli::read_csv_matrix(crlf.string());
  const auto bare = temp_file("noeol.csv");
  write_text(bare, "1,2\n3,4");
  const auto b = bhcli::read_csv_matrix(bare.string());
  CHECK(a.data == b.data);
  REQUIRE(b.rows() == 2);
  CHECK(b.data(1, 1) == 4.0);
  std::filesystem::remove(crlf);
  std::filesystem::remove(bare);
}

TEST_CASE("csv rejects ragged rows") {
  const auto path = temp_file("ragged.csv");
  write_text(path, "1,2\n3\n");
  CHECK_THROWS_AS(bhcli::read_csv_matrix(path.string()), bh::FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("csv pins a non-numeric field to its byte offset") {
  const auto path = temp_file("text.csv");
  write_text(path, "1,2\n3,abc\n");
  try {
    bhcli::read_csv_matrix(path.string());
    FAIL("expected FormatError");
  } catch (const bh::FormatError& e) {
    CHECK(e.offset() == 6);  // the 'a' of abc
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv rejects non-finite and overflowing fields") {
  const auto nan_path = temp_file("nan.csv");
  write_text(nan_path, "nan\n");
  CHECK_THROWS_AS(bhcli::read_csv_matrix(nan_path.string()), bh::FormatError);
  const auto big_path = temp_file("big.csv");
  write_text(big_path, "1e999\n");
  CHECK_THROWS_AS(bhcli::read_csv_matrix(big_path.string()), bh::FormatError);
  std::filesystem::remove(nan_path);
  std::filesystem::remove(big_path);
}

TEST_CASE("csv rejects empty fields, bare CR, and empty files") {
  const auto empty_field = temp_file("field.csv");
  write_text(empty_field, "1,,2\n");
  try {
    bhcli::read_csv_matrix(empty_field.string());
    FAIL("expected FormatError");
  } catch (const bh::FormatError& e) {
    CHECK(e.offset() == 2);
  }
  const auto cr = temp_file("cr.csv");
  write_text(cr, "1,2\r3,4");
  try {
    bhcli::read_csv_matrix(cr.string());
    FAIL("expected FormatError");
  } catch (const bh::FormatError& e) {
    CHECK(e.offset() == 3);
  }
  const auto empty = temp_file("empty.csv");
  write_text(empty, "");
  CHECK_THROWS_AS(bhcli::read_csv_matrix(empty.string()), bh::FormatError);
  std::filesystem::remove(empty_field);
  std::filesystem::remove(cr);
  std::filesystem::remove(empty);
}

TEST_CASE("covariance matches the direct centered outer-product sum") {
  std::mt19937_64 rng(40);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd samples(20, 4);
  for (Eigen::Index r = 0; r < 20; ++r)
    for (Eigen::Index c = 0; c < 4; ++c) samples(r, c) = gauss(rng);

  const Eigen::RowVectorXd mean = samples.colwise().mean();
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(4, 4);
  for (Eigen::Index r = 0; r < 20; ++r) {
    const Eigen::VectorXd d = (samples.row(r) - mean).transpose();
    oracle += d * d.transpose();
  }
  oracle /= 20.0;

  const Eigen::MatrixXd cov = bhcli::covariance(samples);
  CHECK((cov - oracle).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical rows give an exactly zero covariance") {
  // Entries are small dyadic rationals, so the column means are exact and
  // the centered matrix is exactly zero.
  Eigen::MatrixXd samples(3, 3);
  samples.row(0) << 1.5, -2.25, 3.0;
  samples.row(1) = samples.row(0);
  samples.row(2) = samples.row(0);
  CHECK(bhcli::covariance(samples).isZero(0.0));
  Eigen::MatrixXd single = samples.topRows(1);
  CHECK(bhcli::covariance(single).isZero(0.0));
  CHECK_THROWS_AS(bhcli::covariance(Eigen::MatrixXd(0, 3)),
                  std::invalid_argument);
}

TEST_CASE("power-of-two padding for awkward dimensions") {
  CHECK(bhcli::next_pow2(1) == 2);
  CHECK(bhcli::next_pow2(2) == 2);
  CHECK(bhcli::next_pow2(3) == 4);
  CHECK(bhcli::next_pow2(784) == 1024);
  CHECK(bhcli::next_pow2(1024) == 1024);

  Eigen::MatrixXd m(3, 3);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Eigen::MatrixXd padded = bhcli::pad_to_pow2(m);
  REQUIRE(padded.rows() == 4);
  REQUIRE(padded.cols() == 4);
  CHECK(padded.topLeftCorner(3, 3) == m);
  CHECK(padded.row(3).isZero(0.0));
  CHECK(padded.col(3).isZero(0.0));

  Eigen::MatrixXd exact = Eigen::MatrixXd::Random(4, 4);
  CHECK(bhcli::pad_to_pow2(exact) == exact);
  CHECK_THROWS_AS(bhcli::pad_to_pow2(Eigen::MatrixXd(2, 3)),
                  std::invalid_argument);
}
