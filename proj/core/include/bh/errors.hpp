#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bh {

/// Thrown when a relaxed Givens block has no nearest rotation (the
/// projection denominator vanishes).  Carries the block's location so the
/// caller can reset it or report it.
class DegenerateBlockError : public std::runtime_error {
 public:
  DegenerateBlockError(int layer, int lo, int hi)
      : std::runtime_error("degenerate Givens block in layer " +
                           std::to_string(layer) + " on pair (" +
                           std::to_string(lo) + "," + std::to_string(hi) + ")"),
        layer_(layer), lo_(lo), hi_(hi) {}
  int layer() const { return layer_; }
  int lo() const { return lo_; }
  int hi() const { return hi_; }

 private:
  int layer_, lo_, hi_;
};

/// Malformed serialized record or dataset file.  `offset` is the byte
/// position at which parsing failed, when known.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::size_t offset = 0)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Optimizer produced a non-finite gradient or loss.
class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every sample of a statistic was degenerate and had to be skipped.
class NoValidSamplesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bh
