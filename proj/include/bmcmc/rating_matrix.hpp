#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bmcmc {

/// Response counts for N stimuli by M+1 ordered responses; every row sums to
/// the same number of trials per stimulus.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  /// Zero counts.
  RatingMatrix(std::size_t n_stimuli, std::size_t n_responses);
  /// Row-major counts. Throws std::invalid_argument when rows sum unequally
  /// or a count is negative.
  RatingMatrix(std::size_t n_stimuli, std::size_t n_responses, std::vector<std::int64_t> counts);

  std::size_t n_stimuli() const noexcept { return n_stimuli_; }
  std::size_t n_responses() const noexcept { return n_responses_; }
  std::int64_t trials_per_stimulus() const;

  std::int64_t count(std::size_t h, std::size_t i) const { return counts_[h * n_responses_ + i]; }
  void increment(std::size_t h, std::size_t i) { ++counts_[h * n_responses_ + i]; }
  std::span<const std::int64_t> row(std::size_t h) const {
    return std::span<const std::int64_t>(counts_).subspan(h * n_responses_, n_responses_);
  }
  std::span<const std::int64_t> counts() const noexcept { return counts_; }

  /// count / trials for one cell.
  double proportion(std::size_t h, std::size_t i) const;
  /// Row-major proportions.
  std::vector<double> proportions() const;

  bool operator==(const RatingMatrix&) const = default;

 private:
  std::size_t n_stimuli_ = 0;
  std::size_t n_responses_ = 0;
  std::vector<std::int64_t> counts_;
};

}  // namespace bmcmc
