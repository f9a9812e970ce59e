#include "bmcmc/rating_matrix.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace bmcmc {

RatingMatrix::RatingMatrix(std::size_t n_stimuli, std::size_t n_responses)
    : n_stimuli_(n_stimuli), n_responses_(n_responses), counts_(n_stimuli * n_responses, 0) {}

RatingMatrix::RatingMatrix(std::size_t n_stimuli, std::size_t n_responses,
                           std::vector<std::int64_t> counts)
    : n_stimuli_(n_stimuli), n_responses_(n_responses), counts_(std::move(counts)) {
  if (counts_.size() != n_stimuli_ * n_responses_) {
    throw std::invalid_argument("RatingMatrix: expected " +
                                std::to_string(n_stimuli_ * n_responses_) + " counts");
  }
  for (auto c : counts_) {
    if (c < 0) throw std::invalid_argument("RatingMatrix: negative count");
  }
  for (std::size_t h = 1; h < n_stimuli_; ++h) {
    const auto r0 = row(0);
    const auto rh = row(h);
    if (std::accumulate(rh.begin(), rh.end(), std::int64_t{0}) !=
        std::accumulate(r0.begin(), r0.end(), std::int64_t{0})) {
      throw std::invalid_argument("RatingMatrix: stimulus " + std::to_string(h + 1) +
                                  " has a different number of trials");
    }
  }
}

std::int64_t RatingMatrix::trials_per_stimulus() const {
  if (n_stimuli_ == 0) return 0;
  const auto r0 = row(0);
  return std::accumulate(r0.begin(), r0.end(), std::int64_t{0});
}

double RatingMatrix::proportion(std::size_t h, std::size_t i) const {
  const auto trials = row(h);
  const auto total = std::accumulate(trials.begin(), trials.end(), std::int64_t{0});
  return total == 0 ? 0.0 : static_cast<double>(count(h, i)) / static_cast<double>(total);
}

std::vector<double> RatingMatrix::proportions() const {
  std::vector<double> p(counts_.size());
  for (std::size_t h = 0; h < n_stimuli_; ++h) {
    for (std::size_t i = 0; i < n_responses_; ++i) p[h * n_responses_ + i] = proportion(h, i);
  }
  return p;
}

}  // namespace bmcmc
