#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "litevl/tensor.hpp"

namespace litevl {

/// Text-to-video retrieval summary. Recalls are percentages; MdR averages the
/// two middle ranks for even query counts.
struct RetrievalMetrics {
  double r1 = 0, r5 = 0, r10 = 0;
  double mdr = 0;
};

/// Rank of the ground-truth video for text query j in scores[i] = score of
/// video i: 1 + count of strictly better candidates + earlier-indexed ties.
inline std::size_t rank_of_truth(const std::vector<double>& scores, std::size_t truth) {
  if (truth >= scores.size()) throw std::invalid_argument("rank_of_truth: index out of range");
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == truth) continue;
    if (scores[i] > scores[truth] || (scores[i] == scores[truth] && i < truth)) ++rank;
  }
  return rank;
}

inline double recall_at(const std::vector<std::size_t>& ranks, std::size_t k) {
  if (ranks.empty()) throw std::invalid_argument("recall_at: no ranks");
  std::size_t hits = 0;
  for (std::size_t r : ranks) {
    if (r <= k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

inline double median_rank(std::vector<std::size_t> ranks) {
  if (ranks.empty()) throw std::invalid_argument("median_rank: no ranks");
  std::sort(ranks.begin(), ranks.end());
  const std::size_t n = ranks.size();
  if (n % 2 == 1) return static_cast<double>(ranks[n / 2]);
  return (static_cast<double>(ranks[n / 2 - 1]) + static_cast<double>(ranks[n / 2])) / 2.0;
}

inline RetrievalMetrics metrics_from_ranks(const std::vector<std::size_t>& ranks) {
  RetrievalMetrics m;
  m.r1 = recall_at(ranks, 1);
  m.r5 = recall_at(ranks, 5);
  m.r10 = recall_at(ranks, 10);
  m.mdr = median_rank(ranks);
  return m;
}

/// Ranks from a full score matrix, scores(i, j) = score of video i for text j;
/// ground truth is the diagonal.
template <class Real>
std::vector<std::size_t> ranks_from_scores(const Tensor<Real>& scores) {
  scores.require_rank(2);
  const std::size_t n = scores.rows();
  if (scores.cols() != n) throw std::invalid_argument("ranks_from_scores: matrix not square");
  std::vector<std::size_t> ranks(n);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = static_cast<double>(scores(i, j));
    ranks[j] = rank_of_truth(column, j);
  }
  return ranks;
}

template <class Real>
RetrievalMetrics eval_retrieval(const Tensor<Real>& scores) {
  return metrics_from_ranks(ranks_from_scores(scores));
}

}  // namespace litevl
