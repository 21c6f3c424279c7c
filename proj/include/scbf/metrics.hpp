#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "scbf/common.hpp"

namespace scbf {

// AUC-ROC via the rank statistic: sort scores, assign midranks to tied
// groups, then U = (rank sum of positives) - P(P+1)/2 and AUC = U / (P*N).
// Equals the pairwise statistic P(s_pos > s_neg) + 0.5 * P(s_pos == s_neg).
template <typename DerivedS, typename DerivedL>
double auc_roc(const Eigen::MatrixBase<DerivedS>& scores_in,
               const Eigen::MatrixBase<DerivedL>& labels_in) {
  using Scalar = typename DerivedS::Scalar;
  const Eigen::Ref<const VectorX<Scalar>> scores(scores_in.derived());
  const Eigen::Ref<const VectorX<Scalar>> labels(labels_in.derived());
  const Index n = scores.size();
  if (labels.size() != n) throw ShapeError("auc_roc: score/label size mismatch");
  Index positives = 0;
  for (Index i = 0; i < n; ++i) {
    if (labels[i] != Scalar(0) && labels[i] != Scalar(1))
      throw InputError("auc_roc: labels must be 0/1");
    if (labels[i] == Scalar(1)) ++positives;
  }
  const Index negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw MetricError("auc_roc: needs at least one positive and one negative");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j < n && scores[order[static_cast<std::size_t>(j)]] ==
                        scores[order[static_cast<std::size_t>(i)]])
      ++j;
    // 1-based midrank of the tied block [i, j).
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (Index k = i; k < j; ++k) {
      if (labels[order[static_cast<std::size_t>(k)]] == Scalar(1))
        positive_rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

// AUC-PR as average precision with step interpolation: walk thresholds in
// descending score order (equal scores grouped at one threshold) and sum
// precision-at-threshold times the recall gained there.
template <typename DerivedS, typename DerivedL>
double auc_pr(const Eigen::MatrixBase<DerivedS>& scores_in,
              const Eigen::MatrixBase<DerivedL>& labels_in) {
  using Scalar = typename DerivedS::Scalar;
  const Eigen::Ref<const VectorX<Scalar>> scores(scores_in.derived());
  const Eigen::Ref<const VectorX<Scalar>> labels(labels_in.derived());
  const Index n = scores.size();
  if (labels.size() != n) throw ShapeError("auc_pr: score/label size mismatch");
  Index positives = 0;
  for (Index i = 0; i < n; ++i) {
    if (labels[i] != Scalar(0) && labels[i] != Scalar(1))
      throw InputError("auc_pr: labels must be 0/1");
    if (labels[i] == Scalar(1)) ++positives;
  }
  if (positives == 0) throw MetricError("auc_pr: needs at least one positive");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  Index tp = 0;
  Index fp = 0;
  Index i = 0;
  while (i < n) {
    Index j = i;
    Index tp_gain = 0;
    while (j < n && scores[order[static_cast<std::size_t>(j)]] ==
                        scores[order[static_cast<std::size_t>(i)]]) {
      if (labels[order[static_cast<std::size_t>(j)]] == Scalar(1)) ++tp_gain;
      ++j;
    }
    tp += tp_gain;
    fp += (j - i) - tp_gain;
    if (tp_gain > 0) {
      const double precision =
          static_cast<double>(tp) / static_cast<double>(tp + fp);
      ap += precision * static_cast<double>(tp_gain) /
            static_cast<double>(positives);
    }
    i = j;
  }
  return ap;
}

// 1 - (values uploaded by A) / (values uploaded by B).
inline double comm_savings_totals(std::uint64_t uploaded_a,
                                  std::uint64_t uploaded_b) {
  if (uploaded_b == 0)
    throw MetricError("comm_savings: baseline uploaded nothing");
  return 1.0 - static_cast<double>(uploaded_a) / static_cast<double>(uploaded_b);
}

// Record-level form; any record type exposing `uploaded_total` works.
template <typename Record>
double comm_savings(const std::vector<Record>& records_a,
                    const std::vector<Record>& records_b) {
  if (records_a.size() != records_b.size())
    throw InputError("comm_savings: loop counts differ");
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  for (const auto& r : records_a) a += r.uploaded_total;
  for (const auto& r : records_b) b += r.uploaded_total;
  return comm_savings_totals(a, b);
}

}  // namespace scbf
