#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "scbf/common.hpp"
#include "scbf/nn.hpp"

namespace scbf {

// Average Percentage of Zeros per hidden neuron: the fraction of validation
// examples on which the relu activation is exactly zero. The output layer is
// never scored.
template <typename Scalar>
struct ApozScores {
  std::vector<VectorX<Scalar>> hidden;  // hidden[j] has length m_{j+1 layer}
};

struct PruneState {
  Index original_neuron_count = 0;  // hidden layers only
  Index pruned_count = 0;
  double theta = 0.0;
  double theta_total = 0.0;

  double pruned_fraction() const {
    return original_neuron_count == 0
               ? 0.0
               : static_cast<double>(pruned_count) /
                     static_cast<double>(original_neuron_count);
  }

  Index cumulative_cap() const {
    return static_cast<Index>(
        std::ceil(theta_total * static_cast<double>(original_neuron_count)));
  }
};

inline Index hidden_neuron_count(const NetConfig& cfg) {
  Index n = 0;
  for (std::size_t j = 0; j + 1 < cfg.layer_sizes.size(); ++j)
    n += cfg.layer_sizes[j];
  return n;
}

template <typename Scalar, typename Derived>
ApozScores<Scalar> apoz_scores(const ModelParams<Scalar>& params,
                               const Eigen::MatrixBase<Derived>&
                                   validation_inputs) {
  if (validation_inputs.rows() == 0)
    throw InputError("apoz_scores: empty validation set");
  const auto acts = forward(params, validation_inputs);
  const auto layers = params.layer_count();
  ApozScores<Scalar> scores;
  scores.hidden.reserve(static_cast<std::size_t>(layers > 0 ? layers - 1 : 0));
  const Scalar rows = static_cast<Scalar>(validation_inputs.rows());
  for (Index j = 0; j + 1 < layers; ++j) {
    const auto& a = acts[static_cast<std::size_t>(j)];
    VectorX<Scalar> s(a.cols());
    for (Index c = 0; c < a.cols(); ++c) {
      s[c] = static_cast<Scalar>(
                 (a.col(c).array() == Scalar(0)).count()) /
             rows;
    }
    scores.hidden.push_back(std::move(s));
  }
  return scores;
}

// Indices removed from each hidden layer in one prune step, relative to the
// layer sizes before the step. Sorted ascending per layer.
using PrunedIndices = std::vector<std::vector<Index>>;

template <typename Scalar>
struct PruneResult {
  ModelParams<Scalar> params;
  NetConfig net;
  PruneState state;
  PrunedIndices pruned;   // one entry per hidden layer
  PrunedIndices skipped;  // removals refused to keep a layer non-empty
};

namespace detail {

// Structural removal: drop each pruned neuron's row in W_j and B_j and the
// matching column in W_{j+1}.
template <typename Scalar>
ModelParams<Scalar> remove_neurons(const ModelParams<Scalar>& params,
                                   const PrunedIndices& pruned) {
  const Index layers = params.layer_count();
  ModelParams<Scalar> out;
  out.weights.resize(static_cast<std::size_t>(layers));
  out.biases.resize(static_cast<std::size_t>(layers));
  for (Index j = 0; j < layers; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const std::vector<Index> no_rows;
    const std::vector<Index>& dead_rows =
        (j + 1 < layers) ? pruned[ju] : no_rows;
    const std::vector<Index>& dead_cols = (j > 0) ? pruned[ju - 1] : no_rows;

    const auto& w = params.weights[ju];
    std::vector<Index> keep_rows;
    for (Index r = 0; r < w.rows(); ++r) {
      if (!std::binary_search(dead_rows.begin(), dead_rows.end(), r))
        keep_rows.push_back(r);
    }
    std::vector<Index> keep_cols;
    for (Index c = 0; c < w.cols(); ++c) {
      if (!std::binary_search(dead_cols.begin(), dead_cols.end(), c))
        keep_cols.push_back(c);
    }
    out.weights[ju] = w(keep_rows, keep_cols);
    VectorX<Scalar> b(static_cast<Index>(keep_rows.size()));
    for (std::size_t r = 0; r < keep_rows.size(); ++r)
      b[static_cast<Index>(r)] = params.biases[ju][keep_rows[r]];
    out.biases[ju] = std::move(b);
  }
  return out;
}

}  // namespace detail

// Remove ceil(theta * original) hidden neurons with the highest APoZ scores,
// ranked globally across hidden layers (ties: lower layer, then lower neuron
// index), capped so the cumulative count never exceeds
// ceil(theta_total * original). A layer is never pruned below one neuron;
// removals that would empty a layer are skipped in tie order.
template <typename Scalar>
PruneResult<Scalar> prune_step(const ModelParams<Scalar>& params,
                               const NetConfig& cfg,
                               const ApozScores<Scalar>& scores,
                               const PruneState& state) {
  if (!(state.pruned_fraction() < state.theta_total))
    throw InputError("prune_step: cumulative pruned fraction " +
                     std::to_string(state.pruned_fraction()) +
                     " already at theta_total");
  const std::size_t hidden_layers =
      cfg.layer_sizes.size() > 0 ? cfg.layer_sizes.size() - 1 : 0;
  if (scores.hidden.size() != hidden_layers)
    throw ShapeError("prune_step: score layout does not match net");
  for (std::size_t j = 0; j < hidden_layers; ++j) {
    if (scores.hidden[j].size() != cfg.layer_sizes[j])
      throw ShapeError("prune_step: score length mismatch at hidden layer " +
                       std::to_string(j));
  }

  const Index per_step = static_cast<Index>(std::ceil(
      state.theta * static_cast<double>(state.original_neuron_count)));
  const Index budget =
      std::min(per_step, state.cumulative_cap() - state.pruned_count);

  // Global ranking of (score, layer, neuron).
  struct Candidate {
    Scalar score;
    std::size_t layer;
    Index neuron;
  };
  std::vector<Candidate> ranked;
  for (std::size_t j = 0; j < hidden_layers; ++j) {
    for (Index nidx = 0; nidx < scores.hidden[j].size(); ++nidx)
      ranked.push_back({scores.hidden[j][nidx], j, nidx});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Candidate& a,
                                             const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.neuron < b.neuron;
  });

  PruneResult<Scalar> result;
  result.pruned.assign(hidden_layers, {});
  result.skipped.assign(hidden_layers, {});
  std::vector<Index> remaining(cfg.layer_sizes.begin(),
                               cfg.layer_sizes.end() - 1);
  Index taken = 0;
  for (const auto& c : ranked) {
    if (taken >= budget) break;
    if (remaining[c.layer] <= 1) {
      result.skipped[c.layer].push_back(c.neuron);
      continue;
    }
    result.pruned[c.layer].push_back(c.neuron);
    --remaining[c.layer];
    ++taken;
  }
  for (auto& v : result.pruned) std::sort(v.begin(), v.end());
  for (auto& v : result.skipped) std::sort(v.begin(), v.end());

  result.params = detail::remove_neurons(params, result.pruned);
  result.net = cfg;
  for (std::size_t j = 0; j < hidden_layers; ++j)
    result.net.layer_sizes[j] -= static_cast<Index>(result.pruned[j].size());
  result.state = state;
  result.state.pruned_count += taken;
  return result;
}

// Apply the server's structural removals to a client so the shapes match
// again. The client must still have the pre-prune shape.
template <typename Scalar>
ModelParams<Scalar> mirror_prune(const ModelParams<Scalar>& client_params,
                                 const NetConfig& pre_prune_cfg,
                                 const PrunedIndices& pruned) {
  if (!matches_config(client_params, pre_prune_cfg))
    throw SyncError("mirror_prune: client shape differs from pre-prune server");
  if (pruned.size() + 1 != pre_prune_cfg.layer_sizes.size())
    throw SyncError("mirror_prune: pruned index layout mismatch");
  for (std::size_t j = 0; j < pruned.size(); ++j) {
    for (Index nidx : pruned[j]) {
      if (nidx < 0 || nidx >= pre_prune_cfg.layer_sizes[j])
        throw SyncError("mirror_prune: pruned index out of range");
    }
  }
  return detail::remove_neurons(client_params, pruned);
}

}  // namespace scbf
