#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "scbf/common.hpp"
#include "scbf/nn.hpp"

namespace scbf {

// A channel picks one neuron per layer: indices [i_1, ..., i_L], zero-based.
using ChannelIndex = std::vector<Index>;

inline constexpr std::size_t kDefaultMaxChannels = 10'000'000;

// Number of channels, i.e. the product of all layer sizes. Throws
// CapacityError (naming the product) when it exceeds max_channels.
inline std::size_t channel_count(const std::vector<Index>& layer_sizes,
                                 std::size_t max_channels =
                                     kDefaultMaxChannels) {
  std::size_t product = 1;
  for (Index m : layer_sizes) {
    if (m < 1) throw InputError("channel_count: layer size must be >= 1");
    const auto mu = static_cast<std::size_t>(m);
    if (product > max_channels / mu)
      throw CapacityError("channel count " + std::to_string(product) + "*" +
                          std::to_string(mu) + "... exceeds limit " +
                          std::to_string(max_channels));
    product *= mu;
  }
  if (product > max_channels)
    throw CapacityError("channel count " + std::to_string(product) +
                        " exceeds limit " + std::to_string(max_channels));
  return product;
}

// Flat position of a channel in lexicographic order (i_1 most significant).
inline std::size_t flatten_channel(const std::vector<Index>& layer_sizes,
                                   const ChannelIndex& idx) {
  if (idx.size() != layer_sizes.size())
    throw InputError("flatten_channel: index length != layer count");
  std::size_t flat = 0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] < 0 || idx[j] >= layer_sizes[j])
      throw InputError("flatten_channel: index " + std::to_string(idx[j]) +
                       " out of range for layer " + std::to_string(j));
    flat = flat * static_cast<std::size_t>(layer_sizes[j]) +
           static_cast<std::size_t>(idx[j]);
  }
  return flat;
}

inline ChannelIndex unflatten_channel(const std::vector<Index>& layer_sizes,
                                      std::size_t flat) {
  ChannelIndex idx(layer_sizes.size());
  for (std::size_t j = layer_sizes.size(); j-- > 0;) {
    const auto m = static_cast<std::size_t>(layer_sizes[j]);
    idx[j] = static_cast<Index>(flat % m);
    flat /= m;
  }
  return idx;
}

// Norm of every channel, flattened in lexicographic ChannelIndex order.
template <typename Scalar>
struct ChannelNormTable {
  std::vector<Index> layer_sizes;
  VectorX<Scalar> values;

  std::size_t total_channels() const {
    return static_cast<std::size_t>(values.size());
  }
};

// A set of channels, stored as sorted flat positions.
struct ChannelSelection {
  std::vector<Index> layer_sizes;
  std::vector<std::size_t> flat;  // ascending == lexicographic order

  std::size_t size() const { return flat.size(); }

  std::vector<ChannelIndex> indices() const {
    std::vector<ChannelIndex> out;
    out.reserve(flat.size());
    for (std::size_t f : flat) out.push_back(unflatten_channel(layer_sizes, f));
    return out;
  }
};

inline ChannelSelection complement(const ChannelSelection& sel,
                                   std::size_t max_channels =
                                       kDefaultMaxChannels) {
  const std::size_t total = channel_count(sel.layer_sizes, max_channels);
  ChannelSelection out{sel.layer_sizes, {}};
  out.flat.reserve(total - sel.flat.size());
  std::size_t cursor = 0;
  for (std::size_t f = 0; f < total; ++f) {
    if (cursor < sel.flat.size() && sel.flat[cursor] == f) {
      ++cursor;
    } else {
      out.flat.push_back(f);
    }
  }
  return out;
}

// Boolean structure congruent to a GradientDelta marking the parameters to
// upload. selected_channel_count is the number of kept channels behind it.
struct SelectionMask {
  std::vector<BoolMatrixX> weights;
  std::vector<BoolVectorX> biases;
  std::size_t selected_channel_count = 0;
};

struct MaskStats {
  std::uint64_t uploaded_params = 0;
  std::uint64_t total_params = 0;
  double fraction = 0.0;
};

// Channel norm per the tensor-T construction: for channel (i_1, ..., i_L) the
// value is the sum of squared deltas along its path,
//
//   ||row i_1 of dW_1||^2 + sum_{j>=2} dW_j(i_j, i_{j-1})^2 + sum_j dB_j(i_j)^2.
//
// The whole input-edge row of the first-layer neuron belongs to the channel
// because input neurons are not part of the index. Sum of squares, no root:
// selection is order-based so the root is immaterial.
template <typename Scalar>
ChannelNormTable<Scalar> channel_norms(const GradientDelta<Scalar>& delta,
                                       std::size_t max_channels =
                                           kDefaultMaxChannels) {
  const Index layers = delta.layer_count();
  if (layers == 0) throw InputError("channel_norms: empty delta");
  std::vector<Index> sizes(static_cast<std::size_t>(layers));
  for (Index j = 0; j < layers; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    sizes[ju] = delta.weights[ju].rows();
    if (delta.biases[ju].size() != sizes[ju] ||
        (j > 0 && delta.weights[ju].cols() != sizes[ju - 1]))
      throw ShapeError("channel_norms: delta layers are not shape-congruent");
  }
  const std::size_t total = channel_count(sizes, max_channels);

  // Per-layer contributions. For j == 0 a per-neuron value (aggregated input
  // row plus bias); for j >= 1 a per-edge value with the bias of the upper
  // neuron folded in, so each path sum visits every term exactly once.
  VectorX<Scalar> first = delta.weights[0].rowwise().squaredNorm() +
                          delta.biases[0].array().square().matrix();
  std::vector<MatrixX<Scalar>> edge(static_cast<std::size_t>(layers));
  for (Index j = 1; j < layers; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    edge[ju] = delta.weights[ju].array().square().matrix();
    edge[ju].colwise() += delta.biases[ju].array().square().matrix();
  }

  ChannelNormTable<Scalar> table;
  table.layer_sizes = sizes;
  table.values.resize(static_cast<Index>(total));

  // Strides of the lexicographic flattening.
  std::vector<std::size_t> stride(sizes.size());
  std::size_t s = 1;
  for (std::size_t j = sizes.size(); j-- > 0;) {
    stride[j] = s;
    s *= static_cast<std::size_t>(sizes[j]);
  }

  // Depth-first accumulation over layers; partial sums are shared across all
  // channels with a common prefix.
  auto fill = [&](auto&& self, std::size_t j, Index prev, Scalar acc,
                  std::size_t base) -> void {
    const Index m = sizes[j];
    for (Index n = 0; n < m; ++n) {
      const Scalar v =
          acc + (j == 0 ? first[n] : edge[j](n, prev));
      const std::size_t off = base + static_cast<std::size_t>(n) * stride[j];
      if (j + 1 == sizes.size()) {
        table.values[static_cast<Index>(off)] = v;
      } else {
        self(self, j + 1, n, v, off);
      }
    }
  };
  fill(fill, 0, 0, Scalar(0), 0);
  return table;
}

// Top k = ceil(alpha * C) channels by norm; ties broken toward the
// lexicographically smaller channel index. Realizes the upload-rate reading
// of the quantile threshold with deterministic tie handling.
template <typename Scalar>
ChannelSelection select_top_channels(const ChannelNormTable<Scalar>& norms,
                                     double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw InputError("select_top_channels: alpha must be in (0, 1]");
  const std::size_t total = norms.total_channels();
  if (total == 0) throw InputError("select_top_channels: empty norm table");
  std::size_t k = static_cast<std::size_t>(
      std::ceil(alpha * static_cast<double>(total)));
  k = std::min(std::max<std::size_t>(k, 1), total);

  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto better = [&](std::size_t a, std::size_t b) {
    if (norms.values[static_cast<Index>(a)] !=
        norms.values[static_cast<Index>(b)])
      return norms.values[static_cast<Index>(a)] >
             norms.values[static_cast<Index>(b)];
    return a < b;
  };
  if (k < total)
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                     order.end(), better);
  order.resize(k);
  std::sort(order.begin(), order.end());
  return ChannelSelection{norms.layer_sizes, std::move(order)};
}

namespace detail {

// Marks, per layer, which neurons and which incoming edges lie on at least
// one path of `sel`.
struct PathCover {
  std::vector<BoolVectorX> neuron;           // [j][n]
  std::vector<BoolMatrixX> edge;             // [j](n, prev), j >= 1
};

inline PathCover cover_paths(const ChannelSelection& sel) {
  const std::size_t layers = sel.layer_sizes.size();
  PathCover c;
  c.neuron.resize(layers);
  c.edge.resize(layers);
  for (std::size_t j = 0; j < layers; ++j) {
    c.neuron[j] = BoolVectorX::Constant(sel.layer_sizes[j], false);
    if (j > 0)
      c.edge[j] = BoolMatrixX::Constant(sel.layer_sizes[j],
                                        sel.layer_sizes[j - 1], false);
  }
  for (std::size_t f : sel.flat) {
    const ChannelIndex idx = unflatten_channel(sel.layer_sizes, f);
    for (std::size_t j = 0; j < layers; ++j) {
      c.neuron[j][idx[j]] = true;
      if (j > 0) c.edge[j](idx[j], idx[j - 1]) = true;
    }
  }
  return c;
}

inline void check_selection_shapes(const ChannelSelection& sel,
                                   const NetConfig& cfg) {
  if (sel.layer_sizes != cfg.layer_sizes)
    throw InputError("selection layer sizes do not match the net config");
  const std::size_t total = channel_count(sel.layer_sizes);
  for (std::size_t f : sel.flat) {
    if (f >= total)
      throw InputError("channel id " + std::to_string(f) + " out of range");
  }
}

}  // namespace detail

// Positive selection: a parameter is uploaded iff it lies on at least one
// kept channel's path. The path of (i_1, ..., i_L) covers the whole input
// row of W_1 at i_1, the single edge (i_j, i_{j-1}) for j >= 2, and the bias
// of every neuron on the path.
inline SelectionMask mask_positive(const ChannelSelection& kept,
                                   const NetConfig& cfg) {
  detail::check_selection_shapes(kept, cfg);
  const auto cover = detail::cover_paths(kept);
  SelectionMask mask;
  mask.selected_channel_count = kept.size();
  const std::size_t layers = cfg.layer_sizes.size();
  mask.weights.resize(layers);
  mask.biases.resize(layers);
  for (std::size_t j = 0; j < layers; ++j) {
    const Index rows = cfg.layer_sizes[j];
    const Index cols = cfg.fan_in(static_cast<Index>(j));
    if (j == 0) {
      mask.weights[j] = cover.neuron[0].replicate(1, cols);
    } else {
      mask.weights[j] = cover.edge[j];
    }
    mask.biases[j] = cover.neuron[j];
    if (mask.weights[j].rows() != rows || mask.weights[j].cols() != cols)
      throw ShapeError("mask_positive: internal shape drift");
  }
  return mask;
}

// Negative selection: a parameter is uploaded iff NO discarded channel's path
// covers it. This is the entrywise complement of the discarded set's
// positive cover, so mask_negative(complement of kept) is a subset of
// mask_positive(kept).
inline SelectionMask mask_negative(const ChannelSelection& discarded,
                                   const NetConfig& cfg) {
  detail::check_selection_shapes(discarded, cfg);
  SelectionMask mask = mask_positive(discarded, cfg);
  for (auto& w : mask.weights) w = !w;
  for (auto& b : mask.biases) b = !b;
  mask.selected_channel_count =
      channel_count(cfg.layer_sizes) - discarded.size();
  return mask;
}

template <typename Scalar>
GradientDelta<Scalar> apply_mask(const GradientDelta<Scalar>& delta,
                                 const SelectionMask& mask) {
  if (delta.weights.size() != mask.weights.size())
    throw ShapeError("apply_mask: layer count mismatch");
  GradientDelta<Scalar> out;
  out.weights.resize(delta.weights.size());
  out.biases.resize(delta.biases.size());
  for (std::size_t j = 0; j < delta.weights.size(); ++j) {
    if (delta.weights[j].rows() != mask.weights[j].rows() ||
        delta.weights[j].cols() != mask.weights[j].cols() ||
        delta.biases[j].size() != mask.biases[j].size())
      throw ShapeError("apply_mask: shape mismatch at layer " +
                       std::to_string(j));
    out.weights[j] =
        mask.weights[j].select(delta.weights[j].array(), Scalar(0)).matrix();
    out.biases[j] =
        mask.biases[j].select(delta.biases[j].array(), Scalar(0)).matrix();
  }
  return out;
}

inline MaskStats mask_stats(const SelectionMask& mask) {
  MaskStats s;
  for (std::size_t j = 0; j < mask.weights.size(); ++j) {
    s.uploaded_params += static_cast<std::uint64_t>(mask.weights[j].count());
    s.uploaded_params += static_cast<std::uint64_t>(mask.biases[j].count());
    s.total_params += static_cast<std::uint64_t>(mask.weights[j].size());
    s.total_params += static_cast<std::uint64_t>(mask.biases[j].size());
  }
  s.fraction = s.total_params == 0
                   ? 0.0
                   : static_cast<double>(s.uploaded_params) /
                         static_cast<double>(s.total_params);
  return s;
}

}  // namespace scbf
