#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "scbf/common.hpp"
#include "scbf/rng.hpp"

namespace scbf {

enum class Activation { kRelu, kSigmoid };
enum class Loss { kBinaryCrossEntropy };

// Topology of a dense feed-forward net: input_dim inputs, then
// layer_sizes[0..L-1] neurons per layer. The last layer is the output layer
// and must have exactly one neuron (binary output).
struct NetConfig {
  Index input_dim = 0;
  std::vector<Index> layer_sizes;
  Activation hidden_activation = Activation::kRelu;
  Activation output_activation = Activation::kSigmoid;
  Loss loss = Loss::kBinaryCrossEntropy;

  Index layer_count() const { return static_cast<Index>(layer_sizes.size()); }

  void validate() const {
    if (input_dim < 1) throw InputError("NetConfig: input_dim must be >= 1");
    if (layer_sizes.empty())
      throw InputError("NetConfig: layer_sizes must be non-empty");
    for (Index m : layer_sizes) {
      if (m < 1) throw InputError("NetConfig: every layer size must be >= 1");
    }
    if (layer_sizes.back() != 1)
      throw InputError("NetConfig: output layer must have exactly 1 neuron");
    if (hidden_activation != Activation::kRelu)
      throw InputError("NetConfig: hidden activation must be relu");
    if (output_activation != Activation::kSigmoid)
      throw InputError("NetConfig: output activation must be sigmoid");
  }

  // Fan-in of layer j (input_dim for j == 0).
  Index fan_in(Index j) const {
    return j == 0 ? input_dim : layer_sizes[static_cast<std::size_t>(j - 1)];
  }

  bool operator==(const NetConfig&) const = default;
};

// weights[j] has shape (m_j x m_{j-1}); biases[j] has length m_j.
template <typename Scalar>
struct ModelParams {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;

  Index layer_count() const { return static_cast<Index>(weights.size()); }
};

// Change in every parameter over one local training loop (after - before).
// Shape-congruent to the ModelParams it was derived from.
template <typename Scalar>
struct GradientDelta {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;

  Index layer_count() const { return static_cast<Index>(weights.size()); }
};

struct TrainHyper {
  std::int64_t local_epochs = 1;
  Index batch_size = 32;
  double learning_rate = 0.1;
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    if (local_epochs < 0)
      throw InputError("TrainHyper: local_epochs must be >= 0");
    if (batch_size < 1) throw InputError("TrainHyper: batch_size must be >= 1");
    if (!(learning_rate > 0.0))
      throw InputError("TrainHyper: learning_rate must be > 0");
  }

  bool operator==(const TrainHyper&) const = default;
};

namespace detail {

template <typename A, typename B>
bool congruent(const A& a, const B& b) {
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t j = 0; j < a.weights.size(); ++j) {
    if (a.weights[j].rows() != b.weights[j].rows() ||
        a.weights[j].cols() != b.weights[j].cols() ||
        a.biases[j].size() != b.biases[j].size())
      return false;
  }
  return true;
}

inline std::string shape_string(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

template <typename Scalar>
bool same_shape(const ModelParams<Scalar>& a, const ModelParams<Scalar>& b) {
  return detail::congruent(a, b);
}

template <typename Scalar>
bool same_shape(const ModelParams<Scalar>& a, const GradientDelta<Scalar>& b) {
  return detail::congruent(a, b);
}

template <typename Scalar>
bool matches_config(const ModelParams<Scalar>& p, const NetConfig& cfg) {
  if (p.layer_count() != cfg.layer_count()) return false;
  for (Index j = 0; j < p.layer_count(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (p.weights[ju].rows() != cfg.layer_sizes[ju] ||
        p.weights[ju].cols() != cfg.fan_in(j) ||
        p.biases[ju].size() != cfg.layer_sizes[ju])
      return false;
  }
  return true;
}

template <typename Paramlike>
std::uint64_t param_count(const Paramlike& p) {
  std::uint64_t n = 0;
  for (std::size_t j = 0; j < p.weights.size(); ++j) {
    n += static_cast<std::uint64_t>(p.weights[j].size());
    n += static_cast<std::uint64_t>(p.biases[j].size());
  }
  return n;
}

// Fan-in scaled uniform init: W_j ~ U(-s, s) with s = sqrt(1 / fan_in);
// biases start at zero. Deterministic for a given seed.
template <typename Scalar = double>
ModelParams<Scalar> init_params(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams<Scalar> p;
  p.weights.reserve(cfg.layer_sizes.size());
  p.biases.reserve(cfg.layer_sizes.size());
  for (Index j = 0; j < cfg.layer_count(); ++j) {
    const Index rows = cfg.layer_sizes[static_cast<std::size_t>(j)];
    const Index cols = cfg.fan_in(j);
    const double s = std::sqrt(1.0 / static_cast<double>(cols));
    MatrixX<Scalar> w(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        w(r, c) = static_cast<Scalar>(rng.uniform(-s, s));
      }
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(VectorX<Scalar>::Zero(rows));
  }
  return p;
}

template <typename Scalar>
MatrixX<Scalar> relu(const MatrixX<Scalar>& z) {
  return z.cwiseMax(Scalar(0));
}

// 0.5 * (1 + tanh(z/2)) is sigmoid without overflow at large |z|.
template <typename Scalar>
MatrixX<Scalar> sigmoid(const MatrixX<Scalar>& z) {
  return (Scalar(0.5) * ((z.array() * Scalar(0.5)).tanh() + Scalar(1)))
      .matrix();
}

// Forward pass over a (batch x input_dim) matrix. Returns the activation of
// every layer (relu for hidden, sigmoid for the output layer); the last
// element holds the predictions. All activations are kept because both
// backprop and APoZ scoring need them.
template <typename Scalar, typename Derived>
std::vector<MatrixX<Scalar>> forward(const ModelParams<Scalar>& params,
                                     const Eigen::MatrixBase<Derived>& inputs) {
  static_assert(std::is_same_v<typename Derived::Scalar, Scalar>,
                "input scalar type must match the model");
  const Index layers = params.layer_count();
  if (layers == 0) throw ShapeError("forward: empty model");
  if (inputs.cols() != params.weights[0].cols())
    throw ShapeError("forward: input has " + std::to_string(inputs.cols()) +
                     " columns, model expects " +
                     std::to_string(params.weights[0].cols()));
  std::vector<MatrixX<Scalar>> acts;
  acts.reserve(static_cast<std::size_t>(layers));
  MatrixX<Scalar> a = inputs;
  for (Index j = 0; j < layers; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    MatrixX<Scalar> z = a * params.weights[ju].transpose();
    z.rowwise() += params.biases[ju].transpose();
    a = (j + 1 == layers) ? sigmoid(z) : relu(z);
    acts.push_back(a);
  }
  return acts;
}

// Gradient of the mean binary cross-entropy over the batch, with respect to
// every weight and bias. Labels must be exactly 0 or 1.
template <typename Scalar, typename DerivedX, typename DerivedY>
GradientDelta<Scalar> backward_batch(const ModelParams<Scalar>& params,
                                     const Eigen::MatrixBase<DerivedX>& inputs_in,
                                     const Eigen::MatrixBase<DerivedY>& labels_in) {
  static_assert(std::is_same_v<typename DerivedX::Scalar, Scalar> &&
                    std::is_same_v<typename DerivedY::Scalar, Scalar>,
                "input scalar type must match the model");
  // Ref binds plain matrices without copying and evaluates expressions once.
  const Eigen::Ref<const MatrixX<Scalar>> inputs(inputs_in.derived());
  const Eigen::Ref<const VectorX<Scalar>> labels(labels_in.derived());
  const Index batch = inputs.rows();
  if (batch == 0) throw InputError("backward_batch: empty batch");
  if (labels.size() != batch)
    throw ShapeError("backward_batch: " + std::to_string(batch) +
                     " rows but " + std::to_string(labels.size()) + " labels");
  for (Index i = 0; i < batch; ++i) {
    if (labels[i] != Scalar(0) && labels[i] != Scalar(1))
      throw InputError("backward_batch: label at row " + std::to_string(i) +
                       " is not 0/1");
  }

  if (params.weights.back().rows() != 1)
    throw ShapeError("backward_batch: output layer must have one neuron");

  const auto acts = forward(params, inputs);
  const Index layers = params.layer_count();

  GradientDelta<Scalar> grad;
  grad.weights.resize(static_cast<std::size_t>(layers));
  grad.biases.resize(static_cast<std::size_t>(layers));

  // Sigmoid + BCE collapse to dZ = (p - y) / batch at the output layer.
  MatrixX<Scalar> dz = (acts.back().col(0) - labels) / static_cast<Scalar>(batch);
  for (Index j = layers - 1; j >= 0; --j) {
    const auto ju = static_cast<std::size_t>(j);
    grad.weights[ju] = (j == 0) ? MatrixX<Scalar>(dz.transpose() * inputs)
                                : MatrixX<Scalar>(dz.transpose() * acts[ju - 1]);
    grad.biases[ju] = dz.colwise().sum().transpose();
    if (j > 0) {
      MatrixX<Scalar> da = dz * params.weights[ju];
      // relu'(z) = 1 where the activation is strictly positive.
      dz = (acts[ju - 1].array() > Scalar(0))
               .select(da.array(), Scalar(0))
               .matrix();
    }
  }
  return grad;
}

// One local training round: local_epochs of mini-batch SGD with a seeded
// shuffle per epoch. Returns the trained parameters and the per-parameter
// change. The returned params are reconstructed as params + delta, so
// `params + delta == new_params` holds exactly, entry for entry.
template <typename Scalar, typename DerivedX, typename DerivedY>
std::pair<ModelParams<Scalar>, GradientDelta<Scalar>> local_round(
    const ModelParams<Scalar>& params,
    const Eigen::MatrixBase<DerivedX>& inputs_in,
    const Eigen::MatrixBase<DerivedY>& labels_in, const TrainHyper& hyper) {
  static_assert(std::is_same_v<typename DerivedX::Scalar, Scalar> &&
                    std::is_same_v<typename DerivedY::Scalar, Scalar>,
                "input scalar type must match the model");
  const Eigen::Ref<const MatrixX<Scalar>> inputs(inputs_in.derived());
  const Eigen::Ref<const VectorX<Scalar>> labels(labels_in.derived());
  hyper.validate();
  if (inputs.rows() == 0) throw InputError("local_round: empty dataset");
  if (labels.size() != inputs.rows())
    throw ShapeError("local_round: feature/label row mismatch");

  ModelParams<Scalar> current = params;
  const Index n = inputs.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  MatrixX<Scalar> bx;
  VectorX<Scalar> by;
  for (std::int64_t epoch = 0; epoch < hyper.local_epochs; ++epoch) {
    Rng rng(derive_seed(hyper.shuffle_seed,
                        static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    for (Index start = 0; start < n; start += hyper.batch_size) {
      const Index len = std::min(hyper.batch_size, n - start);
      bx.resize(len, inputs.cols());
      by.resize(len);
      for (Index r = 0; r < len; ++r) {
        const Index src = order[static_cast<std::size_t>(start + r)];
        bx.row(r) = inputs.row(src);
        by[r] = labels[src];
      }
      const auto grad = backward_batch(current, bx, by);
      const Scalar lr = static_cast<Scalar>(hyper.learning_rate);
      for (std::size_t j = 0; j < current.weights.size(); ++j) {
        current.weights[j] -= lr * grad.weights[j];
        current.biases[j] -= lr * grad.biases[j];
      }
    }
  }

  GradientDelta<Scalar> delta;
  delta.weights.resize(current.weights.size());
  delta.biases.resize(current.biases.size());
  ModelParams<Scalar> result = params;
  for (std::size_t j = 0; j < current.weights.size(); ++j) {
    delta.weights[j] = current.weights[j] - params.weights[j];
    delta.biases[j] = current.biases[j] - params.biases[j];
    result.weights[j] = params.weights[j] + delta.weights[j];
    result.biases[j] = params.biases[j] + delta.biases[j];
  }
  return {std::move(result), std::move(delta)};
}

template <typename Scalar>
void add_in_place(ModelParams<Scalar>& params,
                  const GradientDelta<Scalar>& delta) {
  if (!same_shape(params, delta))
    throw ShapeError("add_in_place: delta not shape-congruent to params");
  for (std::size_t j = 0; j < params.weights.size(); ++j) {
    params.weights[j] += delta.weights[j];
    params.biases[j] += delta.biases[j];
  }
}

}  // namespace scbf
