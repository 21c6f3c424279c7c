#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <string>
#include <utility>
#include <vector>

#include "scbf/channel.hpp"
#include "scbf/common.hpp"
#include "scbf/data.hpp"
#include "scbf/metrics.hpp"
#include "scbf/nn.hpp"
#include "scbf/pruning.hpp"

namespace scbf {

enum class Method { kScbf, kScbfPrune, kFedAvg, kFedAvgPrune };
enum class SelectionMode { kPositive, kNegative };

inline bool method_prunes(Method m) {
  return m == Method::kScbfPrune || m == Method::kFedAvgPrune;
}

inline bool method_is_scbf(Method m) {
  return m == Method::kScbf || m == Method::kScbfPrune;
}

template <typename Scalar>
struct ServerState {
  ModelParams<Scalar> params;
  NetConfig net;
  std::int64_t global_loop = 0;
};

template <typename Scalar>
struct ClientState {
  Index client_id = 0;
  ModelParams<Scalar> params;
  MatrixX<Scalar> features;
  VectorX<Scalar> labels;
};

// One global loop's log line.
struct RoundRecord {
  std::int64_t loop = 0;
  std::vector<std::uint64_t> client_uploaded;
  std::vector<double> client_fraction;
  std::uint64_t uploaded_total = 0;
  std::uint64_t cumulative_uploaded = 0;
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  std::int64_t neurons_pruned_total = 0;
  PrunedIndices pruned_this_loop;  // audit trail, empty when nothing pruned
  double wall_clock_seconds = 0.0;
};

// Overwrite every client's parameters with an exact copy of the server's.
template <typename Scalar>
void broadcast(const ServerState<Scalar>& server,
               std::vector<ClientState<Scalar>>& clients) {
  for (auto& client : clients) {
    if (client.params.layer_count() != 0 &&
        !same_shape(client.params, server.params))
      throw SyncError("broadcast: client " + std::to_string(client.client_id) +
                      " shape differs from server (missed prune?)");
    client.params = server.params;
  }
}

// W <- W + sum_k delta_k, summed in ascending client order. The deltas are
// accumulated first and added to the server once, so a +d/-d pair cancels
// exactly.
template <typename Scalar>
void server_apply(ServerState<Scalar>& server,
                  const std::vector<GradientDelta<Scalar>>& deltas) {
  if (deltas.empty()) return;
  for (const auto& d : deltas) {
    if (!same_shape(server.params, d))
      throw SyncError("server_apply: delta not shape-congruent to server");
  }
  GradientDelta<Scalar> total = deltas.front();
  for (std::size_t k = 1; k < deltas.size(); ++k) {
    for (std::size_t j = 0; j < total.weights.size(); ++j) {
      total.weights[j] += deltas[k].weights[j];
      total.biases[j] += deltas[k].biases[j];
    }
  }
  add_in_place(server.params, total);
}

namespace detail {

template <typename Job>
auto run_per_client(std::size_t count, bool parallel, Job&& job)
    -> std::vector<decltype(job(std::size_t{}))> {
  using Out = decltype(job(std::size_t{}));
  std::vector<Out> results(count);
  if (parallel && count > 1) {
    std::vector<std::future<Out>> futures;
    futures.reserve(count);
    for (std::size_t k = 0; k < count; ++k)
      futures.push_back(std::async(std::launch::async, job, k));
    for (std::size_t k = 0; k < count; ++k) results[k] = futures[k].get();
  } else {
    for (std::size_t k = 0; k < count; ++k) results[k] = job(k);
  }
  return results;
}

}  // namespace detail

// One SCBF loop over already-broadcast clients: local training, channel
// selection at rate alpha, masking, and the additive server update. Clients
// keep their locally trained parameters until the next broadcast.
template <typename Scalar>
RoundRecord scbf_round(ServerState<Scalar>& server,
                       std::vector<ClientState<Scalar>>& clients,
                       const TrainHyper& hyper, double alpha,
                       SelectionMode mode, std::uint64_t master_seed,
                       bool parallel = false) {
  struct ClientOut {
    ModelParams<Scalar> trained;
    GradientDelta<Scalar> masked;
    std::uint64_t uploaded = 0;
    double fraction = 0.0;
  };
  const NetConfig net = server.net;
  const std::int64_t loop = server.global_loop;

  auto job = [&](std::size_t k) -> ClientOut {
    auto& client = clients[k];
    TrainHyper h = hyper;
    h.shuffle_seed =
        derive_seed(master_seed, static_cast<std::uint64_t>(client.client_id),
                    static_cast<std::uint64_t>(loop));
    auto [trained, delta] =
        local_round<Scalar>(client.params, client.features, client.labels, h);
    const auto norms = channel_norms(delta);
    const auto kept = select_top_channels(norms, alpha);
    const SelectionMask mask = mode == SelectionMode::kPositive
                                   ? mask_positive(kept, net)
                                   : mask_negative(complement(kept), net);
    const auto stats = mask_stats(mask);
    return ClientOut{std::move(trained), apply_mask(delta, mask),
                     stats.uploaded_params, stats.fraction};
  };

  auto outs = detail::run_per_client(clients.size(), parallel, job);

  RoundRecord record;
  record.loop = loop;
  std::vector<GradientDelta<Scalar>> deltas;
  deltas.reserve(outs.size());
  for (std::size_t k = 0; k < outs.size(); ++k) {
    clients[k].params = std::move(outs[k].trained);
    record.client_uploaded.push_back(outs[k].uploaded);
    record.client_fraction.push_back(outs[k].fraction);
    record.uploaded_total += outs[k].uploaded;
    deltas.push_back(std::move(outs[k].masked));
  }
  server_apply(server, deltas);
  return record;
}

// Federated Averaging loop: every client trains locally and the server takes
// the (optionally size-weighted) mean of the full client models. The mean is
// computed as base + sum(p_k - base)/K so a mean of identical models is the
// model itself, exactly.
template <typename Scalar>
RoundRecord fedavg_round(ServerState<Scalar>& server,
                         std::vector<ClientState<Scalar>>& clients,
                         const TrainHyper& hyper, std::uint64_t master_seed,
                         bool parallel = false, bool weighted = false) {
  if (clients.empty()) throw InputError("fedavg_round: no clients");
  const std::int64_t loop = server.global_loop;

  auto job = [&](std::size_t k) -> ModelParams<Scalar> {
    auto& client = clients[k];
    TrainHyper h = hyper;
    h.shuffle_seed =
        derive_seed(master_seed, static_cast<std::uint64_t>(client.client_id),
                    static_cast<std::uint64_t>(loop));
    return local_round<Scalar>(client.params, client.features, client.labels, h)
        .first;
  };
  auto trained = detail::run_per_client(clients.size(), parallel, job);

  RoundRecord record;
  record.loop = loop;
  const std::uint64_t full = param_count(trained[0]);
  for (std::size_t k = 0; k < clients.size(); ++k) {
    clients[k].params = std::move(trained[k]);
    record.client_uploaded.push_back(full);
    record.client_fraction.push_back(1.0);
    record.uploaded_total += full;
  }

  if (clients.size() == 1) {
    server.params = clients[0].params;
    return record;
  }

  double weight_sum = 0.0;
  std::vector<double> weight(clients.size(), 1.0);
  for (std::size_t k = 0; k < clients.size(); ++k) {
    if (weighted) weight[k] = static_cast<double>(clients[k].features.rows());
    weight_sum += weight[k];
  }

  const ModelParams<Scalar>& base = clients[0].params;
  ModelParams<Scalar> mean = base;
  for (std::size_t j = 0; j < base.weights.size(); ++j) {
    MatrixX<Scalar> acc_w = MatrixX<Scalar>::Zero(base.weights[j].rows(),
                                                  base.weights[j].cols());
    VectorX<Scalar> acc_b = VectorX<Scalar>::Zero(base.biases[j].size());
    for (std::size_t k = 0; k < clients.size(); ++k) {
      if (!same_shape(clients[k].params, base))
        throw SyncError("fedavg_round: client shapes diverged");
      const Scalar w = static_cast<Scalar>(weight[k]);
      acc_w += w * (clients[k].params.weights[j] - base.weights[j]);
      acc_b += w * (clients[k].params.biases[j] - base.biases[j]);
    }
    mean.weights[j] = base.weights[j] + acc_w / static_cast<Scalar>(weight_sum);
    mean.biases[j] = base.biases[j] + acc_b / static_cast<Scalar>(weight_sum);
  }
  server.params = std::move(mean);
  return record;
}

struct SynthSpec {
  Index rows = 2000;
  Index features = 50;
  double sparsity = 0.2;
};

struct DataSpec {
  enum class Kind { kSynth, kCsv };
  Kind kind = Kind::kSynth;
  SynthSpec synth;
  std::string csv_path;
  std::string label_column = "label";
};

// Everything one experiment needs: the method knobs (update rate, pruning
// rates, loop and client counts) plus the plumbing (net, hyper, data source,
// seed).
struct ExperimentConfig {
  Method method = Method::kScbf;
  double alpha = 0.1;
  SelectionMode selection_mode = SelectionMode::kPositive;
  double theta = 0.0;        // pruning methods only
  double theta_total = 0.0;  // pruning methods only
  std::int64_t global_loops = 20;
  Index clients = 5;
  NetConfig net;
  TrainHyper hyper;
  DataSpec data;
  std::uint64_t master_seed = 1;
  bool parallel_clients = false;
  bool weighted_average = false;
  bool stratified_split = false;

  void validate() const {
    if (!(alpha > 0.0) || alpha > 1.0)
      throw ConfigError("alpha must be in (0, 1]");
    if (global_loops < 0) throw ConfigError("global_loops must be >= 0");
    if (clients < 1) throw ConfigError("clients must be >= 1");
    if (method_prunes(method)) {
      if (!(theta > 0.0) || !(theta < 1.0))
        throw ConfigError("theta must be in (0, 1) for pruning methods");
      if (!(theta_total > 0.0) || !(theta_total < 1.0))
        throw ConfigError("theta_total must be in (0, 1) for pruning methods");
    }
    net.validate();
    hyper.validate();
    if (data.kind == DataSpec::Kind::kSynth) {
      if (data.synth.rows < 1 || data.synth.features < 1)
        throw ConfigError("synth rows/features must be >= 1");
      if (!(data.synth.sparsity > 0.0) || !(data.synth.sparsity < 1.0))
        throw ConfigError("synth sparsity must be in (0, 1)");
    } else if (data.csv_path.empty()) {
      throw ConfigError("csv data source needs a path");
    }
  }
};

// Seed stream tags for the different randomness consumers.
inline constexpr std::uint64_t kSeedSynth = 0xA1;
inline constexpr std::uint64_t kSeedSplit = 0xB2;
inline constexpr std::uint64_t kSeedInit = 0xC3;

template <typename Scalar = double>
Cohort<Scalar> load_experiment_cohort(const ExperimentConfig& cfg) {
  if (cfg.data.kind == DataSpec::Kind::kSynth) {
    return synth_cohort<Scalar>(cfg.data.synth.rows, cfg.data.synth.features,
                                cfg.data.synth.sparsity,
                                derive_seed(cfg.master_seed, kSeedSynth));
  }
  return load_csv<Scalar>(cfg.data.csv_path, cfg.data.label_column);
}

// Full experiment: for every global loop, broadcast, run the method's round,
// prune while the cumulative fraction is below theta_total (pruning methods
// only), then evaluate on the held-out test set and log a RoundRecord.
// Deterministic for a fixed config/seed apart from the wall-clock field.
// `on_round` is invoked as each record is finished so partial output
// survives a failed run.
template <typename Scalar = double>
std::vector<RoundRecord> run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(const RoundRecord&)>& on_round = {}) {
  cfg.validate();

  const Cohort<Scalar> cohort = load_experiment_cohort<Scalar>(cfg);
  if (cohort.feature_dim() != cfg.net.input_dim)
    throw ConfigError("net input_dim " + std::to_string(cfg.net.input_dim) +
                      " does not match data feature count " +
                      std::to_string(cohort.feature_dim()));

  const auto part = split_partition(cohort, cfg.clients,
                                    derive_seed(cfg.master_seed, kSeedSplit),
                                    cfg.stratified_split);
  for (Index k = 0; k < cfg.clients; ++k) {
    if (part.train_clients[static_cast<std::size_t>(k)].rows() == 0)
      throw InputError("client " + std::to_string(k) +
                       " received an empty training partition");
  }

  ServerState<Scalar> server{
      init_params<Scalar>(cfg.net, derive_seed(cfg.master_seed, kSeedInit)),
      cfg.net, 0};
  std::vector<ClientState<Scalar>> clients;
  clients.reserve(static_cast<std::size_t>(cfg.clients));
  for (Index k = 0; k < cfg.clients; ++k) {
    const auto& c = part.train_clients[static_cast<std::size_t>(k)];
    clients.push_back(ClientState<Scalar>{k, {}, c.features, c.labels});
  }

  PruneState prune_state{hidden_neuron_count(cfg.net), 0, cfg.theta,
                         cfg.theta_total};

  std::vector<RoundRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.global_loops));
  std::uint64_t cumulative = 0;

  for (std::int64_t loop = 0; loop < cfg.global_loops; ++loop) {
    const auto t0 = std::chrono::steady_clock::now();
    server.global_loop = loop;
    broadcast(server, clients);

    RoundRecord record =
        method_is_scbf(cfg.method)
            ? scbf_round(server, clients, cfg.hyper, cfg.alpha,
                         cfg.selection_mode, cfg.master_seed,
                         cfg.parallel_clients)
            : fedavg_round(server, clients, cfg.hyper, cfg.master_seed,
                           cfg.parallel_clients, cfg.weighted_average);

    if (method_prunes(cfg.method) &&
        prune_state.pruned_fraction() < cfg.theta_total) {
      const auto scores = apoz_scores(server.params, part.validation.features);
      auto pruned = prune_step(server.params, server.net, scores, prune_state);
      const NetConfig pre_prune = server.net;
      server.params = std::move(pruned.params);
      server.net = std::move(pruned.net);
      prune_state = pruned.state;
      record.pruned_this_loop = pruned.pruned;
      for (auto& client : clients)
        client.params = mirror_prune(client.params, pre_prune, pruned.pruned);
    }

    const auto acts = forward(server.params, part.test.features);
    const VectorX<Scalar> scores = acts.back().col(0);
    record.auc_roc = auc_roc(scores, part.test.labels);
    record.auc_pr = auc_pr(scores, part.test.labels);

    cumulative += record.uploaded_total;
    record.cumulative_uploaded = cumulative;
    record.neurons_pruned_total = prune_state.pruned_count;
    record.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (on_round) on_round(record);
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace scbf
