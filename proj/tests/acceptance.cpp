// Acceptance suite: one check per shipped guarantee, each printed as a
// single [PASS]/[FAIL] line. Exits nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "scbf/channel.hpp"
#include "scbf/config_io.hpp"
#include "scbf/federation.hpp"
#include "scbf/metrics.hpp"
#include "scbf/nn.hpp"
#include "scbf/pruning.hpp"

using namespace scbf;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

MatrixX<double> binary_inputs(Index rows, Index cols, Rng& rng) {
  MatrixX<double> x(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) x(r, c) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return x;
}

VectorX<double> binary_labels(Index rows, Rng& rng) {
  VectorX<double> y(rows);
  for (Index r = 0; r < rows; ++r) y[r] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return y;
}

// ---------------------------------------------------------------------------
// 1. channel_norms equals a brute-force path enumerator on >=100 random nets
//    with channel product <= 1000, within 1e-12 relative, in under 10 s.
std::string check_channel_norm_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(0xC0FFEE);
  int nets = 0;
  std::size_t channels_checked = 0;
  while (nets < 120) {
    const auto cfg = oracles::random_net_config(rng, 1000, 5, 10);
    const auto delta = oracles::random_delta(cfg, rng);
    const auto table = channel_norms(delta);
    const auto expected = oracles::enumerate_channel_norms(delta);
    require(expected.size() == table.total_channels(),
            "channel count disagrees with the enumerator");
    for (std::size_t f = 0; f < expected.size(); ++f) {
      const double got = table.values[static_cast<Index>(f)];
      const double want = expected[f].second;
      const double err =
          std::abs(got - want) / std::max({std::abs(want), std::abs(got), 1e-300});
      require(err <= 1e-12, "norm mismatch at channel " + std::to_string(f));
      require(flatten_channel(table.layer_sizes, expected[f].first) == f,
              "lexicographic order broken");
    }
    channels_checked += expected.size();
    ++nets;
  }
  const double elapsed = seconds_since(t0);
  require(elapsed < 10.0, "oracle sweep took " + std::to_string(elapsed) + " s");
  std::ostringstream os;
  os << nets << " nets, " << channels_checked << " channels, "
     << elapsed << " s";
  return os.str();
}

// ---------------------------------------------------------------------------
// 2. |select_top_channels(., alpha)| == ceil(alpha * C), exactly.
std::string check_selection_count() {
  Rng rng(0xBEEF);
  int tables = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto cfg = oracles::random_net_config(rng, 1000, 5, 10);
    const auto table = channel_norms(oracles::random_delta(cfg, rng));
    const double c = static_cast<double>(table.total_channels());
    for (double alpha : {0.01, 0.1, 0.5, 1.0}) {
      const auto sel = select_top_channels(table, alpha);
      const auto expected =
          static_cast<std::size_t>(std::ceil(alpha * c));
      require(sel.size() == expected,
              "alpha=" + std::to_string(alpha) + ": got " +
                  std::to_string(sel.size()) + ", want " +
                  std::to_string(expected));
    }
    ++tables;
  }
  return std::to_string(tables) + " tables x 4 alphas";
}

// ---------------------------------------------------------------------------
// 3. Mask algebra: negative subset positive on 1000 random partitions;
//    alpha=1 gives an all-true positive mask; a single kept channel gives
//    exactly that channel's path set.
std::string check_mask_algebra() {
  Rng rng(0xABBA);
  int partitions = 0;
  while (partitions < 1000) {
    const auto cfg = oracles::random_net_config(rng, 64, 4, 4);
    const std::size_t total = channel_count(cfg.layer_sizes);
    ChannelSelection kept{cfg.layer_sizes, {}};
    for (std::size_t f = 0; f < total; ++f)
      if (rng.bernoulli(0.5)) kept.flat.push_back(f);
    const auto pos = mask_positive(kept, cfg);
    const auto neg = mask_negative(complement(kept), cfg);
    for (std::size_t j = 0; j < pos.weights.size(); ++j) {
      require((!neg.weights[j] || pos.weights[j]).all(),
              "negative mask not a subset (weights)");
      require((!neg.biases[j] || pos.biases[j]).all(),
              "negative mask not a subset (biases)");
    }
    ++partitions;
  }

  NetConfig cfg{5, {4, 3, 1}};
  Rng rng2(0xF00D);
  const auto delta = oracles::random_delta(cfg, rng2);
  const auto table = channel_norms(delta);
  const auto full = mask_positive(select_top_channels(table, 1.0), cfg);
  for (const auto& w : full.weights)
    require(w.all(), "alpha=1 positive mask not all-true");
  for (const auto& b : full.biases)
    require(b.all(), "alpha=1 positive mask not all-true");

  // smallest alpha keeps exactly one channel: its path and nothing else
  const auto one = select_top_channels(table, 1e-9);
  require(one.size() == 1, "expected a single kept channel");
  const auto idx = unflatten_channel(cfg.layer_sizes, one.flat[0]);
  const auto mask = mask_positive(one, cfg);
  for (Index c = 0; c < mask.weights[0].cols(); ++c)
    for (Index r = 0; r < mask.weights[0].rows(); ++r)
      require(mask.weights[0](r, c) == (r == idx[0]),
              "path set wrong in W_1");
  for (std::size_t j = 1; j < mask.weights.size(); ++j)
    for (Index r = 0; r < mask.weights[j].rows(); ++r)
      for (Index c = 0; c < mask.weights[j].cols(); ++c)
        require(mask.weights[j](r, c) == (r == idx[j] && c == idx[j - 1]),
                "path set wrong in W_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < mask.biases.size(); ++j)
    for (Index r = 0; r < mask.biases[j].size(); ++r)
      require(mask.biases[j][r] == (r == idx[j]), "path set wrong in biases");
  return "1000 partitions + full/single-channel masks";
}

// ---------------------------------------------------------------------------
// 4. alpha=1, K=1: the SCBF-positive round lands bit-identically on
//    start + full delta, and a K=1 FedAvg round equals the client's params.
std::string check_fedavg_equivalence() {
  NetConfig cfg{10, {6, 3, 1}};
  ServerState<double> server{init_params(cfg, 41), cfg, 0};
  Rng rng(42);
  std::vector<ClientState<double>> clients;
  clients.push_back(
      ClientState<double>{0, {}, binary_inputs(40, 10, rng), binary_labels(40, rng)});
  broadcast(server, clients);
  const auto start = server.params;

  TrainHyper hyper;
  hyper.batch_size = 10;
  const std::uint64_t master = 4242;
  scbf_round(server, clients, hyper, 1.0, SelectionMode::kPositive, master);

  TrainHyper h = hyper;
  h.shuffle_seed = derive_seed(master, 0, 0);
  auto [trained, delta] =
      local_round(start, clients[0].features, clients[0].labels, h);
  auto expected = start;
  add_in_place(expected, delta);
  for (std::size_t j = 0; j < expected.weights.size(); ++j) {
    require((server.params.weights[j].array() == expected.weights[j].array())
                .all() &&
                (server.params.biases[j].array() == expected.biases[j].array())
                    .all(),
            "SCBF alpha=1 server differs from start + delta at layer " +
                std::to_string(j));
  }

  ServerState<double> fa{start, cfg, 0};
  broadcast(fa, clients);
  fedavg_round(fa, clients, hyper, master);
  for (std::size_t j = 0; j < fa.params.weights.size(); ++j) {
    require((fa.params.weights[j].array() ==
             clients[0].params.weights[j].array())
                .all() &&
                (fa.params.biases[j].array() ==
                 clients[0].params.biases[j].array())
                    .all(),
            "FedAvg K=1 server differs from the client");
  }
  return "bit-identical on both routes";
}

// ---------------------------------------------------------------------------
// 5. Backprop vs central finite differences on 20 random small nets:
//    relative error < 1e-4 on >= 99% of parameters.
std::string check_gradients() {
  Rng rng(0x5EED);
  double worst = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = oracles::random_net_config(rng, 48, 3, 4);
    auto params = init_params(cfg, 900 + static_cast<std::uint64_t>(trial));
    Rng noise(derive_seed(1000, static_cast<std::uint64_t>(trial)));
    for (auto& b : params.biases)
      for (Index i = 0; i < b.size(); ++i) b[i] = noise.uniform(-0.3, 0.3);
    const auto x = binary_inputs(8, cfg.input_dim, rng);
    const auto y = binary_labels(8, rng);
    const auto analytic = backward_batch(params, x, y);
    const auto numeric = oracles::finite_difference_grad(params, x, y);
    const double agree = oracles::grad_agreement(analytic, numeric, 1e-4);
    worst = std::min(worst, agree);
    require(agree >= 0.99, "net " + std::to_string(trial) + " agreement " +
                               std::to_string(agree));
  }
  return "20 nets, worst agreement " + std::to_string(worst);
}

// ---------------------------------------------------------------------------
// 6. auc_roc equals the pairwise oracle on 1000 random instances (1e-12);
//    auc_pr equals the threshold-sweep oracle on instances of <= 20 points.
std::string check_metric_oracles() {
  Rng rng(0xACC);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.bounded(999));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<double> labels(static_cast<std::size_t>(n));
    bool pos = false;
    bool neg = false;
    const bool with_ties = rng.bernoulli(0.5);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      scores[i] = with_ties ? std::round(rng.uniform(0.0, 1.0) * 16.0) / 16.0
                            : rng.uniform(0.0, 1.0);
      labels[i] = rng.bernoulli(0.35) ? 1.0 : 0.0;
      pos = pos || labels[i] == 1.0;
      neg = neg || labels[i] == 0.0;
    }
    if (!pos) labels[0] = 1.0;
    if (!neg) labels[labels.size() - 1] = 0.0;
    VectorX<double> s = Eigen::Map<VectorX<double>>(scores.data(), n);
    VectorX<double> y = Eigen::Map<VectorX<double>>(labels.data(), n);
    const double fast = auc_roc(s, y);
    const double brute = oracles::pairwise_auc_roc(scores, labels);
    require(std::abs(fast - brute) <= 1e-12,
            "auc_roc differs from the pairwise oracle by " +
                std::to_string(std::abs(fast - brute)));
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.bounded(19));
    std::vector<double> scores(static_cast<std::size_t>(n));
    std::vector<double> labels(static_cast<std::size_t>(n));
    bool pos = false;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      scores[i] = std::round(rng.uniform(0.0, 1.0) * 8.0) / 8.0;
      labels[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      pos = pos || labels[i] == 1.0;
    }
    if (!pos) labels[0] = 1.0;
    VectorX<double> s = Eigen::Map<VectorX<double>>(scores.data(), n);
    VectorX<double> y = Eigen::Map<VectorX<double>>(labels.data(), n);
    const double fast = auc_pr(s, y);
    const double brute = oracles::sweep_auc_pr(scores, labels);
    require(std::abs(fast - brute) <= 1e-12,
            "auc_pr differs from the sweep oracle by " +
                std::to_string(std::abs(fast - brute)));
  }
  return "1000 roc + 1000 pr instances";
}

// ---------------------------------------------------------------------------
// 7. prune_step selection equals the full-sort oracle on 200 random nets of
//    <= 20 hidden neurons; pruning APoZ==1.0 neurons moves validation
//    outputs by < 1e-9.
std::string check_prune_oracle() {
  Rng rng(0x9821);
  for (int trial = 0; trial < 200; ++trial) {
    const Index hidden_layers = 1 + static_cast<Index>(rng.bounded(3));
    NetConfig cfg;
    cfg.input_dim = 2 + static_cast<Index>(rng.bounded(4));
    Index hidden_total = 0;
    for (Index j = 0; j < hidden_layers; ++j) {
      const Index m = 2 + static_cast<Index>(rng.bounded(5));
      cfg.layer_sizes.push_back(m);
      hidden_total += m;
    }
    cfg.layer_sizes.push_back(1);
    const auto params = init_params(cfg, 7000 + static_cast<std::uint64_t>(trial));

    ApozScores<double> scores;
    std::vector<std::vector<double>> raw;
    for (Index j = 0; j < hidden_layers; ++j) {
      VectorX<double> s(cfg.layer_sizes[static_cast<std::size_t>(j)]);
      std::vector<double> v;
      for (Index i = 0; i < s.size(); ++i) {
        s[i] = std::round(rng.uniform(0.0, 1.0) * 8.0) / 8.0;
        v.push_back(s[i]);
      }
      scores.hidden.push_back(s);
      raw.push_back(v);
    }
    const double theta = rng.uniform(0.05, 0.6);
    PruneState state{hidden_total, 0, theta, 0.95};
    const Index budget =
        std::min(static_cast<Index>(std::ceil(theta * hidden_total)),
                 state.cumulative_cap());
    const auto result = prune_step(params, cfg, scores, state);
    std::vector<Index> hidden_sizes(cfg.layer_sizes.begin(),
                                    cfg.layer_sizes.end() - 1);
    const auto expected = oracles::full_sort_prune(raw, hidden_sizes, budget);
    std::vector<std::pair<std::size_t, Index>> got;
    for (std::size_t j = 0; j < result.pruned.size(); ++j)
      for (Index i : result.pruned[j]) got.emplace_back(j, i);
    std::sort(got.begin(), got.end());
    require(got == expected,
            "prune selection differs from the oracle on net " +
                std::to_string(trial));
  }

  // dead-neuron forward consistency
  Rng rng2(0x7777);
  for (int trial = 0; trial < 20; ++trial) {
    NetConfig cfg{4, {6, 1}};
    auto params = init_params(cfg, 8100 + static_cast<std::uint64_t>(trial));
    // make neurons 1 and 4 unfireable on non-negative inputs
    for (Index dead : {Index(1), Index(4)}) {
      params.weights[0].row(dead) = -params.weights[0].row(dead).cwiseAbs();
      params.biases[0][dead] = -0.05;
    }
    params.biases[0][0] = 0.4;
    params.biases[0][2] = 0.4;
    params.biases[0][3] = 0.4;
    params.biases[0][5] = 0.4;
    const auto x = binary_inputs(32, 4, rng2);
    const auto scores = apoz_scores(params, x);
    require(scores.hidden[0][1] == 1.0 && scores.hidden[0][4] == 1.0,
            "constructed neurons are not dead");
    PruneState state{6, 0, 2.0 / 6.0, 0.9};
    const auto result = prune_step(params, cfg, scores, state);
    require(result.pruned[0] == std::vector<Index>{1, 4},
            "prune did not pick the dead neurons");
    const auto before = forward(params, x).back();
    const auto after = forward(result.params, x).back();
    require((before - after).cwiseAbs().maxCoeff() < 1e-9,
            "outputs moved after removing dead neurons");
  }
  return "200 oracle nets + 20 dead-neuron nets";
}

// ---------------------------------------------------------------------------
// 8. Pruning schedule with theta=0.1, theta_total=0.47: the final pruned
//    fraction lands in [0.40, 0.50] and never exceeds ceil(0.47*orig)/orig.
std::string check_prune_schedule() {
  ExperimentConfig cfg;
  cfg.method = Method::kScbfPrune;
  cfg.alpha = 0.1;
  cfg.theta = 0.1;
  cfg.theta_total = 0.47;
  cfg.global_loops = 10;
  cfg.clients = 5;
  cfg.net = NetConfig{20, {32, 16, 1}};
  cfg.hyper.batch_size = 32;
  cfg.data.synth = {600, 20, 0.3};
  cfg.master_seed = 808;

  const auto records = run_experiment(cfg);
  const double original = static_cast<double>(hidden_neuron_count(cfg.net));
  const double cap = std::ceil(0.47 * original);
  for (const auto& r : records) {
    require(static_cast<double>(r.neurons_pruned_total) <= cap,
            "loop " + std::to_string(r.loop) + " exceeded the cumulative cap");
  }
  const double final_fraction =
      static_cast<double>(records.back().neurons_pruned_total) / original;
  require(final_fraction >= 0.40 && final_fraction <= 0.50,
          "final pruned fraction " + std::to_string(final_fraction));
  std::ostringstream os;
  os << "final fraction " << final_fraction << " (cap "
     << static_cast<std::int64_t>(cap) << "/" << original << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// 9. Desk-scale paired trend on the 2000x50 synthetic cohort, K=5, 20 loops,
//    net [32,16,1], alpha=0.1: (a) SCBF final AUC-ROC within 0.02 of FedAvg,
//    (b) SCBF uploads < 60% of FedAvg's values, (c) scbf_prune loops run
//    faster than scbf once pruning is done. Whole check under 2 minutes.
std::string check_desk_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig base;
  base.alpha = 0.1;
  base.global_loops = 20;
  base.clients = 5;
  base.net = NetConfig{50, {32, 16, 1}};
  base.data.synth = {2000, 50, 0.2};
  // Small-step local SGD keeps the additive server update (a literal sum
  // over K clients, so ~5x a FedAvg step) on its stable side at this scale;
  // the run is seeded and bit-reproducible.
  base.hyper.local_epochs = 1;
  base.hyper.batch_size = 4;
  base.hyper.learning_rate = 0.015;
  base.master_seed = 9;

  auto scbf_cfg = base;
  scbf_cfg.method = Method::kScbf;
  auto fedavg_cfg = base;
  fedavg_cfg.method = Method::kFedAvg;
  auto prune_cfg = base;
  prune_cfg.method = Method::kScbfPrune;
  prune_cfg.theta = 0.1;
  prune_cfg.theta_total = 0.47;

  const auto scbf_records = run_experiment(scbf_cfg);
  const auto fedavg_records = run_experiment(fedavg_cfg);
  const auto prune_records = run_experiment(prune_cfg);

  const double auc_gap = std::abs(scbf_records.back().auc_roc -
                                  fedavg_records.back().auc_roc);
  require(auc_gap <= 0.02,
          "final AUC-ROC gap " + std::to_string(auc_gap) + " exceeds 0.02");

  const double upload_ratio =
      static_cast<double>(scbf_records.back().cumulative_uploaded) /
      static_cast<double>(fedavg_records.back().cumulative_uploaded);
  require(upload_ratio < 0.60,
          "upload ratio " + std::to_string(upload_ratio) + " not below 0.60");

  // first loop at which pruning has finished
  const std::int64_t final_pruned = prune_records.back().neurons_pruned_total;
  std::size_t done_at = prune_records.size();
  for (std::size_t i = 0; i < prune_records.size(); ++i) {
    if (prune_records[i].neurons_pruned_total == final_pruned) {
      done_at = i + 1;  // time of loop i includes the prune step itself
      break;
    }
  }
  require(done_at < prune_records.size(), "pruning never completed");
  auto median_tail = [&](const std::vector<RoundRecord>& records) {
    std::vector<double> secs;
    for (std::size_t i = done_at; i < records.size(); ++i)
      secs.push_back(records[i].wall_clock_seconds);
    std::sort(secs.begin(), secs.end());
    return secs[secs.size() / 2];
  };
  const double pruned_time = median_tail(prune_records);
  const double full_time = median_tail(scbf_records);
  require(pruned_time < full_time,
          "post-prune loop time " + std::to_string(pruned_time) +
              " not below " + std::to_string(full_time));

  const double elapsed = seconds_since(t0);
  require(elapsed < 120.0, "desk trend took " + std::to_string(elapsed) + " s");
  std::ostringstream os;
  os << "auc gap " << auc_gap << ", upload ratio " << upload_ratio
     << ", loop time " << pruned_time << " vs " << full_time << ", "
     << elapsed << " s";
  return os.str();
}

// ---------------------------------------------------------------------------
// 10. Reruns with the same config produce bit-identical rounds.csv text
//     (seconds column excluded), sequentially and with parallel clients.
std::string check_determinism() {
  ExperimentConfig cfg;
  cfg.method = Method::kScbfPrune;
  cfg.alpha = 0.1;
  cfg.theta = 0.2;
  cfg.theta_total = 0.4;
  cfg.global_loops = 6;
  cfg.clients = 4;
  cfg.net = NetConfig{16, {10, 4, 1}};
  cfg.data.synth = {400, 16, 0.3};
  cfg.master_seed = 55;

  auto csv_without_seconds = [](const std::vector<RoundRecord>& records) {
    std::string text = rounds_csv_header() + "\n";
    for (const auto& r : records) {
      std::string row = rounds_csv_row(r);
      text += row.substr(0, row.rfind(',')) + "\n";
    }
    return text;
  };

  const auto a = csv_without_seconds(run_experiment(cfg));
  const auto b = csv_without_seconds(run_experiment(cfg));
  require(a == b, "sequential reruns differ");

  auto par = cfg;
  par.parallel_clients = true;
  const auto c = csv_without_seconds(run_experiment(par));
  const auto d = csv_without_seconds(run_experiment(par));
  require(c == d, "parallel reruns differ");
  require(a == c, "parallel run differs from sequential run");
  return "sequential == parallel == rerun";
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<std::string()> run;
  };
  const std::vector<Criterion> criteria{
      {"channel-norm oracle", check_channel_norm_oracle},
      {"selection count", check_selection_count},
      {"mask algebra", check_mask_algebra},
      {"fedavg equivalence at alpha=1, K=1", check_fedavg_equivalence},
      {"gradient finite-difference check", check_gradients},
      {"metric oracles", check_metric_oracles},
      {"apoz pruning oracle", check_prune_oracle},
      {"pruning schedule bounds", check_prune_schedule},
      {"desk-scale paired trends", check_desk_trend},
      {"determinism incl. parallel clients", check_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      const std::string detail = criteria[i].run();
      std::cout << "[PASS] criterion " << i + 1 << ": " << criteria[i].name
                << " (" << detail << ")\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] criterion " << i + 1 << ": " << criteria[i].name
                << " - " << e.what() << "\n";
    }
    std::cout.flush();
  }
  if (failures == 0) {
    std::cout << "all " << criteria.size() << " acceptance criteria passed\n";
  } else {
    std::cout << failures << " of " << criteria.size()
              << " acceptance criteria FAILED\n";
  }
  return failures;
}
