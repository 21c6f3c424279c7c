#include "scbf/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace scbf {

using nlohmann::json;

bool operator==(const DataSpec& a, const DataSpec& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == DataSpec::Kind::kSynth) {
    return a.synth.rows == b.synth.rows &&
           a.synth.features == b.synth.features &&
           a.synth.sparsity == b.synth.sparsity;
  }
  return a.csv_path == b.csv_path && a.label_column == b.label_column;
}

static bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.method == b.method && a.alpha == b.alpha &&
         a.selection_mode == b.selection_mode && a.theta == b.theta &&
         a.theta_total == b.theta_total && a.global_loops == b.global_loops &&
         a.clients == b.clients && a.net == b.net && a.hyper == b.hyper &&
         a.data == b.data && a.master_seed == b.master_seed &&
         a.parallel_clients == b.parallel_clients &&
         a.weighted_average == b.weighted_average &&
         a.stratified_split == b.stratified_split;
}

bool JobConfig::operator==(const JobConfig& other) const {
  return methods == other.methods && config_equal(base, other.base) &&
         out_dir == other.out_dir;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kScbf:
      return "scbf";
    case Method::kScbfPrune:
      return "scbf_prune";
    case Method::kFedAvg:
      return "fedavg";
    case Method::kFedAvgPrune:
      return "fedavg_prune";
  }
  throw ConfigError("unknown method enum value");
}

Method method_from_name(const std::string& name) {
  if (name == "scbf") return Method::kScbf;
  if (name == "scbf_prune") return Method::kScbfPrune;
  if (name == "fedavg") return Method::kFedAvg;
  if (name == "fedavg_prune") return Method::kFedAvgPrune;
  throw ConfigError("methods: unknown method '" + name +
                    "' (expected scbf, scbf_prune, fedavg, fedavg_prune)");
}

std::string selection_mode_name(SelectionMode m) {
  return m == SelectionMode::kPositive ? "positive" : "negative";
}

SelectionMode selection_mode_from_name(const std::string& name) {
  if (name == "positive") return SelectionMode::kPositive;
  if (name == "negative") return SelectionMode::kNegative;
  throw ConfigError("selection_mode: expected 'positive' or 'negative', got '" +
                    name + "'");
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(key) + ": wrong type");
  }
}

void reject_unknown_keys(const json& j, const char* where,
                         std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok)
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

NetConfig parse_net(const json& j, const DataSpec& data) {
  NetConfig net;
  net.layer_sizes = {32, 16, 1};
  if (j.contains("net")) {
    const json& n = j.at("net");
    reject_unknown_keys(n, "net",
                        {"input_dim", "layer_sizes", "hidden_activation",
                         "output_activation", "loss"});
    if (n.contains("layer_sizes"))
      net.layer_sizes = n.at("layer_sizes").get<std::vector<Index>>();
    if (n.contains("input_dim")) net.input_dim = n.at("input_dim").get<Index>();
    const auto hidden = get_or<std::string>(n, "hidden_activation", "relu");
    const auto output = get_or<std::string>(n, "output_activation", "sigmoid");
    const auto loss = get_or<std::string>(n, "loss", "binary_cross_entropy");
    if (hidden != "relu")
      throw ConfigError("net.hidden_activation: only 'relu' is supported");
    if (output != "sigmoid")
      throw ConfigError("net.output_activation: only 'sigmoid' is supported");
    if (loss != "binary_cross_entropy")
      throw ConfigError("net.loss: only 'binary_cross_entropy' is supported");
  }
  if (net.input_dim == 0) {
    if (data.kind == DataSpec::Kind::kSynth) {
      net.input_dim = data.synth.features;
    } else {
      throw ConfigError("net.input_dim is required with a csv data source");
    }
  }
  return net;
}

}  // namespace

JobConfig parse_job_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown_keys(
      j, "config",
      {"methods", "method", "alpha", "selection_mode", "theta", "theta_total",
       "global_loops", "clients", "master_seed", "parallel_clients",
       "weighted_average", "stratified_split", "net", "hyper", "data",
       "out_dir"});

  JobConfig job;
  if (j.contains("methods")) {
    for (const auto& m : j.at("methods"))
      job.methods.push_back(method_from_name(m.get<std::string>()));
  } else if (j.contains("method")) {
    job.methods.push_back(method_from_name(j.at("method").get<std::string>()));
  } else {
    throw ConfigError("config: 'methods' (or 'method') is required");
  }
  if (job.methods.empty()) throw ConfigError("methods: list is empty");

  ExperimentConfig& cfg = job.base;
  cfg.method = job.methods.front();
  cfg.alpha = get_or<double>(j, "alpha", 0.1);
  cfg.selection_mode = selection_mode_from_name(
      get_or<std::string>(j, "selection_mode", "positive"));
  cfg.global_loops = get_or<std::int64_t>(j, "global_loops", 20);
  cfg.clients = get_or<Index>(j, "clients", 5);
  cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", 1);
  cfg.parallel_clients = get_or<bool>(j, "parallel_clients", false);
  cfg.weighted_average = get_or<bool>(j, "weighted_average", false);
  cfg.stratified_split = get_or<bool>(j, "stratified_split", false);

  bool any_prunes = false;
  for (Method m : job.methods) any_prunes = any_prunes || method_prunes(m);
  const bool has_theta = j.contains("theta") || j.contains("theta_total");
  if (any_prunes && !(j.contains("theta") && j.contains("theta_total")))
    throw ConfigError("theta and theta_total are required with pruning methods");
  if (!any_prunes && has_theta)
    throw ConfigError("theta/theta_total given but no method prunes");
  cfg.theta = get_or<double>(j, "theta", 0.0);
  cfg.theta_total = get_or<double>(j, "theta_total", 0.0);

  if (j.contains("hyper")) {
    const json& h = j.at("hyper");
    reject_unknown_keys(h, "hyper",
                        {"local_epochs", "batch_size", "learning_rate"});
    cfg.hyper.local_epochs = get_or<std::int64_t>(h, "local_epochs", 1);
    cfg.hyper.batch_size = get_or<Index>(h, "batch_size", 32);
    cfg.hyper.learning_rate = get_or<double>(h, "learning_rate", 0.1);
  }

  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown_keys(
        d, "data", {"source", "rows", "features", "sparsity", "path",
                    "label_column"});
    const auto source = get_or<std::string>(d, "source", "synth");
    if (source == "synth") {
      cfg.data.kind = DataSpec::Kind::kSynth;
      cfg.data.synth.rows = get_or<Index>(d, "rows", 2000);
      cfg.data.synth.features = get_or<Index>(d, "features", 50);
      cfg.data.synth.sparsity = get_or<double>(d, "sparsity", 0.2);
    } else if (source == "csv") {
      cfg.data.kind = DataSpec::Kind::kCsv;
      if (!d.contains("path")) throw ConfigError("data.path required for csv");
      cfg.data.csv_path = d.at("path").get<std::string>();
      cfg.data.label_column = get_or<std::string>(d, "label_column", "label");
    } else {
      throw ConfigError("data.source: expected 'synth' or 'csv', got '" +
                        source + "'");
    }
  }

  cfg.net = parse_net(j, cfg.data);
  job.out_dir = get_or<std::string>(j, "out_dir", "out");

  // Validate the strictest method now so errors surface before any run.
  for (Method m : job.methods) {
    ExperimentConfig check = cfg;
    check.method = m;
    check.validate();
  }
  return job;
}

JobConfig parse_job_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_job_text(ss.str());
}

std::string serialize_job(const JobConfig& job) {
  json j;
  json methods = json::array();
  for (Method m : job.methods) methods.push_back(method_name(m));
  j["methods"] = methods;
  const ExperimentConfig& cfg = job.base;
  j["alpha"] = cfg.alpha;
  j["selection_mode"] = selection_mode_name(cfg.selection_mode);
  bool any_prunes = false;
  for (Method m : job.methods) any_prunes = any_prunes || method_prunes(m);
  if (any_prunes) {
    j["theta"] = cfg.theta;
    j["theta_total"] = cfg.theta_total;
  }
  j["global_loops"] = cfg.global_loops;
  j["clients"] = cfg.clients;
  j["master_seed"] = cfg.master_seed;
  j["parallel_clients"] = cfg.parallel_clients;
  j["weighted_average"] = cfg.weighted_average;
  j["stratified_split"] = cfg.stratified_split;
  j["net"] = {{"input_dim", cfg.net.input_dim},
              {"layer_sizes", cfg.net.layer_sizes},
              {"hidden_activation", "relu"},
              {"output_activation", "sigmoid"},
              {"loss", "binary_cross_entropy"}};
  j["hyper"] = {{"local_epochs", cfg.hyper.local_epochs},
                {"batch_size", cfg.hyper.batch_size},
                {"learning_rate", cfg.hyper.learning_rate}};
  if (cfg.data.kind == DataSpec::Kind::kSynth) {
    j["data"] = {{"source", "synth"},
                 {"rows", cfg.data.synth.rows},
                 {"features", cfg.data.synth.features},
                 {"sparsity", cfg.data.synth.sparsity}};
  } else {
    j["data"] = {{"source", "csv"},
                 {"path", cfg.data.csv_path},
                 {"label_column", cfg.data.label_column}};
  }
  j["out_dir"] = job.out_dir;
  return j.dump(2) + "\n";
}

std::vector<ExperimentConfig> resolve_methods(const JobConfig& job) {
  std::vector<ExperimentConfig> out;
  out.reserve(job.methods.size());
  for (Method m : job.methods) {
    ExperimentConfig cfg = job.base;
    cfg.method = m;
    if (!method_prunes(m)) {
      cfg.theta = 0.0;
      cfg.theta_total = 0.0;
    }
    out.push_back(cfg);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string rounds_csv_header() {
  return "loop,auc_roc,auc_pr,uploaded_params,cumulative_uploaded,pruned_total,"
         "seconds";
}

std::string rounds_csv_row(const RoundRecord& r) {
  std::string row = std::to_string(r.loop);
  row += ',' + format_double(r.auc_roc);
  row += ',' + format_double(r.auc_pr);
  row += ',' + std::to_string(r.uploaded_total);
  row += ',' + std::to_string(r.cumulative_uploaded);
  row += ',' + std::to_string(r.neurons_pruned_total);
  row += ',' + format_double(r.wall_clock_seconds);
  return row;
}

std::string compare_csv(const NamedRecords& runs) {
  if (runs.empty()) throw InputError("compare_csv: no runs");
  const std::size_t loops = runs.front().second.size();
  for (const auto& [name, records] : runs) {
    if (records.size() != loops)
      throw InputError("compare_csv: run '" + name +
                       "' has a different loop count");
  }
  std::string out = "loop";
  for (const auto& [name, records] : runs) {
    out += ',' + name + "_auc_roc";
    out += ',' + name + "_auc_pr";
    out += ',' + name + "_uploaded_params";
    out += ',' + name + "_cumulative_uploaded";
    out += ',' + name + "_pruned_total";
    out += ',' + name + "_seconds";
  }
  out += '\n';
  for (std::size_t i = 0; i < loops; ++i) {
    out += std::to_string(i);
    for (const auto& [name, records] : runs) {
      const RoundRecord& r = records[i];
      out += ',' + format_double(r.auc_roc);
      out += ',' + format_double(r.auc_pr);
      out += ',' + std::to_string(r.uploaded_total);
      out += ',' + std::to_string(r.cumulative_uploaded);
      out += ',' + std::to_string(r.neurons_pruned_total);
      out += ',' + format_double(r.wall_clock_seconds);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::size_t baseline_index(const NamedRecords& runs) {
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& name = runs[i].first;
    if (name == "fedavg" || name == "fedavg_prune") return i;
  }
  return runs.size() - 1;
}

std::uint64_t total_uploaded(const std::vector<RoundRecord>& records) {
  std::uint64_t total = 0;
  for (const auto& r : records) total += r.uploaded_total;
  return total;
}

}  // namespace

std::string summary_json(const NamedRecords& runs, double total_seconds) {
  if (runs.empty()) throw InputError("summary_json: no runs");
  json j;
  json per_method = json::object();
  for (const auto& [name, records] : runs) {
    json m;
    if (records.empty()) {
      m["loops"] = 0;
    } else {
      const RoundRecord& last = records.back();
      m["loops"] = records.size();
      m["final_auc_roc"] = last.auc_roc;
      m["final_auc_pr"] = last.auc_pr;
      m["cumulative_uploaded"] = last.cumulative_uploaded;
      m["neurons_pruned_total"] = last.neurons_pruned_total;
      double seconds = 0.0;
      for (const auto& r : records) seconds += r.wall_clock_seconds;
      m["run_seconds"] = seconds;
    }
    per_method[name] = m;
  }
  j["methods"] = per_method;

  if (runs.size() >= 2 && !runs.front().second.empty()) {
    const std::size_t base = baseline_index(runs);
    const std::uint64_t base_total = total_uploaded(runs[base].second);
    json savings = json::object();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (i == base || base_total == 0) continue;
      savings[runs[i].first] =
          comm_savings_totals(total_uploaded(runs[i].second), base_total);
    }
    j["comm_savings_vs"] = runs[base].first;
    j["comm_savings"] = savings;
  }
  j["total_wall_seconds"] = total_seconds;
  return j.dump(2) + "\n";
}

}  // namespace scbf
