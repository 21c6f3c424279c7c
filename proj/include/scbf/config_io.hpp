#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scbf/federation.hpp"

namespace scbf {

// A parsed experiment file: one shared configuration plus the list of
// methods to run with it. Methods share seed, data, net and hyper so paired
// comparisons are apples to apples.
struct JobConfig {
  std::vector<Method> methods;
  ExperimentConfig base;  // base.method is methods.front()
  std::string out_dir = "out";

  bool operator==(const JobConfig&) const;
};

bool operator==(const DataSpec& a, const DataSpec& b);

std::string method_name(Method m);
Method method_from_name(const std::string& name);
std::string selection_mode_name(SelectionMode m);
SelectionMode selection_mode_from_name(const std::string& name);

// JSON job file <-> JobConfig. Parsing fills defaults and validates field
// ranges; serialize emits every field so parse(serialize(x)) == x.
JobConfig parse_job_text(const std::string& text);
JobConfig parse_job_file(const std::string& path);
std::string serialize_job(const JobConfig& job);

// One ExperimentConfig per requested method.
std::vector<ExperimentConfig> resolve_methods(const JobConfig& job);

// Shortest round-trip-exact decimal form of a double.
std::string format_double(double v);

// rounds.csv: fixed column order
// loop,auc_roc,auc_pr,uploaded_params,cumulative_uploaded,pruned_total,seconds
std::string rounds_csv_header();
std::string rounds_csv_row(const RoundRecord& r);

using NamedRecords =
    std::vector<std::pair<std::string, std::vector<RoundRecord>>>;

// Merged per-loop CSV with one column group per method.
std::string compare_csv(const NamedRecords& runs);

// Final-state summary: per-method metrics and totals, plus communication
// savings of every method against the baseline (the first fedavg-family
// method listed, or the last method when none is).
std::string summary_json(const NamedRecords& runs, double total_seconds);

}  // namespace scbf
