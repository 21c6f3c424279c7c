#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scbf/common.hpp"
#include "scbf/rng.hpp"

namespace scbf {

// Binary-feature dataset: features in {0,1}, labels in {0,1}.
template <typename Scalar>
struct Cohort {
  MatrixX<Scalar> features;
  VectorX<Scalar> labels;
  std::vector<std::string> feature_names;

  Index rows() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
};

template <typename Scalar>
struct SplitPartition {
  std::vector<Cohort<Scalar>> train_clients;
  Cohort<Scalar> validation;
  Cohort<Scalar> test;
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string()
                                           : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace detail

// CSV: one header row, comma separated, every cell 0 or 1, one designated
// label column. Rows are kept in file order; the header supplies
// feature_names.
template <typename Scalar = double>
Cohort<Scalar> load_csv(const std::string& path,
                        const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw InputError("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw SchemaError("load_csv: " + path + " is empty or has no header");
  const auto header = detail::split_line(line);
  Index label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label_col = static_cast<Index>(c);
      break;
    }
  }
  if (label_col < 0)
    throw SchemaError("load_csv: label column '" + label_column +
                      "' not found in " + path);

  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<Index>(c) != label_col) names.push_back(header[c]);
  }

  std::vector<std::vector<Scalar>> rows;
  std::vector<Scalar> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = detail::split_line(line);
    if (cells.size() != header.size())
      throw SchemaError("load_csv: row " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    std::vector<Scalar> row;
    row.reserve(cells.size() - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      Scalar v;
      if (cells[c] == "0") {
        v = Scalar(0);
      } else if (cells[c] == "1") {
        v = Scalar(1);
      } else {
        throw ParseError("load_csv: row " + std::to_string(lineno) +
                         ", column '" + header[c] + "': expected 0/1, got '" +
                         cells[c] + "'");
      }
      if (static_cast<Index>(c) == label_col) {
        labels.push_back(v);
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw SchemaError("load_csv: " + path + " has no data rows");

  Cohort<Scalar> cohort;
  cohort.feature_names = std::move(names);
  cohort.features.resize(static_cast<Index>(rows.size()),
                         static_cast<Index>(rows[0].size()));
  cohort.labels.resize(static_cast<Index>(labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      cohort.features(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    cohort.labels[static_cast<Index>(r)] = labels[r];
  }
  return cohort;
}

// Synthetic stand-in cohort: features are iid Bernoulli(sparsity) and labels
// follow a planted logistic model, label ~ Bernoulli(sigmoid(w.x + b)). The
// planted weights are scaled so the logit spread is wide (the task is
// clearly learnable) and b is placed at the 70th percentile of the raw
// scores, which lands the positive rate near 30%.
template <typename Scalar = double>
Cohort<Scalar> synth_cohort(Index n_rows, Index n_features, double sparsity,
                            std::uint64_t seed) {
  if (n_rows < 1 || n_features < 1)
    throw InputError("synth_cohort: n_rows and n_features must be >= 1");
  if (!(sparsity > 0.0) || !(sparsity < 1.0))
    throw InputError("synth_cohort: sparsity must be in (0, 1)");

  Rng feature_rng(derive_seed(seed, 1));
  Rng weight_rng(derive_seed(seed, 2));
  Rng label_rng(derive_seed(seed, 3));

  Cohort<Scalar> cohort;
  cohort.features.resize(n_rows, n_features);
  for (Index r = 0; r < n_rows; ++r) {
    for (Index c = 0; c < n_features; ++c) {
      cohort.features(r, c) =
          feature_rng.bernoulli(sparsity) ? Scalar(1) : Scalar(0);
    }
  }

  VectorX<Scalar> w(n_features);
  for (Index c = 0; c < n_features; ++c)
    w[c] = static_cast<Scalar>(weight_rng.gaussian());

  VectorX<Scalar> raw = cohort.features * w;
  std::vector<Scalar> sorted(raw.data(), raw.data() + raw.size());
  std::sort(sorted.begin(), sorted.end());
  const Scalar pivot =
      sorted[static_cast<std::size_t>(0.7 * static_cast<double>(n_rows))];
  Scalar spread = Scalar(0);
  const Scalar mean = raw.mean();
  for (Index r = 0; r < n_rows; ++r)
    spread += (raw[r] - mean) * (raw[r] - mean);
  spread = std::sqrt(spread / static_cast<Scalar>(n_rows));
  if (spread <= Scalar(0)) spread = Scalar(1);
  const Scalar steep = Scalar(6) / spread;

  cohort.labels.resize(n_rows);
  for (Index r = 0; r < n_rows; ++r) {
    const Scalar logit = steep * (raw[r] - pivot);
    const double p = 0.5 * (1.0 + std::tanh(0.5 * static_cast<double>(logit)));
    cohort.labels[r] = label_rng.bernoulli(p) ? Scalar(1) : Scalar(0);
  }

  cohort.feature_names.reserve(static_cast<std::size_t>(n_features));
  for (Index c = 0; c < n_features; ++c)
    cohort.feature_names.push_back("f" + std::to_string(c));
  return cohort;
}

namespace detail {

template <typename Scalar>
Cohort<Scalar> take_rows(const Cohort<Scalar>& src,
                         const std::vector<Index>& rows) {
  Cohort<Scalar> out;
  out.feature_names = src.feature_names;
  out.features.resize(static_cast<Index>(rows.size()), src.features.cols());
  out.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.features.row(static_cast<Index>(r)) = src.features.row(rows[r]);
    out.labels[static_cast<Index>(r)] = src.labels[rows[r]];
  }
  return out;
}

// 60/10/30 cut points over n rows.
inline std::pair<Index, Index> split_counts(Index n) {
  const Index train = (n * 6) / 10;
  const Index val = n / 10;
  return {train, val};
}

}  // namespace detail

// Seeded shuffle, then 60% train / 10% validation / 30% test; the train rows
// are dealt round-robin into K client partitions (sizes differ by at most
// one). With `stratified` set, the shuffle-and-cut is done per class first so
// each part preserves the class balance.
template <typename Scalar>
SplitPartition<Scalar> split_partition(const Cohort<Scalar>& cohort, Index k,
                                       std::uint64_t seed,
                                       bool stratified = false) {
  const Index n = cohort.rows();
  if (k < 1) throw InputError("split_partition: K must be >= 1");
  if (n < k + 2)
    throw InputError("split_partition: need at least K + 2 rows, got " +
                     std::to_string(n));

  std::vector<Index> train_rows;
  std::vector<Index> val_rows;
  std::vector<Index> test_rows;

  if (!stratified) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(seed, 17));
    rng.shuffle(order);
    const auto [n_train, n_val] = detail::split_counts(n);
    train_rows.assign(order.begin(), order.begin() + n_train);
    val_rows.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    test_rows.assign(order.begin() + n_train + n_val, order.end());
  } else {
    for (Scalar cls : {Scalar(0), Scalar(1)}) {
      std::vector<Index> members;
      for (Index i = 0; i < n; ++i)
        if (cohort.labels[i] == cls) members.push_back(i);
      Rng rng(derive_seed(seed, 17, cls == Scalar(0) ? 0 : 1));
      rng.shuffle(members);
      const auto [n_train, n_val] =
          detail::split_counts(static_cast<Index>(members.size()));
      train_rows.insert(train_rows.end(), members.begin(),
                        members.begin() + n_train);
      val_rows.insert(val_rows.end(), members.begin() + n_train,
                      members.begin() + n_train + n_val);
      test_rows.insert(test_rows.end(), members.begin() + n_train + n_val,
                       members.end());
    }
    // remix the merged train rows so round-robin clients get both classes
    Rng rng(derive_seed(seed, 19));
    rng.shuffle(train_rows);
  }

  SplitPartition<Scalar> part;
  part.train_clients.reserve(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c) {
    std::vector<Index> client_rows;
    for (std::size_t i = static_cast<std::size_t>(c); i < train_rows.size();
         i += static_cast<std::size_t>(k))
      client_rows.push_back(train_rows[i]);
    part.train_clients.push_back(detail::take_rows(cohort, client_rows));
  }
  part.validation = detail::take_rows(cohort, val_rows);
  part.test = detail::take_rows(cohort, test_rows);
  return part;
}

}  // namespace scbf
