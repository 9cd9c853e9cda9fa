#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "road/errors.hpp"
#include "road/matrix.hpp"
#include "road/rng.hpp"

namespace road {

struct Dataset {
  Matrix X;                // n x d
  std::vector<int> y;      // binary labels
  std::vector<int> s;      // binary sensitive attribute
  std::vector<std::string> feature_names;
  std::string label_name;
  std::string sensitive_name;

  std::size_t n() const { return X.rows; }
  std::size_t dim() const { return X.cols; }

  std::size_t feature_index(const std::string& name) const {
    for (std::size_t j = 0; j < feature_names.size(); ++j)
      if (feature_names[j] == name) return j;
    throw ConfigError("no feature column named '" + name + "'");
  }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ParseError("row " + std::to_string(row) + ", column '" + col + "': cannot parse '" + cell +
                     "' as a number");
  return v;
}

inline int parse_binary(const std::string& cell, std::size_t row, const std::string& col) {
  const double v = parse_cell(cell, row, col);
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw ParseError("row " + std::to_string(row) + ", column '" + col + "': value " + cell +
                   " is not binary");
}

}  // namespace detail

// Comma-separated numeric file with a header row. The named label and
// sensitive columns must be 0/1; every other column becomes a feature in
// file order.
inline Dataset load_csv(const std::string& path, const std::string& label_col,
                        const std::string& sensitive_col) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
  const auto header = detail::split_line(line);

  std::optional<std::size_t> label_idx, sens_idx;
  std::vector<std::size_t> feat_idx;
  Dataset ds;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == label_col) {
      if (label_idx) throw ParseError("'" + path + "': duplicate column '" + label_col + "'");
      label_idx = j;
    } else if (header[j] == sensitive_col) {
      if (sens_idx) throw ParseError("'" + path + "': duplicate column '" + sensitive_col + "'");
      sens_idx = j;
    } else {
      feat_idx.push_back(j);
      ds.feature_names.push_back(header[j]);
    }
  }
  if (!label_idx) throw ParseError("'" + path + "': no column named '" + label_col + "'");
  if (!sens_idx) throw ParseError("'" + path + "': no column named '" + sensitive_col + "'");
  if (feat_idx.empty()) throw ParseError("'" + path + "': no feature columns left");
  ds.label_name = label_col;
  ds.sensitive_name = sensitive_col;

  std::vector<double> flat;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = detail::split_line(line);
    if (cells.size() != header.size())
      throw ParseError("'" + path + "', row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    for (std::size_t j : feat_idx) flat.push_back(detail::parse_cell(cells[j], row, header[j]));
    ds.y.push_back(detail::parse_binary(cells[*label_idx], row, label_col));
    ds.s.push_back(detail::parse_binary(cells[*sens_idx], row, sensitive_col));
  }
  if (ds.y.empty()) throw ParseError("'" + path + "': no data rows");
  ds.X.rows = ds.y.size();
  ds.X.cols = feat_idx.size();
  ds.X.a = std::move(flat);
  return ds;
}

// Per-feature affine transform fit on training data and replayed elsewhere.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // zero-variance columns get stddev 1

  void apply(Dataset& ds) const {
    if (ds.dim() != mean.size()) throw ConfigError("standardizer: dimension mismatch");
    for (std::size_t i = 0; i < ds.n(); ++i) {
      double* row = ds.X.row(i);
      for (std::size_t j = 0; j < ds.dim(); ++j) row[j] = (row[j] - mean[j]) / stddev[j];
    }
  }
};

inline Standardizer fit_standardizer(const Dataset& ds) {
  if (ds.n() == 0) throw ConfigError("fit_standardizer: empty dataset");
  Standardizer st;
  st.mean.assign(ds.dim(), 0.0);
  st.stddev.assign(ds.dim(), 0.0);
  const double n = static_cast<double>(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double* row = ds.X.row(i);
    for (std::size_t j = 0; j < ds.dim(); ++j) st.mean[j] += row[j];
  }
  for (double& m : st.mean) m /= n;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double* row = ds.X.row(i);
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      const double d = row[j] - st.mean[j];
      st.stddev[j] += d * d;
    }
  }
  for (double& v : st.stddev) {
    v = std::sqrt(v / n);
    if (v == 0.0) v = 1.0;
  }
  return st;
}

inline Dataset gather(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.label_name = ds.label_name;
  out.sensitive_name = ds.sensitive_name;
  out.X = Matrix(idx.size(), ds.dim());
  out.y.reserve(idx.size());
  out.s.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t src = idx[i];
    std::copy(ds.X.row(src), ds.X.row(src) + ds.dim(), out.X.row(i));
    out.y.push_back(ds.y[src]);
    out.s.push_back(ds.s[src]);
  }
  return out;
}

// Train/test split stratified jointly on (y, s): each of the four cells is
// shuffled and divided separately so group proportions carry over.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double test_frac, RngState& rng) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) throw ConfigError("split: test_frac outside (0,1)");
  std::array<std::vector<std::size_t>, 4> cells;
  for (std::size_t i = 0; i < ds.n(); ++i) cells[2 * ds.y[i] + ds.s[i]].push_back(i);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& cell : cells) {
    rng.shuffle(cell);
    const std::size_t n_test = static_cast<std::size_t>(
        std::llround(test_frac * static_cast<double>(cell.size())));
    for (std::size_t i = 0; i < cell.size(); ++i)
      (i < n_test ? test_idx : train_idx).push_back(cell[i]);
  }
  // restore a stable order independent of the cell layout
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  if (train_idx.empty() || test_idx.empty()) throw ConfigError("split: a side came out empty");
  return {gather(ds, train_idx), gather(ds, test_idx)};
}

struct Batch {
  std::vector<std::size_t> idx;
  Matrix X;
  std::vector<int> y;
  std::vector<int> s;
};

// Shuffled minibatches. A slice that lacks one of the sensitive groups
// present in the dataset is merged into its neighbor, so per-group
// normalization is always well defined and every algorithm sees the same
// batch schedule.
inline std::vector<Batch> iterate_batches(const Dataset& ds, std::size_t batch_size, RngState& rng) {
  if (batch_size == 0) throw ConfigError("iterate_batches: batch_size is zero");
  if (ds.n() == 0) throw ConfigError("iterate_batches: empty dataset");
  std::vector<std::size_t> order(ds.n());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> slices;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, order.size());
    slices.emplace_back(order.begin() + start, order.begin() + end);
  }

  bool has0 = false, has1 = false;
  for (int v : ds.s) (v ? has1 : has0) = true;
  auto covered = [&](const std::vector<std::size_t>& slice) {
    bool c0 = !has0, c1 = !has1;
    for (std::size_t i : slice) (ds.s[i] ? c1 : c0) = true;
    return c0 && c1;
  };
  std::vector<std::vector<std::size_t>> merged;
  for (auto& slice : slices) {
    if (!merged.empty() && !covered(slice)) {
      merged.back().insert(merged.back().end(), slice.begin(), slice.end());
    } else {
      merged.push_back(std::move(slice));
    }
  }
  // a degenerate first slice can only merge forward
  while (merged.size() > 1 && !covered(merged.front())) {
    merged[1].insert(merged[1].begin(), merged[0].begin(), merged[0].end());
    merged.erase(merged.begin());
  }

  std::vector<Batch> out;
  out.reserve(merged.size());
  for (auto& idx : merged) {
    Batch b;
    Dataset sub = gather(ds, idx);
    b.idx = std::move(idx);
    b.X = std::move(sub.X);
    b.y = std::move(sub.y);
    b.s = std::move(sub.s);
    out.push_back(std::move(b));
  }
  return out;
}

struct SubgroupSpec {
  std::string bin_col;
  double bin_width = 10.0;
  std::optional<std::string> cross_col;  // binary column crossed with the bins
  std::size_t min_size = 1;
};

struct Subgroup {
  std::string key;
  std::vector<std::size_t> idx;
};

// Bins a raw-valued column into [k*w, (k+1)*w) intervals, optionally crossed
// with a binary column. Subgroups smaller than min_size, or containing a
// single sensitive value, are dropped: disparate impact is undefined there.
inline std::vector<Subgroup> build_subgroups(const Dataset& raw, const SubgroupSpec& spec) {
  if (!(spec.bin_width > 0.0)) throw ConfigError("build_subgroups: bin_width must be positive");
  const std::size_t bin_j = raw.feature_index(spec.bin_col);
  std::optional<std::size_t> cross_j;
  if (spec.cross_col) cross_j = raw.feature_index(*spec.cross_col);

  std::map<std::pair<long long, int>, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < raw.n(); ++i) {
    const double v = raw.X(i, bin_j);
    const long long bin = static_cast<long long>(std::floor(v / spec.bin_width));
    int cv = 0;
    if (cross_j) {
      const double c = raw.X(i, *cross_j);
      if (c != 0.0 && c != 1.0)
        throw ConfigError("build_subgroups: cross column '" + *spec.cross_col + "' is not binary");
      cv = static_cast<int>(c);
    }
    buckets[{bin, cv}].push_back(i);
  }

  std::vector<Subgroup> out;
  for (auto& [key, idx] : buckets) {
    if (idx.size() < spec.min_size) continue;
    bool g0 = false, g1 = false;
    for (std::size_t i : idx) (raw.s[i] ? g1 : g0) = true;
    if (!g0 || !g1) continue;
    const double lo = static_cast<double>(key.first) * spec.bin_width;
    std::ostringstream name;
    name << spec.bin_col << "[" << lo << "," << lo + spec.bin_width << ")";
    if (cross_j) name << "|" << *spec.cross_col << "=" << key.second;
    out.push_back({name.str(), std::move(idx)});
  }
  if (out.empty())
    throw ConfigError("build_subgroups: no subgroup survived the size and coverage filters");
  return out;
}

}  // namespace road
