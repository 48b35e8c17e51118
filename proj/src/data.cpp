#include "eofair/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "eofair/error.hpp"
#include "eofair/random.hpp"

namespace eofair {

namespace {

void check_binary(const std::vector<int>& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0 && v[i] != 1) {
      throw ValueError(std::string(what) + " value " + std::to_string(v[i]) +
                       " at row " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_real(const std::string& cell) {
  std::string_view v(cell);
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  if (v.empty()) return std::nullopt;
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    return std::nullopt;
  }
  return out;
}

std::vector<int> to_binary(const std::vector<double>& col, const std::string& name) {
  std::vector<int> out(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (col[i] == 0.0) {
      out[i] = 0;
    } else if (col[i] == 1.0) {
      out[i] = 1;
    } else {
      std::ostringstream msg;
      msg << "column '" << name << "' has non-binary value " << col[i]
          << " at row " << (i + 1);
      throw ValueError(msg.str());
    }
  }
  return out;
}

struct FeatureBlock {
  FeatureMatrix matrix;
  std::vector<std::string> names;
};

FeatureBlock gather_features(const NumericTable& t,
                             const std::vector<std::size_t>& excluded) {
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (std::find(excluded.begin(), excluded.end(), j) == excluded.end()) {
      keep.push_back(j);
    }
  }
  std::vector<double> values(t.rows * keep.size());
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t k = 0; k < keep.size(); ++k) {
      values[i * keep.size() + k] = t.columns[keep[k]][i];
    }
  }
  FeatureBlock out{FeatureMatrix(t.rows, keep.size(), std::move(values)), {}};
  for (std::size_t j : keep) out.names.push_back(t.header[j]);
  return out;
}

// Largest-remainder allocation of `total` items over strata proportional to
// their sizes.
std::vector<std::size_t> allocate(const std::vector<std::size_t>& sizes,
                                  std::size_t total) {
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> alloc(sizes.size(), 0);
  if (n == 0) return alloc;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const double ideal = static_cast<double>(total) * static_cast<double>(sizes[k]) /
                         static_cast<double>(n);
    alloc[k] = std::min(sizes[k], static_cast<std::size_t>(std::floor(ideal)));
    used += alloc[k];
    remainders.emplace_back(ideal - std::floor(ideal), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; used < total && r < remainders.size() * 2; ++r) {
    const std::size_t k = remainders[r % remainders.size()].second;
    if (alloc[k] < sizes[k]) {
      ++alloc[k];
      ++used;
    }
  }
  return alloc;
}


}  // namespace

// ---------------------------------------------------------------------------
// FeatureMatrix

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols,
                             std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw SchemaError("feature matrix: " + std::to_string(values_.size()) +
                      " values for " + std::to_string(rows_) + "x" +
                      std::to_string(cols_));
  }
}

FeatureMatrix FeatureMatrix::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return FeatureMatrix(n, 1, std::move(values));
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<double> out;
  out.reserve(rows.size() * cols_);
  for (std::size_t i : rows) {
    const auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return FeatureMatrix(rows.size(), cols_, std::move(out));
}

// ---------------------------------------------------------------------------
// LabeledDataset / UnlabeledDataset

LabeledDataset::LabeledDataset(FeatureMatrix features, std::vector<int> sensitive,
                               std::vector<int> labels,
                               std::vector<std::string> feature_names)
    : features_(std::move(features)),
      sensitive_(std::move(sensitive)),
      labels_(std::move(labels)),
      feature_names_(std::move(feature_names)) {
  const std::size_t n = features_.rows();
  if (n == 0) throw SchemaError("labeled dataset is empty");
  if (sensitive_.size() != n || labels_.size() != n) {
    throw SchemaError("labeled dataset: row counts differ (features " +
                      std::to_string(n) + ", sensitive " +
                      std::to_string(sensitive_.size()) + ", labels " +
                      std::to_string(labels_.size()) + ")");
  }
  check_binary(sensitive_, "sensitive");
  check_binary(labels_, "label");
  for (int s : sensitive_) ++group_size_[s];
  if (group_size_[0] == 0 || group_size_[1] == 0) {
    throw GroupCoverageError("labeled dataset lacks sensitive group " +
                             std::to_string(group_size_[0] == 0 ? 0 : 1));
  }
  if (feature_names_.empty()) {
    for (std::size_t j = 0; j < features_.cols(); ++j) {
      feature_names_.push_back("x" + std::to_string(j + 1));
    }
  } else if (feature_names_.size() != features_.cols()) {
    throw SchemaError("labeled dataset: feature name count mismatch");
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  std::vector<int> s;
  std::vector<int> y;
  s.reserve(rows.size());
  y.reserve(rows.size());
  for (std::size_t i : rows) {
    s.push_back(sensitive_[i]);
    y.push_back(labels_[i]);
  }
  return LabeledDataset(features_.select_rows(rows), std::move(s), std::move(y),
                        feature_names_);
}

UnlabeledDataset::UnlabeledDataset(FeatureMatrix features,
                                   std::optional<std::vector<int>> sensitive,
                                   std::vector<std::string> feature_names)
    : features_(std::move(features)),
      sensitive_(std::move(sensitive)),
      feature_names_(std::move(feature_names)) {
  if (features_.rows() == 0) throw SchemaError("unlabeled dataset is empty");
  if (sensitive_) {
    if (sensitive_->size() != features_.rows()) {
      throw SchemaError("unlabeled dataset: sensitive length mismatch");
    }
    check_binary(*sensitive_, "sensitive");
    std::size_t counts[2] = {0, 0};
    for (int s : *sensitive_) ++counts[s];
    for (int s = 0; s < 2; ++s) {
      if (counts[s] < kMinGroupRows) {
        throw GroupCoverageError("unlabeled dataset: group " + std::to_string(s) +
                                 " has " + std::to_string(counts[s]) +
                                 " rows, need at least " +
                                 std::to_string(kMinGroupRows));
      }
    }
  }
  if (feature_names_.empty()) {
    for (std::size_t j = 0; j < features_.cols(); ++j) {
      feature_names_.push_back("x" + std::to_string(j + 1));
    }
  }
}

UnlabeledDataset UnlabeledDataset::from_labeled(const LabeledDataset& ds) {
  return UnlabeledDataset(ds.features(), ds.sensitive(), ds.feature_names());
}

const std::vector<int>& UnlabeledDataset::sensitive() const {
  if (!sensitive_) throw SchemaError("unlabeled dataset has no sensitive column");
  return *sensitive_;
}

UnlabeledDataset UnlabeledDataset::subset(std::span<const std::size_t> rows) const {
  std::optional<std::vector<int>> s;
  if (sensitive_) {
    s.emplace();
    for (std::size_t i : rows) s->push_back((*sensitive_)[i]);
  }
  return UnlabeledDataset(features_.select_rows(rows), std::move(s), feature_names_);
}

// ---------------------------------------------------------------------------
// CSV

std::optional<std::size_t> NumericTable::find(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

NumericTable read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("'" + path.string() + "' has no header row");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  NumericTable t;
  t.header = split_line(line);
  for (const auto& h : t.header) {
    if (h.empty()) throw SchemaError("'" + path.string() + "' has an empty column name");
  }
  t.columns.resize(t.header.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw ParseError("row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(t.header.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = parse_real(cells[j]);
      if (!v) {
        throw ParseError("row " + std::to_string(row) + ", column '" + t.header[j] +
                         "': cannot parse '" + cells[j] + "' as a finite real");
      }
      t.columns[j].push_back(*v);
    }
  }
  t.rows = row;
  return t;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& sensitive_col,
                 const std::optional<std::string>& label_col) {
  const NumericTable t = read_numeric_csv(path);
  const auto s_idx = t.find(sensitive_col);
  if (!s_idx) throw SchemaError("column '" + sensitive_col + "' not found");
  std::optional<std::size_t> y_idx;
  if (label_col) y_idx = t.find(*label_col);

  std::vector<std::size_t> excluded{*s_idx};
  if (y_idx) excluded.push_back(*y_idx);
  FeatureBlock block = gather_features(t, excluded);
  std::vector<int> s = to_binary(t.columns[*s_idx], sensitive_col);
  if (y_idx) {
    return LabeledDataset(std::move(block.matrix), std::move(s),
                          to_binary(t.columns[*y_idx], *label_col),
                          std::move(block.names));
  }
  return UnlabeledDataset(std::move(block.matrix), std::move(s),
                          std::move(block.names));
}

LabeledDataset load_labeled_csv(const std::filesystem::path& path,
                                const std::string& sensitive_col,
                                const std::string& label_col) {
  Dataset ds = load_csv(path, sensitive_col, label_col);
  if (auto* labeled = std::get_if<LabeledDataset>(&ds)) return std::move(*labeled);
  throw SchemaError("column '" + label_col + "' not found in '" + path.string() + "'");
}

UnlabeledDataset load_unlabeled_csv(const std::filesystem::path& path,
                                    const std::string& sensitive_col,
                                    const std::optional<std::string>& label_col,
                                    bool sensitive_required) {
  const NumericTable t = read_numeric_csv(path);
  const auto s_idx = t.find(sensitive_col);
  if (!s_idx && sensitive_required) {
    throw SchemaError("column '" + sensitive_col + "' not found");
  }
  std::vector<std::size_t> excluded;
  if (s_idx) excluded.push_back(*s_idx);
  if (label_col) {
    if (const auto y_idx = t.find(*label_col)) excluded.push_back(*y_idx);
  }
  FeatureBlock block = gather_features(t, excluded);
  std::optional<std::vector<int>> s;
  if (s_idx) s = to_binary(t.columns[*s_idx], sensitive_col);
  return UnlabeledDataset(std::move(block.matrix), std::move(s), std::move(block.names));
}

void write_csv(const LabeledDataset& ds, const std::filesystem::path& path,
               const std::string& sensitive_col, const std::string& label_col) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (const auto& name : ds.feature_names()) out << name << ',';
  out << sensitive_col << ',' << label_col << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.features().row(i)) out << v << ',';
    out << ds.sensitive()[i] << ',' << ds.labels()[i] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splitting

void SplitPlan::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0,1)");
  }
  if (n_repeats == 0) throw ConfigError("n_repeats must be positive");
}

SplitResult split(const LabeledDataset& ds, const SplitPlan& plan) {
  plan.validate();
  const std::size_t n = ds.size();

  std::vector<std::vector<std::size_t>> cells(4);
  for (std::size_t i = 0; i < n; ++i) {
    cells[2 * ds.sensitive()[i] + ds.labels()[i]].push_back(i);
  }
  SplitResult result;
  std::vector<std::vector<std::size_t>> strata;
  const bool cells_ok = std::all_of(cells.begin(), cells.end(),
                                    [](const auto& c) { return c.size() >= 2; });
  if (cells_ok) {
    strata = cells;
  } else {
    result.stratification = Stratification::kSensitiveOnly;
    result.fallback_warning = true;
    for (int s = 0; s < 2; ++s) {
      std::vector<std::size_t> g;
      for (std::size_t i = 0; i < n; ++i) {
        if (ds.sensitive()[i] == s) g.push_back(i);
      }
      strata.push_back(std::move(g));
    }
  }

  std::vector<std::size_t> sizes;
  for (const auto& st : strata) sizes.push_back(st.size());
  const auto n_train = static_cast<std::size_t>(
      std::llround(plan.train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> alloc = allocate(sizes, n_train);

  // Both groups must appear in every train part.
  for (int s = 0; s < 2; ++s) {
    std::size_t in_train = 0;
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < strata.size(); ++k) {
      const int group = cells_ok ? static_cast<int>(k / 2) : static_cast<int>(k);
      if (group == s) {
        in_train += alloc[k];
        members.push_back(k);
      }
    }
    if (in_train > 0) continue;
    std::size_t donor = strata.size();
    for (std::size_t k = 0; k < strata.size(); ++k) {
      if (std::find(members.begin(), members.end(), k) == members.end() &&
          alloc[k] >= 2 && (donor == strata.size() || alloc[k] > alloc[donor])) {
        donor = k;
      }
    }
    for (std::size_t k : members) {
      if (sizes[k] > 0) {
        ++alloc[k];
        if (donor != strata.size()) --alloc[donor];
        break;
      }
    }
  }

  for (std::size_t r = 0; r < plan.n_repeats; ++r) {
    auto rng = make_rng({plan.seed, r});
    SplitIndices idx;
    for (std::size_t k = 0; k < strata.size(); ++k) {
      std::vector<std::size_t> rows = strata[k];
      std::shuffle(rows.begin(), rows.end(), rng);
      idx.train.insert(idx.train.end(), rows.begin(), rows.begin() + alloc[k]);
      idx.test.insert(idx.test.end(), rows.begin() + alloc[k], rows.end());
    }
    std::sort(idx.train.begin(), idx.train.end());
    std::sort(idx.test.begin(), idx.test.end());
    result.splits.push_back(std::move(idx));
  }
  return result;
}

std::vector<std::vector<std::size_t>> stratified_folds(const LabeledDataset& ds,
                                                       std::size_t folds,
                                                       std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cv_folds must be at least 2");
  if (folds > ds.size()) throw ConfigError("more folds than rows");
  auto rng = make_rng({seed, 0x5eedf01dULL});
  std::vector<std::vector<std::size_t>> out(folds);
  std::size_t next = 0;
  for (int cell = 0; cell < 4; ++cell) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (2 * ds.sensitive()[i] + ds.labels()[i] == cell) rows.push_back(i);
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i : rows) {
      out[next].push_back(i);
      next = (next + 1) % folds;
    }
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

std::vector<std::size_t> stratified_order(const LabeledDataset& ds,
                                          std::uint64_t seed) {
  auto rng = make_rng({seed, 0x0dde7ULL});
  struct Ranked {
    double key;
    int cell;
    std::size_t row;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(ds.size());
  for (int cell = 0; cell < 4; ++cell) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (2 * ds.sensitive()[i] + ds.labels()[i] == cell) rows.push_back(i);
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t p = 0; p < rows.size(); ++p) {
      ranked.push_back({(static_cast<double>(p) + 0.5) / static_cast<double>(rows.size()),
                        cell, rows[p]});
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.cell < b.cell;
  });
  std::vector<std::size_t> order;
  order.reserve(ranked.size());
  for (const auto& r : ranked) order.push_back(r.row);
  return order;
}

std::vector<std::size_t> complement(std::span<const std::size_t> rows, std::size_t n) {
  std::vector<char> taken(n, 0);
  for (std::size_t i : rows) taken[i] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i]) out.push_back(i);
  }
  return out;
}

}  // namespace eofair
