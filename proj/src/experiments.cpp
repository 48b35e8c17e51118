#include "eofair/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "eofair/error.hpp"
#include "eofair/kernels.hpp"
#include "eofair/random.hpp"

namespace eofair {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto rng = make_rng({seed, a, b});
  return rng();
}

std::size_t rounded(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

std::vector<std::size_t> slice(const std::vector<std::size_t>& v, std::size_t from,
                               std::size_t to) {
  return {v.begin() + static_cast<std::ptrdiff_t>(from),
          v.begin() + static_cast<std::ptrdiff_t>(to)};
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(v[r]);
  return out;
}

ArmSummary summarize(const std::vector<EvaluationReport>& reports, bool with_std) {
  ArmSummary out;
  std::vector<double> acc;
  std::vector<double> deo;
  for (const auto& r : reports) {
    acc.push_back(r.accuracy);
    if (r.deo) {
      deo.push_back(*r.deo);
    } else {
      ++out.deo_undefined;
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  auto stdev = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  out.acc_mean = mean(acc);
  out.deo_mean = mean(deo);
  if (with_std) {
    out.acc_std = stdev(acc);
    out.deo_std = stdev(deo);
  }
  return out;
}

}  // namespace

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 30; ++i) grid.push_back(std::pow(10.0, -4.0 + 8.0 * i / 29.0));
  return grid;
}

std::vector<std::size_t> default_k_grid() {
  std::vector<std::size_t> grid;
  for (std::size_t k = 1; k <= 51; k += 2) grid.push_back(k);
  return grid;
}

void BenchmarkConfig::validate() const {
  if (estimator != "logistic" && estimator != "knn") {
    throw ConfigError("unknown estimator '" + estimator + "' (expected logistic or knn)");
  }
  if (estimator == "logistic" && lambda_grid.empty()) throw ConfigError("empty lambda grid");
  if (estimator == "knn" && k_grid.empty()) throw ConfigError("empty k grid");
  for (double l : lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda values must be finite and >= 0");
  }
  for (std::size_t k : k_grid) {
    if (k == 0) throw ConfigError("k values must be positive");
  }
  if (!(shortlist_fraction > 0.0 && shortlist_fraction <= 1.0)) {
    throw ConfigError("accuracy_shortlist_fraction must lie in (0, 1]");
  }
  if (cv_folds < 2) throw ConfigError("cv_folds must be at least 2");
  split.validate();
  logistic.validate();
  if (unlabeled.kind == UnlabeledSource::Kind::kFraction &&
      !(unlabeled.fraction > 0.0 && unlabeled.fraction < 1.0)) {
    throw ConfigError("unlabeled fraction must lie in (0, 1)");
  }
}

std::vector<EstimatorConfig> BenchmarkConfig::grid() const {
  std::vector<EstimatorConfig> out;
  if (estimator == "knn") {
    for (std::size_t k : k_grid) out.emplace_back(KnnConfig{k});
  } else {
    for (double l : lambda_grid) {
      LogisticConfig c = logistic;
      c.l2_lambda = l;
      out.emplace_back(c);
    }
  }
  return out;
}

std::string BenchmarkConfig::hyperparameter_name() const {
  return estimator == "knn" ? "k" : "l2_lambda";
}

double BenchmarkConfig::hyperparameter_value(std::size_t index) const {
  return estimator == "knn" ? static_cast<double>(k_grid.at(index)) : lambda_grid.at(index);
}

BenchmarkData load_benchmark_data(const BenchmarkConfig& cfg) {
  BenchmarkData data{load_labeled_csv(cfg.dataset, cfg.sensitive_col, cfg.label_col),
                     std::nullopt, std::nullopt};
  if (cfg.test_set) {
    data.test_set = load_labeled_csv(*cfg.test_set, cfg.sensitive_col, cfg.label_col);
  }
  if (cfg.unlabeled.kind == UnlabeledSource::Kind::kFile) {
    data.unlabeled = load_unlabeled_csv(cfg.unlabeled.path, cfg.sensitive_col, cfg.label_col,
                                        cfg.mode == ScoreMode::kGroupAware);
  }
  return data;
}

std::size_t shortlist_choice(const std::vector<CvCell>& cv, std::size_t arm,
                             double shortlist_fraction) {
  double best_acc = -1.0;
  for (const auto& c : cv) {
    if (c.folds_used > 0) best_acc = std::max(best_acc, c.accuracy[arm]);
  }
  if (best_acc < 0.0) throw ConfigError("cross-validation: every fold was skipped");
  std::optional<std::size_t> choice;
  for (std::size_t i = 0; i < cv.size(); ++i) {
    const CvCell& c = cv[i];
    if (c.folds_used == 0 || c.accuracy[arm] < shortlist_fraction * best_acc) continue;
    if (!choice) {
      choice = i;
      continue;
    }
    const CvCell& b = cv[*choice];
    if (c.deo[arm] < b.deo[arm] ||
        (c.deo[arm] == b.deo[arm] && c.accuracy[arm] > b.accuracy[arm])) {
      choice = i;
    }
  }
  return *choice;
}

std::array<std::size_t, 2> select_hyperparameters(const LabeledDataset& labeled,
                                                  const BenchmarkConfig& cfg,
                                                  std::uint64_t seed,
                                                  std::vector<CvCell>& cv,
                                                  std::vector<std::string>& warnings) {
  const auto grid = cfg.grid();
  cv.clear();
  if (grid.size() == 1) return {0, 0};
  cv.assign(grid.size(), CvCell{});
  for (std::size_t h = 0; h < grid.size(); ++h) cv[h].hyperparameter = cfg.hyperparameter_value(h);

  const auto folds = stratified_folds(labeled, cfg.cv_folds, seed);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& val_rows = folds[f];
    std::optional<LabeledDataset> train;
    try {
      train = labeled.subset(complement(val_rows, labeled.size()));
    } catch (const GroupCoverageError& e) {
      warnings.push_back("CV fold " + std::to_string(f) + " skipped: " + e.what());
      continue;
    }
    const FeatureMatrix val_x = labeled.features().select_rows(val_rows);
    const std::vector<int> val_s = pick(labeled.sensitive(), val_rows);
    const std::vector<int> val_y = pick(labeled.labels(), val_rows);
    std::optional<UnlabeledDataset> reuse;
    try {
      reuse = UnlabeledDataset::from_labeled(*train);
    } catch (const GroupCoverageError& e) {
      warnings.push_back("CV fold " + std::to_string(f) + " skipped: " + e.what());
      continue;
    }
    for (std::size_t h = 0; h < grid.size(); ++h) {
      try {
        const ScoreModel model = fit_estimator(*train, grid[h], cfg.mode);
        const FairClassifier clf = calibrate_model(model, train->size(), *reuse);
        const std::array<std::vector<int>, 2> pred{
            clf.predict_rows(val_x, val_s), clf.with_theta(0.0).predict_rows(val_x, val_s)};
        bool undefined = false;
        for (std::size_t arm = 0; arm < 2; ++arm) {
          const EvaluationReport r = evaluate(pred[arm], val_y, val_s);
          cv[h].accuracy[arm] += r.accuracy;
          cv[h].deo[arm] += r.deo_or_zero();
          undefined = undefined || r.deo_undefined();
        }
        ++cv[h].folds_used;
        cv[h].folds_deo_undefined += undefined;
      } catch (const GroupCoverageError& e) {
        warnings.push_back("CV fold " + std::to_string(f) + ", " + cfg.hyperparameter_name() +
                           "=" + std::to_string(cv[h].hyperparameter) + " skipped: " + e.what());
      } catch (const ConfigError& e) {
        warnings.push_back("CV fold " + std::to_string(f) + ", " + cfg.hyperparameter_name() +
                           "=" + std::to_string(cv[h].hyperparameter) + " skipped: " + e.what());
      }
    }
  }
  for (auto& c : cv) {
    if (c.folds_used == 0) continue;
    for (std::size_t arm = 0; arm < 2; ++arm) {
      c.accuracy[arm] /= static_cast<double>(c.folds_used);
      c.deo[arm] /= static_cast<double>(c.folds_used);
    }
  }
  return {shortlist_choice(cv, kPlugin, cfg.shortlist_fraction),
          shortlist_choice(cv, kBaseline, cfg.shortlist_fraction)};
}

ArmEvaluation evaluate_arms(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                            const LabeledDataset& test, const EstimatorConfig& estimator,
                            ScoreMode mode) {
  const ScoreModel model = fit_estimator(labeled, estimator, mode);
  const FairClassifier clf = calibrate_model(model, labeled.size(), unlabeled);
  ArmEvaluation out;
  out.theta_hat = clf.theta_hat();
  out.unfairness = clf.unfairness_empirical();
  out.plugin = evaluate(clf.predict_rows(test.features(), test.sensitive()), test.labels(),
                        test.sensitive());
  out.baseline = evaluate(clf.with_theta(0.0).predict_rows(test.features(), test.sensitive()),
                          test.labels(), test.sensitive());
  return out;
}

namespace {

// Evaluates both arms with their own selected hyperparameters.
void fill_arms(RepeatOutcome& out, const LabeledDataset& labeled,
               const UnlabeledDataset& unlabeled, const LabeledDataset& test,
               const BenchmarkConfig& cfg, const std::vector<EstimatorConfig>& grid,
               const std::array<std::size_t, 2>& chosen) {
  const ArmEvaluation first = evaluate_arms(labeled, unlabeled, test, grid[chosen[kPlugin]],
                                            cfg.mode);
  out.theta_hat = first.theta_hat;
  out.arms[kPlugin].test = first.plugin;
  out.arms[kPlugin].theta = first.theta_hat;
  if (chosen[kBaseline] == chosen[kPlugin]) {
    out.arms[kBaseline].test = first.baseline;
  } else {
    out.arms[kBaseline].test =
        evaluate_arms(labeled, unlabeled, test, grid[chosen[kBaseline]], cfg.mode).baseline;
  }
  for (std::size_t arm = 0; arm < 2; ++arm) {
    out.arms[arm].chosen_index = chosen[arm];
    out.arms[arm].chosen_hyperparameter = cfg.hyperparameter_value(chosen[arm]);
  }
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkData& data, const BenchmarkConfig& cfg) {
  cfg.validate();
  const auto grid = cfg.grid();
  BenchmarkReport report;
  report.hyperparameter_name = cfg.hyperparameter_name();
  report.estimator = cfg.estimator;
  report.mode = cfg.mode;
  report.fixed_test_set = data.test_set.has_value();

  std::vector<SplitIndices> splits;
  if (data.test_set) {
    SplitIndices all;
    all.train.resize(data.dataset.size());
    for (std::size_t i = 0; i < all.train.size(); ++i) all.train[i] = i;
    splits.push_back(std::move(all));
  } else {
    SplitResult sr = split(data.dataset, cfg.split);
    report.split_stratification = sr.stratification;
    report.split_fallback_warning = sr.fallback_warning;
    splits = std::move(sr.splits);
  }

  report.repeats.resize(splits.size());
  kernels::parallel_for(splits.size(), [&](std::size_t r) {
    RepeatOutcome& out = report.repeats[r];
    out.repeat = r;
    const LabeledDataset train = data.dataset.subset(splits[r].train);
    const LabeledDataset test =
        data.test_set ? *data.test_set : data.dataset.subset(splits[r].test);

    std::optional<LabeledDataset> labeled;
    std::optional<UnlabeledDataset> unlabeled;
    switch (cfg.unlabeled.kind) {
      case UnlabeledSource::Kind::kReuse:
        labeled = train;
        unlabeled = UnlabeledDataset::from_labeled(train);
        break;
      case UnlabeledSource::Kind::kFile:
        labeled = train;
        unlabeled = *data.unlabeled;
        break;
      case UnlabeledSource::Kind::kFraction: {
        const auto order = stratified_order(train, derive_seed(cfg.split.seed, r, 0x0f));
        const std::size_t m = rounded(cfg.unlabeled.fraction, train.size());
        if (m == 0 || m >= train.size()) {
          throw ConfigError("unlabeled fraction leaves an empty labeled or unlabeled part");
        }
        const auto pool = slice(order, 0, m);
        auto rest = slice(order, m, order.size());
        std::sort(rest.begin(), rest.end());
        labeled = train.subset(rest);
        const LabeledDataset held = train.subset(pool);
        unlabeled = UnlabeledDataset(held.features(), held.sensitive(), held.feature_names());
        break;
      }
    }
    out.n_labeled = labeled->size();
    out.n_unlabeled = unlabeled->size();
    out.n_test = test.size();

    const auto chosen = select_hyperparameters(*labeled, cfg, derive_seed(cfg.split.seed, r, 0xcf),
                                               out.cv, out.warnings);
    fill_arms(out, *labeled, *unlabeled, test, cfg, grid, chosen);
  });

  for (std::size_t arm = 0; arm < 2; ++arm) {
    std::vector<EvaluationReport> reports;
    for (const auto& r : report.repeats) reports.push_back(r.arms[arm].test);
    report.arms[arm] = summarize(reports, !report.fixed_test_set);
  }
  return report;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  return run_benchmark(load_benchmark_data(cfg), cfg);
}

// ---------------------------------------------------------------------------
// Unlabeled sweep

void SweepConfig::validate() const {
  base.validate();
  if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0)) {
    throw ConfigError("labeled_fraction must lie in (0, 1)");
  }
  if (unlabeled_fractions.empty()) throw ConfigError("empty unlabeled fraction list");
  double largest = 0.0;
  for (double f : unlabeled_fractions) {
    if (!(f >= 0.0 && f < 1.0)) throw ConfigError("unlabeled fractions must lie in [0, 1)");
    largest = std::max(largest, f);
  }
  if (labeled_fraction + largest >= 1.0) {
    throw ConfigError("labeled fraction plus the largest unlabeled fraction must stay below 1");
  }
  if (repeats == 0) throw ConfigError("repeats must be positive");
}

SweepReport run_unlabeled_sweep(const LabeledDataset& data, const SweepConfig& cfg) {
  cfg.validate();
  const auto grid = cfg.base.grid();
  const std::size_t n = data.size();
  const std::size_t n_lab = rounded(cfg.labeled_fraction, n);
  const double largest =
      *std::max_element(cfg.unlabeled_fractions.begin(), cfg.unlabeled_fractions.end());
  const std::size_t pool_end = n_lab + rounded(largest, n);
  if (n_lab == 0 || pool_end >= n) {
    throw ConfigError("dataset too small for the requested fractions");
  }

  SweepReport report;
  report.n_labeled = n_lab;
  report.n_test = n - pool_end;
  const std::size_t n_frac = cfg.unlabeled_fractions.size();
  // outcomes[r][f]
  std::vector<std::vector<RepeatOutcome>> outcomes(cfg.repeats,
                                                   std::vector<RepeatOutcome>(n_frac));
  std::vector<std::vector<std::string>> warnings(cfg.repeats);

  kernels::parallel_for(cfg.repeats, [&](std::size_t r) {
    const auto order = stratified_order(data, derive_seed(cfg.seed, r, 0x5e));
    auto lab_rows = slice(order, 0, n_lab);
    auto test_rows = slice(order, pool_end, n);
    std::sort(lab_rows.begin(), lab_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    const LabeledDataset labeled = data.subset(lab_rows);
    const LabeledDataset test = data.subset(test_rows);

    std::vector<CvCell> cv;
    const auto chosen =
        select_hyperparameters(labeled, cfg.base, derive_seed(cfg.seed, r, 0xcf), cv, warnings[r]);
    for (std::size_t f = 0; f < n_frac; ++f) {
      const std::size_t m = rounded(cfg.unlabeled_fractions[f], n);
      RepeatOutcome& out = outcomes[r][f];
      out.repeat = r;
      std::optional<UnlabeledDataset> unlabeled;
      if (m == 0) {
        unlabeled = UnlabeledDataset::from_labeled(labeled);
      } else {
        auto pool = slice(order, n_lab, n_lab + m);
        std::sort(pool.begin(), pool.end());
        const FeatureMatrix x = data.features().select_rows(pool);
        unlabeled = UnlabeledDataset(x, pick(data.sensitive(), pool), data.feature_names());
      }
      out.n_labeled = labeled.size();
      out.n_unlabeled = unlabeled->size();
      out.n_test = test.size();
      fill_arms(out, labeled, *unlabeled, test, cfg.base, grid, chosen);
    }
  });

  for (std::size_t f = 0; f < n_frac; ++f) {
    SweepRow row;
    row.fraction = cfg.unlabeled_fractions[f];
    row.n_unlabeled = outcomes.front()[f].n_unlabeled;
    for (std::size_t arm = 0; arm < 2; ++arm) {
      std::vector<EvaluationReport> reports;
      for (std::size_t r = 0; r < cfg.repeats; ++r) reports.push_back(outcomes[r][f].arms[arm].test);
      row.arms[arm] = summarize(reports, true);
    }
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      row.plugin_deo.push_back(outcomes[r][f].arms[kPlugin].test.deo_or_zero());
      row.plugin_acc.push_back(outcomes[r][f].arms[kPlugin].test.accuracy);
    }
    report.rows.push_back(std::move(row));
  }
  for (auto& w : warnings) report.warnings.insert(report.warnings.end(), w.begin(), w.end());
  return report;
}

SweepReport run_unlabeled_sweep(const SweepConfig& cfg) {
  cfg.validate();
  return run_unlabeled_sweep(load_labeled_csv(cfg.base.dataset, cfg.base.sensitive_col,
                                              cfg.base.label_col),
                             cfg);
}

}  // namespace eofair
