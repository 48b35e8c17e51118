#include "eofair/estimators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "eofair/error.hpp"
#include "eofair/kernels.hpp"

namespace eofair {

namespace {

double softplus(double z) noexcept {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Signed fraction in [-1, 1) derived from the row's bit pattern.
double row_hash_fraction(std::span<const double> x, int tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  };
  for (double v : x) mix(std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v));
  mix(static_cast<std::uint64_t>(tag));
  const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
  return 2.0 * unit - 1.0;
}

std::size_t regressor_dimension(const Regressor& r) {
  if (const auto* lr = std::get_if<LogisticParams>(&r)) return lr->weights.size();
  return std::get<KnnParams>(r).points.cols();
}

double raw_regressor_score(const Regressor& r, std::span<const double> x) {
  if (const auto* lr = std::get_if<LogisticParams>(&r)) {
    double z = lr->bias;
    for (std::size_t j = 0; j < lr->weights.size(); ++j) z += lr->weights[j] * x[j];
    return sigmoid(z);
  }
  const auto& knn = std::get<KnnParams>(r);
  std::vector<std::size_t> all(knn.points.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return kernels::knn_query(knn.points, all, knn.labels, x, knn.k);
}

std::vector<std::size_t> rows_of_group(const LabeledDataset& ds, int s) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.sensitive()[i] == s) rows.push_back(i);
  }
  return rows;
}

constexpr int kMarginalTag = 2;

}  // namespace

void LogisticConfig::validate() const {
  if (!(l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be >= 0");
  if (max_iters <= 0) throw ConfigError("max_iters must be positive");
  if (!(grad_tolerance > 0.0)) throw ConfigError("grad_tolerance must be > 0");
  if (!(initial_step > 0.0) || !(shrink > 0.0 && shrink < 1.0) ||
      !(armijo > 0.0 && armijo < 1.0)) {
    throw ConfigError("invalid line-search parameters");
  }
}

void KnnConfig::validate() const {
  if (k == 0) throw ConfigError("k must be positive");
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticFit fit_logistic_regression(const FeatureMatrix& features,
                                    std::span<const std::size_t> rows,
                                    std::span<const int> labels,
                                    const LogisticConfig& cfg) {
  cfg.validate();
  const std::size_t m = rows.size();
  const std::size_t d = features.cols();
  if (m == 0) throw SchemaError("logistic regression: no training rows");

  std::vector<double> mean(d, 0.0);
  std::vector<double> scale(d, 0.0);
  for (std::size_t i : rows) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += features(i, j);
  }
  for (auto& v : mean) v /= static_cast<double>(m);
  for (std::size_t i : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = features(i, j) - mean[j];
      scale[j] += c * c;
    }
  }
  for (auto& v : scale) {
    v = std::sqrt(v / static_cast<double>(m));
    if (!(v > 1e-12)) v = 1.0;
  }
  std::vector<double> z_features(m * d);
  std::vector<double> y(m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      z_features[r * d + j] = (features(rows[r], j) - mean[j]) / scale[j];
    }
    y[r] = labels[rows[r]] == 1 ? 1.0 : 0.0;
  }

  // theta = (w_0..w_{d-1}, b)
  const std::size_t p = d + 1;
  const double lambda = cfg.l2_lambda;

  auto objective = [&](const std::vector<double>& theta) {
    double loss = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      double z = theta[d];
      for (std::size_t j = 0; j < d; ++j) z += theta[j] * z_features[r * d + j];
      loss += softplus(z) - y[r] * z;
    }
    double reg = 0.0;
    for (double t : theta) reg += t * t;
    return loss / static_cast<double>(m) + 0.5 * lambda * reg;
  };
  auto gradient = [&](const std::vector<double>& theta) {
    std::vector<double> g(p, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      double z = theta[d];
      for (std::size_t j = 0; j < d; ++j) z += theta[j] * z_features[r * d + j];
      const double resid = sigmoid(z) - y[r];
      for (std::size_t j = 0; j < d; ++j) g[j] += resid * z_features[r * d + j];
      g[d] += resid;
    }
    for (std::size_t j = 0; j < p; ++j) {
      g[j] = g[j] / static_cast<double>(m) + lambda * theta[j];
    }
    return g;
  };
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };

  LogisticFit fit;
  std::vector<double> theta(p, 0.0);
  double loss = objective(theta);
  fit.loss_history.push_back(loss);
  double step = cfg.initial_step;
  std::vector<double> candidate(p);
  for (int it = 0; it < cfg.max_iters; ++it) {
    const std::vector<double> g = gradient(theta);
    const double gnorm = norm(g);
    fit.gradient_norm = gnorm;
    if (gnorm <= cfg.grad_tolerance) {
      fit.converged = true;
      break;
    }
    bool accepted = false;
    while (step > 1e-14) {
      for (std::size_t j = 0; j < p; ++j) candidate[j] = theta[j] - step * g[j];
      const double trial = objective(candidate);
      if (trial <= loss - cfg.armijo * step * gnorm * gnorm) {
        theta = candidate;
        loss = trial;
        accepted = true;
        break;
      }
      step *= cfg.shrink;
    }
    if (!accepted) break;
    fit.loss_history.push_back(loss);
    fit.iterations = it + 1;
    step = std::min(step * 2.0, 1e6);
  }
  if (!fit.converged) {
    const double gnorm = norm(gradient(theta));
    fit.gradient_norm = gnorm;
    fit.converged = gnorm <= cfg.grad_tolerance;
  }

  fit.params.weights.resize(d);
  fit.params.bias = theta[d];
  for (std::size_t j = 0; j < d; ++j) {
    fit.params.weights[j] = theta[j] / scale[j];
    fit.params.bias -= theta[j] * mean[j] / scale[j];
  }
  return fit;
}

double floor_level(std::size_t /*n*/, std::size_t N) {
  const double c = std::pow(static_cast<double>(std::max<std::size_t>(N, 1)), -0.25);
  return std::clamp(c, 1e-6, 0.49);
}

double apply_floor(double raw_score, std::size_t n, std::size_t N) {
  return std::max(raw_score, floor_level(n, N));
}

// ---------------------------------------------------------------------------
// ScoreModel

ScoreModel::ScoreModel(ScoreMode mode, std::array<Regressor, 2> per_group,
                       std::optional<Regressor> marginal, double floor,
                       double jitter_amplitude, bool converged)
    : mode_(mode),
      per_group_(std::move(per_group)),
      marginal_(std::move(marginal)),
      floor_(floor),
      jitter_(jitter_amplitude),
      converged_(converged) {
  if (!(floor_ > 0.0 && floor_ < 0.5)) throw ConfigError("score floor must lie in (0, 1/2)");
  if (!(jitter_ >= 0.0)) throw ConfigError("jitter amplitude must be >= 0");
  if (mode_ == ScoreMode::kBlind && !marginal_) {
    throw ConfigError("blind score model needs a marginal regressor");
  }
  dimension_ = regressor_dimension(per_group_[0]);
  if (regressor_dimension(per_group_[1]) != dimension_ ||
      (marginal_ && regressor_dimension(*marginal_) != dimension_)) {
    throw SchemaError("score model regressors disagree on feature dimension");
  }
}

ScoreModel ScoreModel::with_floor(double floor) const {
  return ScoreModel(mode_, per_group_, marginal_, floor, jitter_, converged_);
}

ScoreModel ScoreModel::with_jitter(double amplitude) const {
  return ScoreModel(mode_, per_group_, marginal_, floor_, amplitude, converged_);
}

double ScoreModel::finish(double raw, std::span<const double> x, int tag) const {
  double v = raw;
  if (jitter_ > 0.0) v += jitter_ * row_hash_fraction(x, tag);
  return std::min(1.0, std::max(v, floor_));
}

double ScoreModel::raw_score(std::span<const double> x, int s) const {
  if (x.size() != dimension_) throw SchemaError("feature row has wrong dimension");
  return raw_regressor_score(per_group_.at(static_cast<std::size_t>(s)), x);
}

double ScoreModel::score(std::span<const double> x, int s) const {
  return finish(raw_score(x, s), x, s);
}

double ScoreModel::raw_marginal_score(std::span<const double> x) const {
  if (!marginal_) throw ConfigError("score model has no marginal regressor");
  if (x.size() != dimension_) throw SchemaError("feature row has wrong dimension");
  return raw_regressor_score(*marginal_, x);
}

double ScoreModel::marginal_score(std::span<const double> x) const {
  return finish(raw_marginal_score(x), x, kMarginalTag);
}

std::vector<double> ScoreModel::batch(const Regressor& r, const FeatureMatrix& x) const {
  if (x.rows() > 0 && x.cols() != dimension_) {
    throw SchemaError("feature matrix has " + std::to_string(x.cols()) +
                      " columns, model expects " + std::to_string(dimension_));
  }
  if (const auto* knn = std::get_if<KnnParams>(&r)) {
    std::vector<std::size_t> all(knn->points.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return kernels::knn_positive_fraction(knn->points, all, knn->labels, x, knn->k);
  }
  const auto& lr = std::get<LogisticParams>(r);
  std::vector<double> out(x.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(x.rows()); ++i) {
    const auto row = x.row(static_cast<std::size_t>(i));
    double z = lr.bias;
    for (std::size_t j = 0; j < lr.weights.size(); ++j) z += lr.weights[j] * row[j];
    out[static_cast<std::size_t>(i)] = sigmoid(z);
  }
  return out;
}

std::vector<double> ScoreModel::score_rows(const FeatureMatrix& x,
                                           std::span<const int> sensitive) const {
  if (sensitive.size() != x.rows()) throw SchemaError("sensitive length mismatch");
  std::vector<double> out(x.rows());
  for (int s = 0; s < 2; ++s) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (sensitive[i] == s) rows.push_back(i);
    }
    if (rows.empty()) continue;
    const std::vector<double> raw = batch(per_group_[s], x.select_rows(rows));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out[rows[r]] = finish(raw[r], x.row(rows[r]), s);
    }
  }
  return out;
}

std::vector<double> ScoreModel::score_rows_as_group(const FeatureMatrix& x, int s) const {
  std::vector<double> out = batch(per_group_.at(static_cast<std::size_t>(s)), x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = finish(out[i], x.row(i), s);
  return out;
}

std::vector<double> ScoreModel::marginal_scores(const FeatureMatrix& x) const {
  if (!marginal_) throw ConfigError("score model has no marginal regressor");
  std::vector<double> out = batch(*marginal_, x);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = finish(out[i], x.row(i), kMarginalTag);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

ScoreModel fit_logistic(const LabeledDataset& train, const LogisticConfig& cfg,
                        ScoreMode mode) {
  bool converged = true;
  std::array<Regressor, 2> per_group;
  for (int s = 0; s < 2; ++s) {
    const auto rows = rows_of_group(train, s);
    LogisticFit fit = fit_logistic_regression(train.features(), rows, train.labels(), cfg);
    converged = converged && fit.converged;
    per_group[s] = std::move(fit.params);
  }
  std::optional<Regressor> marginal;
  if (mode == ScoreMode::kBlind) {
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    LogisticFit fit = fit_logistic_regression(train.features(), all, train.labels(), cfg);
    converged = converged && fit.converged;
    marginal = std::move(fit.params);
  }
  return ScoreModel(mode, std::move(per_group), std::move(marginal),
                    floor_level(train.size(), train.size()), 0.0, converged);
}

ScoreModel fit_knn(const LabeledDataset& train, const KnnConfig& cfg, ScoreMode mode) {
  cfg.validate();
  std::array<Regressor, 2> per_group;
  for (int s = 0; s < 2; ++s) {
    const auto rows = rows_of_group(train, s);
    if (cfg.k > rows.size()) {
      throw ConfigError("k-NN: k=" + std::to_string(cfg.k) + " exceeds group " +
                        std::to_string(s) + " size " + std::to_string(rows.size()));
    }
    KnnParams p;
    p.k = cfg.k;
    p.points = train.features().select_rows(rows);
    for (std::size_t i : rows) p.labels.push_back(train.labels()[i]);
    per_group[s] = std::move(p);
  }
  std::optional<Regressor> marginal;
  if (mode == ScoreMode::kBlind) {
    marginal = KnnParams{cfg.k, train.features(), train.labels()};
  }
  return ScoreModel(mode, std::move(per_group), std::move(marginal),
                    floor_level(train.size(), train.size()), 0.0, true);
}

ScoreModel fit_estimator(const LabeledDataset& train, const EstimatorConfig& cfg,
                         ScoreMode mode) {
  if (const auto* lr = std::get_if<LogisticConfig>(&cfg)) return fit_logistic(train, *lr, mode);
  return fit_knn(train, std::get<KnnConfig>(cfg), mode);
}

// ---------------------------------------------------------------------------
// Score files

std::vector<double> ScoreTable::own_group(std::span<const int> sensitive) const {
  if (sensitive.size() != size()) throw SchemaError("score table / sensitive length mismatch");
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = sensitive[i] == 1 ? s1[i] : s0[i];
  return out;
}

ScoreTable ScoreTable::floored(double floor) const {
  ScoreTable out = *this;
  auto lift = [floor](std::vector<double>& v) {
    for (auto& x : v) x = std::max(x, floor);
  };
  lift(out.s0);
  lift(out.s1);
  if (out.marginal) lift(*out.marginal);
  return out;
}

ScoreTable read_score_file(const std::filesystem::path& path) {
  const NumericTable t = read_numeric_csv(path);
  const auto c0 = t.find("score_s0");
  const auto c1 = t.find("score_s1");
  if (!c0 || !c1) {
    throw SchemaError("score file '" + path.string() + "' needs columns score_s0, score_s1");
  }
  ScoreTable out;
  out.s0 = t.columns[*c0];
  out.s1 = t.columns[*c1];
  if (const auto cm = t.find("score_marginal")) out.marginal = t.columns[*cm];
  auto check = [](const std::vector<double>& v, const char* name) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 0.0 || v[i] > 1.0) {
        throw ValueError(std::string(name) + " outside [0,1] at row " + std::to_string(i + 1));
      }
    }
  };
  check(out.s0, "score_s0");
  check(out.s1, "score_s1");
  if (out.marginal) check(*out.marginal, "score_marginal");
  return out;
}

void write_score_file(const ScoreTable& scores, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path.string() + "'");
  out << std::setprecision(17) << "score_s0,score_s1";
  if (scores.marginal) out << ",score_marginal";
  out << '\n';
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << scores.s0[i] << ',' << scores.s1[i];
    if (scores.marginal) out << ',' << (*scores.marginal)[i];
    out << '\n';
  }
}

ScoreTable score_table(const ScoreModel& model, const FeatureMatrix& x) {
  ScoreTable t;
  t.s0 = model.score_rows_as_group(x, 0);
  t.s1 = model.score_rows_as_group(x, 1);
  if (model.marginal_regressor()) t.marginal = model.marginal_scores(x);
  return t;
}

}  // namespace eofair
