#include "eofair/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eofair/error.hpp"
#include "eofair/kernels.hpp"
#include "eofair/metrics.hpp"
#include "eofair/random.hpp"

namespace eofair {

namespace {

void validate_group(const GroupLaw& g, int s) {
  const std::string where = "group " + std::to_string(s) + ": ";
  if (!(g.scale > 0.0) || !std::isfinite(g.scale) || !std::isfinite(g.location)) {
    throw ValueError(where + "scale must be positive and finite");
  }
  if (g.knots.size() < 2) throw ValueError(where + "need at least two knots");
  if (g.knots.front().u != 0.0 || g.knots.back().u != 1.0) {
    throw ValueError(where + "knots must start at u=0 and end at u=1");
  }
  for (std::size_t k = 0; k < g.knots.size(); ++k) {
    const Knot& kn = g.knots[k];
    if (!(kn.eta >= 0.0 && kn.eta <= 1.0)) throw ValueError(where + "eta outside [0, 1]");
    if (k > 0) {
      if (!(kn.u > g.knots[k - 1].u)) throw ValueError(where + "knot u not increasing");
      if (!(kn.eta > g.knots[k - 1].eta)) {
        throw ValueError(where + "eta must be strictly increasing");
      }
    }
  }
  if (!(g.knots.back().eta > 0.5)) {
    throw ValueError(where + "eta never exceeds 1/2 (no positive-decision region)");
  }
}

double mean(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// SyntheticDistribution

SyntheticDistribution::SyntheticDistribution(double pi_1, std::array<GroupLaw, 2> groups)
    : pi_1_(pi_1), groups_(std::move(groups)) {
  if (!(pi_1 > 0.0 && pi_1 < 1.0)) throw ValueError("pi_1 must lie in (0, 1)");
  validate_group(groups_[0], 0);
  validate_group(groups_[1], 1);
}

SyntheticDistribution SyntheticDistribution::linear(double pi_1, double a0, double b0,
                                                    double a1, double b1, GroupLaw shape0,
                                                    GroupLaw shape1) {
  shape0.knots = {{0.0, a0}, {1.0, a0 + b0}};
  shape1.knots = {{0.0, a1}, {1.0, a1 + b1}};
  return SyntheticDistribution(pi_1, {std::move(shape0), std::move(shape1)});
}

double SyntheticDistribution::latent(double x, int s) const {
  const GroupLaw& g = groups_[s];
  return (x - g.location) / g.scale;
}

double SyntheticDistribution::eta_latent(double u, int s) const {
  const auto& k = groups_[s].knots;
  if (!(u > 0.0)) return k.front().eta;
  if (u >= 1.0) return k.back().eta;
  const auto it = std::upper_bound(k.begin(), k.end(), u,
                                   [](double v, const Knot& kn) { return v < kn.u; });
  const Knot& b = *it;
  const Knot& a = *(it - 1);
  return a.eta + (b.eta - a.eta) * (u - a.u) / (b.u - a.u);
}

double SyntheticDistribution::eta(double x, int s) const {
  return eta_latent(latent(x, s), s);
}

double SyntheticDistribution::eta_marginal(double x) const {
  double num = 0.0;
  double den = 0.0;
  for (int s = 0; s < 2; ++s) {
    const double u = latent(x, s);
    if (u < 0.0 || u > 1.0) continue;
    const double w = pi(s) / groups_[s].scale;
    num += w * eta_latent(u, s);
    den += w;
  }
  if (den == 0.0) throw ValueError("x = " + std::to_string(x) + " lies outside both supports");
  return num / den;
}

double SyntheticDistribution::threshold_latent(double level, int s) const {
  const auto& k = groups_[s].knots;
  if (k.front().eta >= level) return 0.0;
  if (k.back().eta < level) return 1.0;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) {
    const Knot& a = k[i];
    const Knot& b = k[i + 1];
    if (b.eta >= level) {
      const double u = a.u + (level - a.eta) / (b.eta - a.eta) * (b.u - a.u);
      return std::clamp(u, a.u, b.u);
    }
  }
  return 1.0;
}

double SyntheticDistribution::integral_eta(double a, double b, int s) const {
  a = std::clamp(a, 0.0, 1.0);
  b = std::clamp(b, 0.0, 1.0);
  if (!(b > a)) return 0.0;
  const auto& k = groups_[s].knots;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < k.size(); ++i) {
    const double lo = std::max(a, k[i].u);
    const double hi = std::min(b, k[i + 1].u);
    if (hi <= lo) continue;
    total += 0.5 * (hi - lo) * (eta_latent(lo, s) + eta_latent(hi, s));
  }
  return total;
}

SyntheticDistribution random_distribution(std::uint64_t seed) {
  auto rng = make_rng({seed, 0xd157ULL});
  const double pi_1 = 0.15 + 0.7 * uniform01(rng);
  std::array<GroupLaw, 2> groups;
  for (auto& g : groups) {
    g.location = -2.0 + 4.0 * uniform01(rng);
    g.scale = 0.2 + 3.0 * uniform01(rng);
    const std::size_t n_knots = 2 + static_cast<std::size_t>(uniform01(rng) * 5.0);
    std::vector<double> us{0.0, 1.0};
    for (std::size_t k = 2; k < n_knots; ++k) us.push_back(0.02 + 0.96 * uniform01(rng));
    std::sort(us.begin(), us.end());
    us.erase(std::unique(us.begin(), us.end()), us.end());
    const double top = 0.55 + 0.44 * uniform01(rng);
    const double bottom = 0.01 + (top - 0.02) * uniform01(rng);
    std::vector<double> etas;
    for (std::size_t k = 0; k < us.size(); ++k) etas.push_back(uniform01(rng));
    std::sort(etas.begin(), etas.end());
    g.knots.clear();
    for (std::size_t k = 0; k < us.size(); ++k) {
      // Strictly increasing between bottom and top.
      const double frac = (static_cast<double>(k) + etas[k]) / static_cast<double>(us.size());
      double eta = bottom + (top - bottom) * frac;
      if (k == 0) eta = bottom;
      if (k + 1 == us.size()) eta = top;
      g.knots.push_back({us[k], eta});
    }
  }
  return SyntheticDistribution(pi_1, std::move(groups));
}

// ---------------------------------------------------------------------------
// Moments and the optimal rule

Moments exact_moments(const SyntheticDistribution& dist, std::size_t intervals) {
  Moments m;
  m.quadrature_points = intervals + 1;
  for (int s = 0; s < 2; ++s) {
    m.mean_eta[s] =
        kernels::simpson([&](double u) { return dist.eta_latent(u, s); }, 0.0, 1.0, intervals);
    m.joint[s] = m.mean_eta[s] * dist.pi(s);
  }
  m.p_y1 = m.joint[0] + m.joint[1];
  return m;
}

std::array<double, 2> acceptance_thresholds(double theta, const SyntheticDistribution& dist,
                                            const Moments& m) {
  const std::array<double, 2> factor{2.0 + theta / m.joint[0], 2.0 - theta / m.joint[1]};
  std::array<double, 2> t{};
  for (int s = 0; s < 2; ++s) {
    t[s] = factor[s] > 0.0 ? dist.threshold_latent(1.0 / factor[s], s) : 1.0;
  }
  return t;
}

std::array<double, 2> exact_tpr(double theta, const SyntheticDistribution& dist,
                                const Moments& m) {
  const auto t = acceptance_thresholds(theta, dist, m);
  std::array<double, 2> tpr{};
  for (int s = 0; s < 2; ++s) tpr[s] = dist.integral_eta(t[s], 1.0, s) / m.mean_eta[s];
  return tpr;
}

double tpr_gap(double theta, const SyntheticDistribution& dist, const Moments& m) {
  const auto tpr = exact_tpr(theta, dist, m);
  return tpr[1] - tpr[0];
}

double tpr_gap(double theta, const SyntheticDistribution& dist) {
  return tpr_gap(theta, dist, exact_moments(dist));
}

OracleSolution solve_theta_star(const SyntheticDistribution& dist, double tolerance) {
  if (!(tolerance > 0.0)) throw NumericError("bisection tolerance must be positive");
  const Moments m = exact_moments(dist);
  double lo = -2.0;
  double hi = 2.0;
  const double g_lo = tpr_gap(lo, dist, m);
  const double g_hi = tpr_gap(hi, dist, m);
  if (g_lo < 0.0 || g_hi > 0.0) {
    throw NumericError("tpr_gap does not change sign on [-2, 2] (gap(-2) = " +
                       std::to_string(g_lo) + ", gap(2) = " + std::to_string(g_hi) + ")");
  }
  while (hi - lo > tolerance) {
    const double mid = lo + 0.5 * (hi - lo);
    const double g = tpr_gap(mid, dist, m);
    if (g > 0.0) {
      lo = mid;
    } else if (g < 0.0) {
      hi = mid;
    } else {
      lo = hi = mid;
    }
  }
  OracleSolution sol;
  sol.theta_star = lo + 0.5 * (hi - lo);
  sol.bracket_width = hi - lo;
  sol.bisection_tolerance = tolerance;
  sol.joint = m.joint;
  sol.mean_eta = m.mean_eta;
  sol.quadrature_points = m.quadrature_points;
  sol.thresholds = acceptance_thresholds(sol.theta_star, dist, m);
  const auto tpr = exact_tpr(sol.theta_star, dist, m);
  sol.tpr_common = 0.5 * (tpr[0] + tpr[1]);
  sol.gap_at_solution = tpr[1] - tpr[0];
  sol.risk_star = risk_identity(dist, ThresholdRule{sol.thresholds}, m);
  return sol;
}

double risk_identity(const SyntheticDistribution& dist, const ThresholdRule& rule,
                     const Moments& m) {
  double risk = 0.0;
  for (int s = 0; s < 2; ++s) {
    const double t = std::clamp(rule.thresholds[s], 0.0, 1.0);
    const double accepted = 2.0 * dist.integral_eta(t, 1.0, s) - (1.0 - t);
    risk += dist.pi(s) * (m.mean_eta[s] - accepted);
  }
  return risk;
}

double risk_direct(const SyntheticDistribution& dist, const ThresholdRule& rule,
                   std::size_t intervals) {
  double risk = 0.0;
  for (int s = 0; s < 2; ++s) {
    const double t = std::clamp(rule.thresholds[s], 0.0, 1.0);
    double err = 0.0;
    if (t > 0.0) {
      err += kernels::simpson([&](double u) { return dist.eta_latent(u, s); }, 0.0, t,
                              intervals);
    }
    if (t < 1.0) {
      err += kernels::simpson([&](double u) { return 1.0 - dist.eta_latent(u, s); }, t, 1.0,
                              intervals);
    }
    risk += dist.pi(s) * err;
  }
  return risk;
}

int optimal_decision(const OracleSolution& sol, const SyntheticDistribution& dist, double x,
                     int s) {
  return dist.latent(x, s) >= sol.thresholds[s] ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Sampling

LabeledDataset SyntheticSample::to_labeled() const {
  return LabeledDataset(features(), s, y, {"x"});
}

UnlabeledDataset SyntheticSample::to_unlabeled(bool with_sensitive) const {
  std::optional<std::vector<int>> sens;
  if (with_sensitive) sens = s;
  return UnlabeledDataset(features(), std::move(sens), {"x"});
}

SyntheticSample sample(const SyntheticDistribution& dist, std::size_t n, std::uint64_t seed) {
  auto rng = make_rng({seed, n, 0x5a3b1eULL});
  SyntheticSample out;
  out.x.reserve(n);
  out.s.reserve(n);
  out.y.reserve(n);
  out.u.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int s = uniform01(rng) < dist.pi(1) ? 1 : 0;
    const double u = uniform01(rng);
    const int y = uniform01(rng) < dist.eta_latent(u, s) ? 1 : 0;
    const GroupLaw& g = dist.group(s);
    out.x.push_back(g.location + g.scale * u);
    out.s.push_back(s);
    out.y.push_back(y);
    out.u.push_back(u);
  }
  return out;
}

ScoreTable exact_scores(const SyntheticDistribution& dist, std::span<const double> x) {
  ScoreTable t;
  t.s0.reserve(x.size());
  t.s1.reserve(x.size());
  std::vector<double> marginal;
  marginal.reserve(x.size());
  for (double v : x) {
    t.s0.push_back(dist.eta(v, 0));
    t.s1.push_back(dist.eta(v, 1));
    marginal.push_back(dist.eta_marginal(v));
  }
  t.marginal = std::move(marginal);
  return t;
}

// ---------------------------------------------------------------------------
// Consistency experiment

void ConsistencyConfig::validate() const {
  if (n_grid.empty() || N_grid.empty()) throw ConfigError("consistency: empty n or N grid");
  if (repeats == 0) throw ConfigError("consistency: repeats must be positive");
  if (test_size == 0) throw ConfigError("consistency: test_size must be positive");
  for (std::size_t v : n_grid) {
    if (v == 0) throw ConfigError("consistency: n must be positive");
  }
  for (std::size_t v : N_grid) {
    if (v == 0) throw ConfigError("consistency: N must be positive");
  }
  logistic.validate();
  knn.validate();
}

ConsistencyCell consistency_cell(const SyntheticDistribution& dist,
                                 const OracleSolution& oracle,
                                 const ConsistencyConfig& cfg, std::size_t n,
                                 std::size_t N, std::size_t repeat) {
  auto seeds = make_rng({cfg.seed, n, N, repeat});
  const std::uint64_t seed_train = seeds();
  const std::uint64_t seed_unlabeled = seeds();
  const std::uint64_t seed_test = seeds();

  const SyntheticSample unlabeled = sample(dist, N, seed_unlabeled);
  const SyntheticSample test = sample(dist, cfg.test_size, seed_test);

  std::vector<int> pred;
  double theta = 0.0;
  if (cfg.source == ScoreSource::kExact) {
    const FairClassifier clf = calibrate_scores(exact_scores(dist, unlabeled.x), unlabeled.s,
                                                ScoreMode::kGroupAware);
    theta = clf.theta_hat();
    pred = clf.predict_scores(exact_scores(dist, test.x), test.s);
  } else {
    const LabeledDataset train = sample(dist, n, seed_train).to_labeled();
    const EstimatorConfig est = cfg.source == ScoreSource::kLogistic
                                    ? EstimatorConfig{cfg.logistic}
                                    : EstimatorConfig{cfg.knn};
    const ScoreModel model = fit_estimator(train, est, ScoreMode::kGroupAware);
    const FairClassifier clf = calibrate_model(model, n, unlabeled.to_unlabeled());
    theta = clf.theta_hat();
    pred = clf.predict_rows(test.features(), test.s);
  }

  double excess = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int s = test.s[i];
    const double eta = dist.eta_latent(test.u[i], s);
    const int g_star = test.u[i] >= oracle.thresholds[s] ? 1 : 0;
    const double loss = pred[i] == 1 ? 1.0 - eta : eta;
    const double loss_star = g_star == 1 ? 1.0 - eta : eta;
    excess += loss - loss_star;
  }
  const EvaluationReport report = evaluate(pred, test.y, test.s);

  ConsistencyCell cell;
  cell.n = n;
  cell.N = N;
  cell.repeat = repeat;
  cell.theta_hat = theta;
  cell.deo_test = report.deo_or_zero();
  cell.deo_undefined = report.deo_undefined();
  cell.excess_risk = excess / static_cast<double>(test.size());
  cell.accuracy = report.accuracy;
  return cell;
}

ConsistencyResult consistency_run(const SyntheticDistribution& dist,
                                  const ConsistencyConfig& cfg) {
  cfg.validate();
  ConsistencyResult result;
  result.oracle = solve_theta_star(dist);

  const std::size_t per_n = cfg.N_grid.size() * cfg.repeats;
  const std::size_t total = cfg.n_grid.size() * per_n;
  result.cells.resize(total);
  kernels::parallel_for(total, [&](std::size_t idx) {
    const std::size_t i = idx / per_n;
    const std::size_t j = (idx % per_n) / cfg.repeats;
    const std::size_t r = idx % cfg.repeats;
    result.cells[idx] = consistency_cell(dist, result.oracle, cfg, cfg.n_grid[i],
                                         cfg.N_grid[j], r);
  });

  for (std::size_t start = 0; start < total; start += cfg.repeats) {
    std::vector<double> deo, excess, theta, acc;
    ConsistencyRow row;
    row.n = result.cells[start].n;
    row.N = result.cells[start].N;
    row.repeats = cfg.repeats;
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      const ConsistencyCell& c = result.cells[start + r];
      deo.push_back(c.deo_test);
      excess.push_back(c.excess_risk);
      theta.push_back(c.theta_hat);
      acc.push_back(c.accuracy);
      row.deo_undefined += c.deo_undefined;
    }
    const double root = std::sqrt(static_cast<double>(cfg.repeats));
    row.deo_mean = mean(deo);
    row.deo_std = sample_std(deo);
    row.deo_se = row.deo_std / root;
    row.excess_mean = mean(excess);
    row.excess_std = sample_std(excess);
    row.excess_se = row.excess_std / root;
    row.theta_mean = mean(theta);
    row.theta_std = sample_std(theta);
    row.accuracy_mean = mean(acc);
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace eofair
