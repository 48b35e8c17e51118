#pragma once

// Synthetic laws with a known regression function.
//
// For each group s the latent U ~ Uniform[0, 1] maps to the feature
// x = location_s + scale_s * U, and eta(x, s) is a strictly increasing
// piecewise-linear function of U given by knots. Every quantity of the
// optimal fair rule then has a closed form or a one-dimensional integral.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eofair/calibration.hpp"
#include "eofair/data.hpp"
#include "eofair/estimators.hpp"

namespace eofair {

struct Knot {
  double u = 0.0;
  double eta = 0.0;
};

struct GroupLaw {
  double location = 0.0;
  double scale = 1.0;
  std::vector<Knot> knots;  // u from 0 to 1, eta strictly increasing
};

class SyntheticDistribution {
 public:
  /// Throws ValueError on an invalid law: pi_1 outside (0, 1), scale <= 0,
  /// knots not covering [0, 1], eta not strictly increasing or outside
  /// [0, 1], or no region with eta > 1/2.
  SyntheticDistribution(double pi_1, std::array<GroupLaw, 2> groups);

  /// eta(u, s) = a_s + b_s * u on the unit latent interval for both groups.
  static SyntheticDistribution linear(double pi_1, double a0, double b0, double a1,
                                      double b1, GroupLaw shape0 = {}, GroupLaw shape1 = {});

  double pi(int s) const noexcept { return s == 1 ? pi_1_ : 1.0 - pi_1_; }
  const GroupLaw& group(int s) const { return groups_[s]; }

  double latent(double x, int s) const;
  /// eta on the latent scale; u is clamped to [0, 1].
  double eta_latent(double u, int s) const;
  /// eta(x, s); outside the group support the nearest endpoint value is used.
  double eta(double x, int s) const;
  /// P(Y = 1 | X = x) under the mixture of the two groups. Throws ValueError
  /// when x lies outside both supports.
  double eta_marginal(double x) const;

  /// Smallest u in [0, 1] with eta(u, s) >= level (1 if none).
  double threshold_latent(double level, int s) const;
  /// Exact integral of eta(u, s) over [a, b] within [0, 1].
  double integral_eta(double a, double b, int s) const;

 private:
  double pi_1_;
  std::array<GroupLaw, 2> groups_;
};

/// Random valid law: 2 to 6 knots per group, random location and scale.
SyntheticDistribution random_distribution(std::uint64_t seed);

struct Moments {
  std::array<double, 2> mean_eta{};  // E[eta | S = s]
  std::array<double, 2> joint{};     // P(Y = 1, S = s)
  double p_y1 = 0.0;                 // P(Y = 1)
  std::size_t quadrature_points = 0;
};

inline constexpr std::size_t kQuadratureIntervals = std::size_t{1} << 17;

/// Composite Simpson with `intervals` subintervals (intervals + 1 points)
/// per group.
Moments exact_moments(const SyntheticDistribution& dist,
                      std::size_t intervals = kQuadratureIntervals);

/// Latent acceptance threshold of the optimal rule at shift theta: group s is
/// accepted iff u >= result[s].
std::array<double, 2> acceptance_thresholds(double theta, const SyntheticDistribution& dist,
                                            const Moments& m);

/// Exact TPR of each group under the shifted rule.
std::array<double, 2> exact_tpr(double theta, const SyntheticDistribution& dist,
                                const Moments& m);

/// TPR_1(theta) - TPR_0(theta); non-increasing in theta.
double tpr_gap(double theta, const SyntheticDistribution& dist, const Moments& m);
double tpr_gap(double theta, const SyntheticDistribution& dist);

struct OracleSolution {
  double theta_star = 0.0;
  std::array<double, 2> joint{};
  std::array<double, 2> mean_eta{};
  std::array<double, 2> thresholds{};  // latent acceptance thresholds of g*
  double tpr_common = 0.0;
  double gap_at_solution = 0.0;
  double risk_star = 0.0;
  std::size_t quadrature_points = 0;
  double bisection_tolerance = 0.0;
  double bracket_width = 0.0;
};

inline constexpr double kBisectionTolerance = 1e-8;

/// Bisection on tpr_gap over [-2, 2]. Throws NumericError when the gap has
/// the same sign at both ends.
OracleSolution solve_theta_star(const SyntheticDistribution& dist,
                                double tolerance = kBisectionTolerance);

/// Deterministic rule accepting group s iff u >= thresholds[s].
struct ThresholdRule {
  std::array<double, 2> thresholds{};
};

/// R(g) = E[eta] - E[(2 eta - 1) g].
double risk_identity(const SyntheticDistribution& dist, const ThresholdRule& rule,
                     const Moments& m);
/// P(g != Y) by quadrature of the two error regions.
double risk_direct(const SyntheticDistribution& dist, const ThresholdRule& rule,
                   std::size_t intervals = kQuadratureIntervals);

/// g*(x, s), by comparing the latent coordinate with the threshold.
int optimal_decision(const OracleSolution& sol, const SyntheticDistribution& dist,
                     double x, int s);

struct SyntheticSample {
  std::vector<double> x;
  std::vector<int> s;
  std::vector<int> y;
  std::vector<double> u;

  std::size_t size() const noexcept { return x.size(); }
  FeatureMatrix features() const { return FeatureMatrix::column(x); }
  /// Throws GroupCoverageError if a group is empty.
  LabeledDataset to_labeled() const;
  UnlabeledDataset to_unlabeled(bool with_sensitive = true) const;
};

/// n i.i.d. draws; identical for identical (dist, n, seed).
SyntheticSample sample(const SyntheticDistribution& dist, std::size_t n, std::uint64_t seed);

/// Exact eta(x, 0), eta(x, 1) and eta(x) per row.
ScoreTable exact_scores(const SyntheticDistribution& dist, std::span<const double> x);

enum class ScoreSource { kExact, kLogistic, kKnn };

struct ConsistencyConfig {
  std::vector<std::size_t> n_grid{1000};
  std::vector<std::size_t> N_grid{100, 1000, 10000};
  std::size_t repeats = 20;
  std::uint64_t seed = 0;
  ScoreSource source = ScoreSource::kExact;
  LogisticConfig logistic;
  KnnConfig knn{25};
  std::size_t test_size = 100000;

  void validate() const;
};

struct ConsistencyCell {
  std::size_t n = 0;
  std::size_t N = 0;
  std::size_t repeat = 0;
  double theta_hat = 0.0;
  double deo_test = 0.0;
  bool deo_undefined = false;
  double excess_risk = 0.0;
  double accuracy = 0.0;
};

struct ConsistencyRow {
  std::size_t n = 0;
  std::size_t N = 0;
  std::size_t repeats = 0;
  double deo_mean = 0.0, deo_std = 0.0, deo_se = 0.0;
  double excess_mean = 0.0, excess_std = 0.0, excess_se = 0.0;
  double theta_mean = 0.0, theta_std = 0.0;
  double accuracy_mean = 0.0;
  std::size_t deo_undefined = 0;
};

struct ConsistencyResult {
  OracleSolution oracle;
  std::vector<ConsistencyCell> cells;  // (n, N, repeat) order
  std::vector<ConsistencyRow> rows;    // (n, N) order
};

/// One cell: sample D_n and D_N, fit (unless scores are exact), calibrate,
/// and evaluate on a fresh test sample against exact eta. Excess risk is the
/// paired test-sample estimate E[eta(1 - g) + (1 - eta) g] minus the same
/// for g*.
ConsistencyCell consistency_cell(const SyntheticDistribution& dist,
                                 const OracleSolution& oracle,
                                 const ConsistencyConfig& cfg, std::size_t n,
                                 std::size_t N, std::size_t repeat);

/// All cells in parallel; output order is independent of scheduling.
ConsistencyResult consistency_run(const SyntheticDistribution& dist,
                                  const ConsistencyConfig& cfg);

}  // namespace eofair
