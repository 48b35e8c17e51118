#include "eofair/calibration.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "eofair/error.hpp"

namespace eofair {

namespace {

using kernels::ExactSum;

// Doubles mapped onto int64 so that integer order equals numeric order.
std::int64_t ordered_bits(double x) noexcept {
  const auto bits = std::bit_cast<std::int64_t>(x == 0.0 ? 0.0 : x);
  return bits >= 0 ? bits : std::numeric_limits<std::int64_t>::min() - bits;
}

double from_ordered_bits(std::int64_t k) noexcept {
  const std::int64_t bits = k >= 0 ? k : std::numeric_limits<std::int64_t>::min() - k;
  return std::bit_cast<double>(bits);
}

// Largest finite double t with pred(t) for a predicate that is true up to a
// point and false afterwards. `guess` is an algebraic estimate of the switch.
template <class Pred>
double last_true(Pred pred, double guess, double scale) {
  constexpr double kMax = std::numeric_limits<double>::max();
  if (!std::isfinite(guess)) guess = 0.0;
  // Fast path: the estimate is usually within a few ulps.
  double t = guess;
  if (pred(t)) {
    for (int i = 0; i < 4; ++i) {
      const double up = std::nextafter(t, kMax);
      if (!pred(up)) return t;
      t = up;
    }
  } else {
    for (int i = 0; i < 4; ++i) {
      t = std::nextafter(t, -kMax);
      if (pred(t)) return t;
    }
  }
  // Bracket by expanding steps, then bisect over the ordered bit patterns.
  double lo = guess;
  double hi = guess;
  double step = std::max(std::fabs(guess), scale) * 1e-12 + 1e-300;
  while (!pred(lo)) {
    lo = (lo - step < -kMax) ? -kMax : lo - step;
    step *= 2.0;
    if (lo == -kMax && !pred(lo)) throw NumericError("switch point search failed");
  }
  step = std::max(std::fabs(guess), scale) * 1e-12 + 1e-300;
  while (pred(hi)) {
    if (hi == kMax) return kMax;
    hi = (hi + step > kMax) ? kMax : hi + step;
    step *= 2.0;
  }
  std::int64_t a = ordered_bits(lo);  // pred true
  std::int64_t b = ordered_bits(hi);  // pred false
  while (b - a > 1) {
    const std::int64_t mid = a + (b - a) / 2;
    if (pred(from_ordered_bits(mid))) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return from_ordered_bits(a);
}

// Smallest finite double t with pred(t) for a predicate that is false up to a
// point and true afterwards.
template <class Pred>
double first_true(Pred pred, double guess, double scale) {
  const double last_false = last_true([&](double t) { return !pred(t); }, guess, scale);
  return std::nextafter(last_false, std::numeric_limits<double>::infinity());
}

void check_scores(std::span<const double> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] > 0.0 && scores[i] <= 1.0)) {
      throw ValueError("score " + std::to_string(scores[i]) + " at row " +
                       std::to_string(i) + " is outside (0, 1]; scores must be floored");
    }
  }
}

struct Candidate {
  double theta;
  double value;
};

template <class Objective>
ThetaFit pick_best(const std::vector<double>& thetas, Objective objective) {
  ThetaFit best;
  bool have = false;
  for (double t : thetas) {
    const double v = objective(t);
    if (!have || better_candidate(v, t, best.unfairness, best.theta)) {
      best.theta = t;
      best.unfairness = v;
      have = true;
    }
  }
  best.candidates = thetas.size();
  return best;
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Statistics

GroupScores GroupScores::split(std::span<const double> scores,
                               std::span<const int> sensitive) {
  if (scores.size() != sensitive.size()) throw SchemaError("scores/sensitive length mismatch");
  GroupScores out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (sensitive[i] == 1 ? out.group1 : out.group0).push_back(scores[i]);
  }
  return out;
}

GroupStatistics group_statistics(const GroupScores& scores) {
  for (int s = 0; s < 2; ++s) {
    if (scores.of(s).empty()) {
      throw GroupCoverageError("no unlabeled rows in sensitive group " + std::to_string(s));
    }
    check_scores(scores.of(s));
  }
  GroupStatistics st;
  const std::size_t n = scores.group0.size() + scores.group1.size();
  for (int s = 0; s < 2; ++s) {
    const auto& g = scores.of(s);
    st.count[s] = g.size();
    st.p[s] = static_cast<double>(g.size()) / static_cast<double>(n);
    st.mean_score[s] = kernels::exact_sum(g).value() / static_cast<double>(g.size());
    st.joint[s] = st.mean_score[s] * st.p[s];
  }
  return st;
}

GroupStatistics group_statistics(std::span<const double> scores,
                                 std::span<const int> sensitive) {
  return group_statistics(GroupScores::split(scores, sensitive));
}

// ---------------------------------------------------------------------------
// Indicators and switch points

bool accepts_group1(double score, double theta, double joint1) noexcept {
  return 1.0 <= score * (2.0 - theta / joint1);
}

bool accepts_group0(double score, double theta, double joint0) noexcept {
  return 1.0 <= score * (2.0 + theta / joint0);
}

bool accepts(int s, double score, double theta, const GroupStatistics& stats) noexcept {
  return s == 1 ? accepts_group1(score, theta, stats.joint[1])
                : accepts_group0(score, theta, stats.joint[0]);
}

double group1_switch_point(double score, double joint1) {
  return last_true([&](double t) { return accepts_group1(score, t, joint1); },
                   joint1 * (2.0 - 1.0 / score), joint1);
}

double group0_switch_point(double score, double joint0) {
  return first_true([&](double t) { return accepts_group0(score, t, joint0); },
                    joint0 * (1.0 / score - 2.0), joint0);
}

std::array<double, 2> weighted_tpr(double theta, const GroupScores& scores,
                                   const GroupStatistics& stats) {
  std::array<double, 2> tpr{};
  for (int s = 0; s < 2; ++s) {
    ExactSum active;
    ExactSum total;
    for (double v : scores.of(s)) {
      total.add(v);
      if (accepts(s, v, theta, stats)) active.add(v);
    }
    tpr[s] = active.value() / total.value();
  }
  return tpr;
}

double empirical_unfairness(double theta, const GroupScores& scores,
                            const GroupStatistics& stats) {
  const auto tpr = weighted_tpr(theta, scores, stats);
  return std::fabs(tpr[1] - tpr[0]);
}

std::vector<Breakpoint> breakpoints(const GroupScores& scores,
                                    const GroupStatistics& stats, double lo, double hi) {
  std::vector<Breakpoint> out;
  for (int s = 0; s < 2; ++s) {
    const auto& g = scores.of(s);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double t = s == 1 ? group1_switch_point(g[i], stats.joint[1])
                              : group0_switch_point(g[i], stats.joint[0]);
      if (t >= lo && t <= hi) out.push_back({t, s, i});
    }
  }
  std::sort(out.begin(), out.end(), [](const Breakpoint& a, const Breakpoint& b) {
    if (a.theta != b.theta) return a.theta < b.theta;
    if (a.group != b.group) return a.group < b.group;
    return a.row < b.row;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const Breakpoint& a, const Breakpoint& b) {
                          return a.theta == b.theta && a.group == b.group;
                        }),
            out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Profile

UnfairnessProfile::UnfairnessProfile(const GroupScores& scores,
                                     const GroupStatistics& stats) {
  auto sorted_by_switch = [](const std::vector<double>& g, auto switch_of) {
    std::vector<std::pair<double, double>> rows;  // (switch, score)
    rows.reserve(g.size());
    for (double v : g) rows.emplace_back(switch_of(v), v);
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  const auto g1 = sorted_by_switch(
      scores.group1, [&](double v) { return group1_switch_point(v, stats.joint[1]); });
  const auto g0 = sorted_by_switch(
      scores.group0, [&](double v) { return group0_switch_point(v, stats.joint[0]); });

  switch1_.resize(g1.size());
  suffix1_.assign(g1.size() + 1, ExactSum{});
  for (std::size_t i = g1.size(); i-- > 0;) {
    switch1_[i] = g1[i].first;
    suffix1_[i] = suffix1_[i + 1];
    suffix1_[i].add(g1[i].second);
  }
  total1_ = suffix1_.front();

  switch0_.resize(g0.size());
  prefix0_.assign(g0.size() + 1, ExactSum{});
  for (std::size_t i = 0; i < g0.size(); ++i) {
    switch0_[i] = g0[i].first;
    prefix0_[i + 1] = prefix0_[i];
    prefix0_[i + 1].add(g0[i].second);
  }
  total0_ = prefix0_.back();
}

std::array<double, 2> UnfairnessProfile::tpr(double theta) const {
  const auto first1 = static_cast<std::size_t>(
      std::lower_bound(switch1_.begin(), switch1_.end(), theta) - switch1_.begin());
  const auto count0 = static_cast<std::size_t>(
      std::upper_bound(switch0_.begin(), switch0_.end(), theta) - switch0_.begin());
  return {prefix0_[count0].value() / total0_.value(),
          suffix1_[first1].value() / total1_.value()};
}

double UnfairnessProfile::operator()(double theta) const {
  const auto t = tpr(theta);
  return std::fabs(t[1] - t[0]);
}

bool better_candidate(double value, double theta, double best_value,
                      double best_theta) noexcept {
  if (value != best_value) return value < best_value;
  if (std::fabs(theta) != std::fabs(best_theta)) return std::fabs(theta) < std::fabs(best_theta);
  return theta < best_theta;
}

ThetaFit fit_theta(const GroupScores& scores, const GroupStatistics& stats) {
  const UnfairnessProfile profile(scores, stats);
  std::vector<double> points;
  for (const auto& bp : breakpoints(scores, stats)) points.push_back(bp.theta);
  points = sorted_unique(std::move(points));

  std::vector<double> candidates = points;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    candidates.push_back(points[i] + 0.5 * (points[i + 1] - points[i]));
  }
  candidates.push_back(-2.0);
  candidates.push_back(0.0);
  candidates.push_back(2.0);
  return pick_best(sorted_unique(std::move(candidates)), profile);
}

// ---------------------------------------------------------------------------
// Blind mode

void BlindScores::validate() const {
  if (marginal.empty()) throw GroupCoverageError("blind calibration: empty unlabeled sample");
  if (group0.size() != marginal.size() || group1.size() != marginal.size()) {
    throw SchemaError("blind scores: column lengths differ");
  }
  check_scores(marginal);
  check_scores(group0);
  check_scores(group1);
}

BlindDirection BlindDirection::from(const BlindScores& scores) {
  const double n = static_cast<double>(scores.size());
  return {kernels::exact_sum(scores.group0).value() / n,
          kernels::exact_sum(scores.group1).value() / n};
}

bool blind_accepts(double marginal, double direction, double theta) noexcept {
  return 1.0 <= 2.0 * marginal + theta * direction;
}

double blind_switch_point(double marginal, double direction) {
  if (direction == 0.0) throw NumericError("blind switch point: zero direction");
  const double guess = (1.0 - 2.0 * marginal) / direction;
  auto pred = [marginal, direction](double t) { return blind_accepts(marginal, direction, t); };
  return direction > 0.0 ? first_true(pred, guess, 1.0) : last_true(pred, guess, 1.0);
}

double blind_unfairness(double theta, const BlindScores& scores,
                        const BlindDirection& direction) {
  ExactSum a0, a1, t0, t1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    t0.add(scores.group0[i]);
    t1.add(scores.group1[i]);
    const double d = direction.at(scores.group0[i], scores.group1[i]);
    if (blind_accepts(scores.marginal[i], d, theta)) {
      a0.add(scores.group0[i]);
      a1.add(scores.group1[i]);
    }
  }
  return std::fabs(a1.value() / t1.value() - a0.value() / t0.value());
}

namespace {

// Rows with a positive direction switch on at their point; rows with a
// negative direction switch off after it.
class BlindProfile {
 public:
  BlindProfile(const BlindScores& scores, const BlindDirection& dir) {
    struct Row {
      double t;
      double s0;
      double s1;
    };
    std::vector<Row> rising;
    std::vector<Row> falling;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double m = scores.marginal[i];
      const double s0 = scores.group0[i];
      const double s1 = scores.group1[i];
      t0_.add(s0);
      t1_.add(s1);
      const double d = dir.at(s0, s1);
      const double guess = (1.0 - 2.0 * m) / d;
      if (d == 0.0 || !std::isfinite(guess)) {
        if (blind_accepts(m, d, 0.0)) {
          const0_.add(s0);
          const1_.add(s1);
        }
        continue;
      }
      (d > 0.0 ? rising : falling).push_back({blind_switch_point(m, d), s0, s1});
    }
    auto by_t = [](const Row& a, const Row& b) { return a.t < b.t; };
    std::sort(rising.begin(), rising.end(), by_t);
    std::sort(falling.begin(), falling.end(), by_t);

    rise_t_.resize(rising.size());
    rise0_.assign(rising.size() + 1, ExactSum{});
    rise1_.assign(rising.size() + 1, ExactSum{});
    for (std::size_t i = 0; i < rising.size(); ++i) {
      rise_t_[i] = rising[i].t;
      rise0_[i + 1] = rise0_[i];
      rise0_[i + 1].add(rising[i].s0);
      rise1_[i + 1] = rise1_[i];
      rise1_[i + 1].add(rising[i].s1);
    }
    fall_t_.resize(falling.size());
    fall0_.assign(falling.size() + 1, ExactSum{});
    fall1_.assign(falling.size() + 1, ExactSum{});
    for (std::size_t i = falling.size(); i-- > 0;) {
      fall_t_[i] = falling[i].t;
      fall0_[i] = fall0_[i + 1];
      fall0_[i].add(falling[i].s0);
      fall1_[i] = fall1_[i + 1];
      fall1_[i].add(falling[i].s1);
    }
  }

  double operator()(double theta) const {
    const auto on = static_cast<std::size_t>(
        std::upper_bound(rise_t_.begin(), rise_t_.end(), theta) - rise_t_.begin());
    const auto from = static_cast<std::size_t>(
        std::lower_bound(fall_t_.begin(), fall_t_.end(), theta) - fall_t_.begin());
    ExactSum a0 = const0_;
    a0 += rise0_[on];
    a0 += fall0_[from];
    ExactSum a1 = const1_;
    a1 += rise1_[on];
    a1 += fall1_[from];
    return std::fabs(a1.value() / t1_.value() - a0.value() / t0_.value());
  }

  std::vector<double> switch_points() const {
    std::vector<double> out = rise_t_;
    out.insert(out.end(), fall_t_.begin(), fall_t_.end());
    return sorted_unique(std::move(out));
  }

 private:
  ExactSum t0_, t1_, const0_, const1_;
  std::vector<double> rise_t_, fall_t_;
  std::vector<ExactSum> rise0_, rise1_, fall0_, fall1_;
};

}  // namespace

ThetaFit fit_theta_blind(const BlindScores& scores) {
  scores.validate();
  const BlindDirection dir = BlindDirection::from(scores);
  const BlindProfile profile(scores, dir);
  const std::vector<double> points = profile.switch_points();

  std::vector<double> candidates = points;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    candidates.push_back(points[i] + 0.5 * (points[i + 1] - points[i]));
  }
  candidates.push_back(0.0);
  if (!points.empty()) {
    const double lo = points.front();
    const double hi = points.back();
    candidates.push_back(lo - std::max(1.0, std::fabs(lo)));
    candidates.push_back(hi + std::max(1.0, std::fabs(hi)));
  }
  return pick_best(sorted_unique(std::move(candidates)), profile);
}

// ---------------------------------------------------------------------------
// FairClassifier

FairClassifier::FairClassifier(double theta_hat, GroupStatistics stats, double unfairness,
                               std::optional<ScoreModel> model, double floor)
    : mode_(ScoreMode::kGroupAware),
      theta_(theta_hat),
      unfairness_(unfairness),
      stats_(stats),
      model_(std::move(model)),
      floor_(floor) {
  if (model_ && model_->mode() != ScoreMode::kGroupAware) {
    throw ConfigError("group-aware classifier needs a group-aware score model");
  }
}

FairClassifier::FairClassifier(double theta_hat, BlindDirection direction,
                               double unfairness, std::optional<GroupStatistics> stats,
                               std::optional<ScoreModel> model, double floor)
    : mode_(ScoreMode::kBlind),
      theta_(theta_hat),
      unfairness_(unfairness),
      stats_(stats),
      direction_(direction),
      model_(std::move(model)),
      floor_(floor) {
  if (model_ && model_->mode() != ScoreMode::kBlind) {
    throw ConfigError("blind classifier needs a blind score model");
  }
}

FairClassifier FairClassifier::with_theta(double theta) const {
  FairClassifier out = *this;
  out.theta_ = theta;
  return out;
}

int FairClassifier::decide(double score, int s) const {
  if (mode_ != ScoreMode::kGroupAware) throw ConfigError("decide() needs a group-aware classifier");
  return accepts(s, std::max(score, floor_), theta_, *stats_) ? 1 : 0;
}

int FairClassifier::decide_blind(double marginal, double score0, double score1) const {
  if (mode_ != ScoreMode::kBlind) throw ConfigError("decide_blind() needs a blind classifier");
  const double s0 = std::max(score0, floor_);
  const double s1 = std::max(score1, floor_);
  return blind_accepts(std::max(marginal, floor_), direction_->at(s0, s1), theta_) ? 1 : 0;
}

int FairClassifier::predict(std::span<const double> x, int s) const {
  if (!model_) throw ConfigError("classifier was calibrated from external scores; pass scores");
  if (mode_ == ScoreMode::kBlind) {
    return decide_blind(model_->marginal_score(x), model_->score(x, 0), model_->score(x, 1));
  }
  return decide(model_->score(x, s), s);
}

std::vector<int> FairClassifier::predict_rows(const FeatureMatrix& x,
                                              std::span<const int> sensitive) const {
  if (!model_) throw ConfigError("classifier was calibrated from external scores; pass scores");
  if (mode_ == ScoreMode::kBlind) return predict_scores(score_table(*model_, x), sensitive);
  const std::vector<double> scores = model_->score_rows(x, sensitive);
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = decide(scores[i], sensitive[i]);
  return out;
}

std::vector<int> FairClassifier::predict_scores(const ScoreTable& scores,
                                                std::span<const int> sensitive) const {
  std::vector<int> out(scores.size());
  if (mode_ == ScoreMode::kBlind) {
    if (!scores.marginal) throw SchemaError("blind prediction needs score_marginal");
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out[i] = decide_blind((*scores.marginal)[i], scores.s0[i], scores.s1[i]);
    }
    return out;
  }
  if (sensitive.size() != scores.size()) throw SchemaError("scores/sensitive length mismatch");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = decide(sensitive[i] == 1 ? scores.s1[i] : scores.s0[i], sensitive[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calibration pipeline

FairClassifier calibrate_model(const ScoreModel& model, std::size_t model_train_size,
                               const UnlabeledDataset& unlabeled) {
  const double floor = floor_level(model_train_size, unlabeled.size());
  const ScoreModel floored = model.with_floor(floor);
  if (floored.mode() == ScoreMode::kGroupAware) {
    if (!unlabeled.has_sensitive()) {
      throw SchemaError("group-aware calibration needs the sensitive column on the unlabeled sample");
    }
    const auto scores = GroupScores::split(
        floored.score_rows(unlabeled.features(), unlabeled.sensitive()), unlabeled.sensitive());
    const GroupStatistics stats = group_statistics(scores);
    const ThetaFit fit = fit_theta(scores, stats);
    return FairClassifier(fit.theta, stats, fit.unfairness, floored, floor);
  }
  const ScoreTable t = score_table(floored, unlabeled.features());
  BlindScores blind{*t.marginal, t.s0, t.s1};
  const ThetaFit fit = fit_theta_blind(blind);
  std::optional<GroupStatistics> stats;
  if (unlabeled.has_sensitive()) stats = group_statistics(t.own_group(unlabeled.sensitive()), unlabeled.sensitive());
  return FairClassifier(fit.theta, BlindDirection::from(blind), fit.unfairness, stats,
                        floored, floor);
}

FairClassifier calibrate(const LabeledDataset& train,
                         const std::optional<UnlabeledDataset>& unlabeled,
                         const EstimatorConfig& estimator, ScoreMode mode,
                         double jitter_amplitude) {
  const ScoreModel model = fit_estimator(train, estimator, mode).with_jitter(jitter_amplitude);
  if (unlabeled) return calibrate_model(model, train.size(), *unlabeled);
  return calibrate_model(model, train.size(), UnlabeledDataset::from_labeled(train));
}

FairClassifier calibrate_scores(const ScoreTable& scores,
                                const std::optional<std::vector<int>>& sensitive,
                                ScoreMode mode) {
  if (scores.size() == 0) throw SchemaError("empty score table");
  const double floor = floor_level(scores.size(), scores.size());
  const ScoreTable t = scores.floored(floor);
  if (mode == ScoreMode::kGroupAware) {
    if (!sensitive) throw SchemaError("group-aware calibration needs the sensitive column");
    if (sensitive->size() != t.size()) {
      throw SchemaError("score file has " + std::to_string(t.size()) + " rows, dataset has " +
                        std::to_string(sensitive->size()));
    }
    UnlabeledDataset coverage_check(FeatureMatrix(t.size(), 0, {}), *sensitive);
    (void)coverage_check;
    const auto groups = GroupScores::split(t.own_group(*sensitive), *sensitive);
    const GroupStatistics stats = group_statistics(groups);
    const ThetaFit fit = fit_theta(groups, stats);
    return FairClassifier(fit.theta, stats, fit.unfairness, std::nullopt, floor);
  }
  if (!t.marginal) throw SchemaError("blind calibration needs a score_marginal column");
  BlindScores blind{*t.marginal, t.s0, t.s1};
  const ThetaFit fit = fit_theta_blind(blind);
  std::optional<GroupStatistics> stats;
  if (sensitive) {
    if (sensitive->size() != t.size()) throw SchemaError("score file / dataset row count mismatch");
    stats = group_statistics(t.own_group(*sensitive), *sensitive);
  }
  return FairClassifier(fit.theta, BlindDirection::from(blind), fit.unfairness, stats,
                        std::nullopt, floor);
}

}  // namespace eofair
