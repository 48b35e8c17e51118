#include "eofair/serialization.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include "eofair/error.hpp"

namespace eofair {

namespace {

// Converts library exceptions about JSON structure into SchemaError.
template <class F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

Json regressor_to_json(const Regressor& r) {
  if (const auto* p = std::get_if<LogisticParams>(&r)) {
    return {{"type", "logistic"}, {"weights", p->weights}, {"bias", p->bias}};
  }
  const auto& k = std::get<KnnParams>(r);
  return {{"type", "knn"},
          {"k", k.k},
          {"rows", k.points.rows()},
          {"cols", k.points.cols()},
          {"points", k.points.values()},
          {"labels", k.labels}};
}

Regressor regressor_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "logistic") {
    return LogisticParams{j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>()};
  }
  if (type == "knn") {
    KnnParams p;
    p.k = j.at("k").get<std::size_t>();
    p.points = FeatureMatrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                             j.at("points").get<std::vector<double>>());
    p.labels = j.at("labels").get<std::vector<int>>();
    return p;
  }
  throw SchemaError("unknown regressor type '" + type + "'");
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json arm_summary(const ArmSummary& a) {
  Json j{{"acc_mean", a.acc_mean}, {"deo_mean", a.deo_mean}, {"deo_undefined", a.deo_undefined}};
  if (a.acc_std) j["acc_std"] = *a.acc_std;
  if (a.deo_std) j["deo_std"] = *a.deo_std;
  return j;
}

}  // namespace

std::string mode_name(ScoreMode mode) {
  return mode == ScoreMode::kBlind ? "blind" : "aware";
}

ScoreMode parse_mode(const std::string& name) {
  if (name == "aware") return ScoreMode::kGroupAware;
  if (name == "blind") return ScoreMode::kBlind;
  throw ConfigError("unknown mode '" + name + "' (expected aware or blind)");
}

Json to_json(const ScoreModel& model) {
  Json j{{"mode", mode_name(model.mode())},
         {"dimension", model.dimension()},
         {"floor", model.floor()},
         {"jitter_amplitude", model.jitter_amplitude()},
         {"converged", model.converged()},
         {"groups", Json::array({regressor_to_json(model.group_regressor(0)),
                                 regressor_to_json(model.group_regressor(1))})}};
  j["marginal"] = model.marginal_regressor() ? regressor_to_json(*model.marginal_regressor())
                                             : Json(nullptr);
  return j;
}

ScoreModel score_model_from_json(const Json& j) {
  return guarded("score model", [&] {
    const Json& groups = j.at("groups");
    if (!groups.is_array() || groups.size() != 2) {
      throw SchemaError("score model: 'groups' must hold two regressors");
    }
    std::optional<Regressor> marginal;
    if (j.contains("marginal") && !j.at("marginal").is_null()) {
      marginal = regressor_from_json(j.at("marginal"));
    }
    return ScoreModel(parse_mode(j.at("mode").get<std::string>()),
                      {regressor_from_json(groups[0]), regressor_from_json(groups[1])},
                      std::move(marginal), j.at("floor").get<double>(),
                      j.value("jitter_amplitude", 0.0), j.value("converged", true));
  });
}

Json to_json(const GroupStatistics& stats) {
  return {{"p_s", stats.p},
          {"mean_score_s", stats.mean_score},
          {"joint_s", stats.joint},
          {"count_s", stats.count}};
}

GroupStatistics group_statistics_from_json(const Json& j) {
  return guarded("group statistics", [&] {
    GroupStatistics st;
    st.p = j.at("p_s").get<std::array<double, 2>>();
    st.mean_score = j.at("mean_score_s").get<std::array<double, 2>>();
    st.joint = j.at("joint_s").get<std::array<double, 2>>();
    if (j.contains("count_s")) st.count = j.at("count_s").get<std::array<std::size_t, 2>>();
    for (int s = 0; s < 2; ++s) {
      if (!(st.joint[s] > 0.0)) throw SchemaError("group statistics: joint_s must be positive");
    }
    return st;
  });
}

Json to_json(const FairClassifier& clf) {
  Json j{{"mode", mode_name(clf.mode())},
         {"theta_hat", clf.theta_hat()},
         {"unfairness_empirical", clf.unfairness_empirical()},
         {"floor", clf.floor()}};
  j["stats"] = clf.stats() ? to_json(*clf.stats()) : Json(nullptr);
  if (clf.blind_direction()) {
    j["blind_direction"] = {{"mean_score_0", clf.blind_direction()->mean0},
                            {"mean_score_1", clf.blind_direction()->mean1}};
  }
  j["model"] = clf.model() ? to_json(*clf.model()) : Json(nullptr);
  return j;
}

FairClassifier fair_classifier_from_json(const Json& j) {
  return guarded("classifier", [&] {
    const ScoreMode mode = parse_mode(j.at("mode").get<std::string>());
    const double theta = j.at("theta_hat").get<double>();
    const double unfairness = j.value("unfairness_empirical", 0.0);
    const double floor = j.at("floor").get<double>();
    std::optional<ScoreModel> model;
    if (j.contains("model") && !j.at("model").is_null()) {
      model = score_model_from_json(j.at("model"));
    }
    std::optional<GroupStatistics> stats;
    if (j.contains("stats") && !j.at("stats").is_null()) {
      stats = group_statistics_from_json(j.at("stats"));
    }
    if (mode == ScoreMode::kGroupAware) {
      if (!stats) throw SchemaError("group-aware classifier lacks 'stats'");
      return FairClassifier(theta, *stats, unfairness, std::move(model), floor);
    }
    const Json& d = j.at("blind_direction");
    return FairClassifier(
        theta,
        BlindDirection{d.at("mean_score_0").get<double>(), d.at("mean_score_1").get<double>()},
        unfairness, stats, std::move(model), floor);
  });
}

Json to_json(const EvaluationReport& r) {
  return {{"n", r.n},
          {"accuracy", r.accuracy},
          {"deo_test", optional_number(r.deo)},
          {"deo_undefined", r.deo_undefined()},
          {"tpr_per_group", {optional_number(r.tpr[0]), optional_number(r.tpr[1])}},
          {"n_positives_per_group", r.n_positives}};
}

Json to_json(const SplitResult& splits) {
  Json list = Json::array();
  for (const auto& s : splits.splits) list.push_back({{"train", s.train}, {"test", s.test}});
  return {{"stratification", splits.stratification == Stratification::kSensitiveAndLabel
                                 ? "sensitive_and_label"
                                 : "sensitive_only"},
          {"fallback_warning", splits.fallback_warning},
          {"splits", list}};
}

Json to_json(const SyntheticDistribution& dist) {
  Json groups = Json::array();
  for (int s = 0; s < 2; ++s) {
    const GroupLaw& g = dist.group(s);
    Json knots = Json::array();
    for (const Knot& k : g.knots) knots.push_back({k.u, k.eta});
    groups.push_back({{"location", g.location}, {"scale", g.scale}, {"knots", knots}});
  }
  return {{"pi_1", dist.pi(1)}, {"groups", groups}};
}

SyntheticDistribution distribution_from_json(const Json& j) {
  return guarded("distribution", [&] {
    const Json& groups = j.at("groups");
    if (!groups.is_array() || groups.size() != 2) {
      throw SchemaError("distribution: 'groups' must list exactly two groups (S=0, S=1)");
    }
    std::array<GroupLaw, 2> laws;
    for (std::size_t s = 0; s < 2; ++s) {
      const Json& g = groups[s];
      laws[s].location = g.value("location", 0.0);
      laws[s].scale = g.value("scale", 1.0);
      for (const Json& k : g.at("knots")) {
        if (!k.is_array() || k.size() != 2) throw SchemaError("distribution: knots are [u, eta] pairs");
        laws[s].knots.push_back({k[0].get<double>(), k[1].get<double>()});
      }
    }
    return SyntheticDistribution(j.at("pi_1").get<double>(), std::move(laws));
  });
}

Json to_json(const OracleSolution& sol) {
  return {{"theta_star", sol.theta_star},
          {"joint_s", sol.joint},
          {"mean_eta_s", sol.mean_eta},
          {"latent_thresholds", sol.thresholds},
          {"tpr_common", sol.tpr_common},
          {"gap_at_solution", sol.gap_at_solution},
          {"risk_star", sol.risk_star},
          {"quadrature_points", sol.quadrature_points},
          {"bisection_tolerance", sol.bisection_tolerance},
          {"bracket_width", sol.bracket_width}};
}

Json to_json(const BenchmarkReport& report) {
  Json methods = Json::object();
  for (std::size_t arm = 0; arm < 2; ++arm) methods[kArmNames[arm]] = arm_summary(report.arms[arm]);
  Json repeats = Json::array();
  for (const auto& r : report.repeats) {
    Json arms = Json::object();
    for (std::size_t arm = 0; arm < 2; ++arm) {
      arms[kArmNames[arm]] = {{"chosen_index", r.arms[arm].chosen_index},
                              {"chosen_" + report.hyperparameter_name,
                               r.arms[arm].chosen_hyperparameter},
                              {"test", to_json(r.arms[arm].test)}};
    }
    Json cv = Json::array();
    for (const auto& c : r.cv) {
      cv.push_back({{report.hyperparameter_name, c.hyperparameter},
                    {"folds_used", c.folds_used},
                    {"folds_deo_undefined", c.folds_deo_undefined},
                    {"plugin", {{"accuracy", c.accuracy[kPlugin]}, {"deo", c.deo[kPlugin]}}},
                    {"baseline", {{"accuracy", c.accuracy[kBaseline]}, {"deo", c.deo[kBaseline]}}}});
    }
    repeats.push_back({{"repeat", r.repeat},
                       {"n_labeled", r.n_labeled},
                       {"n_unlabeled", r.n_unlabeled},
                       {"n_test", r.n_test},
                       {"theta_hat", r.theta_hat},
                       {"arms", arms},
                       {"cv", cv},
                       {"warnings", r.warnings}});
  }
  return {{"estimator", report.estimator},
          {"hyperparameter", report.hyperparameter_name},
          {"mode", mode_name(report.mode)},
          {"fixed_test_set", report.fixed_test_set},
          {"metadata",
           {{"split_stratification",
             report.split_stratification == Stratification::kSensitiveAndLabel
                 ? "sensitive_and_label"
                 : "sensitive_only"},
            {"split_fallback_warning", report.split_fallback_warning},
            {"cv_stratification", "sensitive_and_label"},
            {"cv_calibration", "reuse_train"},
            {"cv_undefined_deo", "counted_as_zero"}}},
          {"methods", methods},
          {"repeats", repeats}};
}

Json to_json(const SweepReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json methods = Json::object();
    for (std::size_t arm = 0; arm < 2; ++arm) methods[kArmNames[arm]] = arm_summary(r.arms[arm]);
    rows.push_back({{"unlabeled_fraction", r.fraction},
                    {"n_unlabeled", r.n_unlabeled},
                    {"methods", methods},
                    {"plugin_deo_per_repeat", r.plugin_deo},
                    {"plugin_acc_per_repeat", r.plugin_acc}});
  }
  return {{"n_labeled", report.n_labeled},
          {"n_test", report.n_test},
          {"rows", rows},
          {"warnings", report.warnings}};
}

void write_consistency_csv(const ConsistencyResult& result, std::ostream& out) {
  out << "n,N,repeats,deo_mean,deo_std,deo_se,excess_risk_mean,excess_risk_std,"
         "excess_risk_se,theta_hat_mean,theta_hat_std,accuracy_mean,deo_undefined,"
         "theta_star,risk_star\n";
  out << std::setprecision(17);
  for (const auto& r : result.rows) {
    out << r.n << ',' << r.N << ',' << r.repeats << ',' << r.deo_mean << ',' << r.deo_std
        << ',' << r.deo_se << ',' << r.excess_mean << ',' << r.excess_std << ','
        << r.excess_se << ',' << r.theta_mean << ',' << r.theta_std << ','
        << r.accuracy_mean << ',' << r.deo_undefined << ',' << result.oracle.theta_star << ','
        << result.oracle.risk_star << '\n';
  }
}

void write_consistency_cells_csv(const ConsistencyResult& result, std::ostream& out) {
  out << "n,N,repeat,theta_hat,deo_test,deo_undefined,excess_risk,accuracy\n";
  out << std::setprecision(17);
  for (const auto& c : result.cells) {
    out << c.n << ',' << c.N << ',' << c.repeat << ',' << c.theta_hat << ',' << c.deo_test
        << ',' << (c.deo_undefined ? 1 : 0) << ',' << c.excess_risk << ',' << c.accuracy
        << '\n';
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace eofair
