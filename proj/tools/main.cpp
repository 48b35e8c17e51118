// Command-line front end: calibrate, predict, evaluate, benchmark,
// sweep-unlabeled, consistency.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eofair/calibration.hpp"
#include "eofair/error.hpp"
#include "eofair/experiments.hpp"
#include "eofair/metrics.hpp"
#include "eofair/oracle.hpp"
#include "eofair/serialization.hpp"

namespace {

using namespace eofair;

// Values shared by several subcommands. A --config JSON file fills them
// first; explicit flags then override.
struct Options {
  std::string config;
  std::string train, unlabeled, scores, data, test, model, out, cells_out, dist;
  std::string sensitive_col = "S";
  std::string label_col = "Y";
  std::string estimator = "logistic";
  std::string mode = "aware";
  double lambda = 1e-4;
  std::size_t k = 5;
  double jitter = 0.0;
  int max_iters = 5000;
  double grad_tolerance = 1e-6;
  bool json = false;

  // benchmark / sweep
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<std::size_t> k_grid = default_k_grid();
  double train_fraction = 0.7;
  std::size_t repeats = 30;
  std::uint64_t seed = 0;
  std::size_t cv_folds = 10;
  double shortlist = 0.9;
  std::string unlabeled_file;
  double unlabeled_fraction = 0.0;
  double labeled_fraction = 0.1;
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.4, 0.8};

  // consistency
  std::vector<std::size_t> n_grid{1000};
  std::vector<std::size_t> N_grid{100, 1000, 10000};
  std::string source = "exact";
  std::size_t test_size = 100000;
  std::size_t cell_repeats = 20;
};

template <class T>
void take(const Json& j, const char* key, T& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

void apply_config(const std::string& path, Options& o) {
  const Json j = read_json_file(path);
  if (!j.is_object()) throw SchemaError("config: top level must be an object");
  try {
    take(j, "train", o.train);
    take(j, "unlabeled", o.unlabeled);
    take(j, "scores", o.scores);
    take(j, "data", o.data);
    take(j, "dataset", o.data);
    take(j, "test", o.test);
    take(j, "test_set", o.test);
    take(j, "model", o.model);
    take(j, "out", o.out);
    take(j, "dist", o.dist);
    take(j, "sensitive_col", o.sensitive_col);
    take(j, "label_col", o.label_col);
    take(j, "estimator", o.estimator);
    take(j, "mode", o.mode);
    take(j, "l2_lambda", o.lambda);
    take(j, "k", o.k);
    take(j, "jitter_amplitude", o.jitter);
    take(j, "max_iters", o.max_iters);
    take(j, "grad_tolerance", o.grad_tolerance);
    take(j, "lambda_grid", o.lambda_grid);
    take(j, "k_grid", o.k_grid);
    take(j, "train_fraction", o.train_fraction);
    take(j, "n_repeats", o.repeats);
    take(j, "repeats", o.repeats);
    take(j, "repeats", o.cell_repeats);
    take(j, "seed", o.seed);
    take(j, "cv_folds", o.cv_folds);
    take(j, "accuracy_shortlist_fraction", o.shortlist);
    take(j, "unlabeled_file", o.unlabeled_file);
    take(j, "unlabeled_fraction", o.unlabeled_fraction);
    take(j, "labeled_fraction", o.labeled_fraction);
    take(j, "unlabeled_fractions", o.fractions);
    take(j, "n_grid", o.n_grid);
    take(j, "N_grid", o.N_grid);
    take(j, "source", o.source);
    take(j, "test_size", o.test_size);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
}

// Pre-scan for --config so that flags parsed afterwards take precedence.
std::optional<std::string> find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

EstimatorConfig estimator_config(const Options& o) {
  if (o.estimator == "logistic") {
    LogisticConfig c;
    c.l2_lambda = o.lambda;
    c.max_iters = o.max_iters;
    c.grad_tolerance = o.grad_tolerance;
    c.validate();
    return c;
  }
  if (o.estimator == "knn") {
    KnnConfig c{o.k};
    c.validate();
    return c;
  }
  throw ConfigError("unknown estimator '" + o.estimator + "' (expected logistic or knn)");
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::string fmt(const std::optional<double>& v, int precision = 6) {
  return v ? fmt(*v, precision) : std::string("undefined");
}

void print_table(const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::cout << std::left << std::setw(static_cast<int>(width[c]) + 2) << cells[c];
    }
    std::cout << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

void emit(const Json& j, const Options& o) {
  if (!o.out.empty()) write_json_file(j, o.out);
  if (o.json) std::cout << j.dump(2) << '\n';
}

void check_dimension(const FairClassifier& clf, std::size_t cols) {
  if (clf.model() && clf.model()->dimension() != cols) {
    throw SchemaError("model expects " + std::to_string(clf.model()->dimension()) +
                      " feature columns, data has " + std::to_string(cols));
  }
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const Options& o) {
  const ScoreMode mode = parse_mode(o.mode);
  std::optional<FairClassifier> clf;
  if (!o.scores.empty()) {
    const std::string rows_file = !o.unlabeled.empty() ? o.unlabeled : o.train;
    if (rows_file.empty()) throw ConfigError("--scores needs --unlabeled or --train for row alignment");
    const UnlabeledDataset rows = load_unlabeled_csv(rows_file, o.sensitive_col, o.label_col,
                                                     mode == ScoreMode::kGroupAware);
    const ScoreTable table = read_score_file(o.scores);
    if (table.size() != rows.size()) {
      throw SchemaError("score file has " + std::to_string(table.size()) + " rows, '" +
                        rows_file + "' has " + std::to_string(rows.size()));
    }
    std::optional<std::vector<int>> sensitive;
    if (rows.has_sensitive()) sensitive = rows.sensitive();
    clf = calibrate_scores(table, sensitive, mode);
  } else {
    if (o.train.empty()) throw ConfigError("calibrate needs --train or --scores");
    const LabeledDataset train = load_labeled_csv(o.train, o.sensitive_col, o.label_col);
    std::optional<UnlabeledDataset> unlabeled;
    if (!o.unlabeled.empty()) {
      unlabeled = load_unlabeled_csv(o.unlabeled, o.sensitive_col, o.label_col,
                                     mode == ScoreMode::kGroupAware);
      if (unlabeled->dimension() != train.dimension()) {
        throw SchemaError("unlabeled file has " + std::to_string(unlabeled->dimension()) +
                          " feature columns, train has " + std::to_string(train.dimension()));
      }
    }
    clf = calibrate(train, unlabeled, estimator_config(o), mode, o.jitter);
  }
  std::cout << "mode                  " << mode_name(clf->mode()) << '\n'
            << "theta_hat             " << fmt(clf->theta_hat(), 12) << '\n'
            << "unfairness_empirical  " << fmt(clf->unfairness_empirical(), 12) << '\n'
            << "floor                 " << fmt(clf->floor()) << '\n';
  if (clf->stats()) {
    const auto& st = *clf->stats();
    for (int s = 0; s < 2; ++s) {
      std::cout << "group " << s << "  p=" << fmt(st.p[s]) << "  mean_score=" << fmt(st.mean_score[s])
                << "  joint=" << fmt(st.joint[s]) << '\n';
    }
  }
  if (clf->model() && !clf->model()->converged()) {
    std::cout << "warning: logistic fit did not reach the gradient tolerance\n";
  }
  Options quiet = o;
  quiet.json = false;
  emit(to_json(*clf), quiet);
  return 0;
}

std::vector<int> predictions(const FairClassifier& clf, const Options& o, const std::string& file,
                             bool need_labels, std::vector<int>* labels,
                             std::vector<int>* sensitive) {
  const bool need_s = clf.mode() == ScoreMode::kGroupAware || need_labels;
  std::vector<int> s;
  FeatureMatrix x;
  if (need_labels) {
    const LabeledDataset ds = load_labeled_csv(file, o.sensitive_col, o.label_col);
    x = ds.features();
    s = ds.sensitive();
    *labels = ds.labels();
  } else {
    const UnlabeledDataset ds = load_unlabeled_csv(file, o.sensitive_col, o.label_col, need_s);
    x = ds.features();
    if (ds.has_sensitive()) s = ds.sensitive();
  }
  if (sensitive) *sensitive = s;
  if (!o.scores.empty()) {
    const ScoreTable table = read_score_file(o.scores);
    if (table.size() != x.rows()) {
      throw SchemaError("score file has " + std::to_string(table.size()) + " rows, '" + file +
                        "' has " + std::to_string(x.rows()));
    }
    return clf.predict_scores(table, s);
  }
  check_dimension(clf, x.cols());
  if (s.empty()) s.assign(x.rows(), 0);
  return clf.predict_rows(x, s);
}

int cmd_predict(const Options& o) {
  const FairClassifier clf = fair_classifier_from_json(read_json_file(o.model));
  const std::vector<int> pred = predictions(clf, o, o.data, false, nullptr, nullptr);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw SchemaError("cannot write '" + o.out + "'");
    out = &file;
  }
  *out << "prediction\n";
  for (int p : pred) *out << p << '\n';
  if (!o.out.empty()) {
    std::size_t ones = 0;
    for (int p : pred) ones += p == 1;
    std::cout << "rows " << pred.size() << "  predicted_positive " << ones << '\n';
  }
  return 0;
}

int cmd_evaluate(const Options& o) {
  const FairClassifier clf = fair_classifier_from_json(read_json_file(o.model));
  std::vector<int> labels;
  std::vector<int> sensitive;
  const std::vector<int> pred = predictions(clf, o, o.test, true, &labels, &sensitive);
  const EvaluationReport r = evaluate(pred, labels, sensitive);
  std::cout << "accuracy       " << fmt(r.accuracy) << '\n'
            << "deo_test       " << fmt(r.deo) << '\n'
            << "tpr_group0     " << fmt(r.tpr[0]) << "  (positives " << r.n_positives[0] << ")\n"
            << "tpr_group1     " << fmt(r.tpr[1]) << "  (positives " << r.n_positives[1] << ")\n";
  if (r.deo_undefined()) std::cout << "warning: a group has no positive label; deo undefined\n";
  emit(to_json(r), o);
  return 0;
}

BenchmarkConfig benchmark_config(const Options& o) {
  BenchmarkConfig c;
  c.dataset = o.data;
  if (!o.test.empty()) c.test_set = o.test;
  c.sensitive_col = o.sensitive_col;
  c.label_col = o.label_col;
  c.estimator = o.estimator;
  c.lambda_grid = o.lambda_grid;
  c.k_grid = o.k_grid;
  c.logistic.max_iters = o.max_iters;
  c.logistic.grad_tolerance = o.grad_tolerance;
  c.split = SplitPlan{o.train_fraction, o.repeats, o.seed};
  c.cv_folds = o.cv_folds;
  c.shortlist_fraction = o.shortlist;
  c.mode = parse_mode(o.mode);
  if (!o.unlabeled_file.empty()) {
    c.unlabeled.kind = UnlabeledSource::Kind::kFile;
    c.unlabeled.path = o.unlabeled_file;
  } else if (o.unlabeled_fraction > 0.0) {
    c.unlabeled.kind = UnlabeledSource::Kind::kFraction;
    c.unlabeled.fraction = o.unlabeled_fraction;
  }
  return c;
}

void print_arms(const std::array<ArmSummary, 2>& arms, const std::string& prefix = "") {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t a = 0; a < 2; ++a) {
    const ArmSummary& s = arms[a];
    rows.push_back({prefix + kArmNames[a], fmt(s.acc_mean, 4), fmt(s.acc_std, 4), fmt(s.deo_mean, 4),
                    fmt(s.deo_std, 4)});
  }
  print_table({"method", "acc_mean", "acc_std", "deo_mean", "deo_std"}, rows);
}

int cmd_benchmark(const Options& o) {
  if (o.data.empty()) throw ConfigError("benchmark needs --data (or 'dataset' in --config)");
  const BenchmarkConfig cfg = benchmark_config(o);
  const BenchmarkReport report = run_benchmark(cfg);
  std::cout << "estimator " << report.estimator << "  mode " << mode_name(report.mode)
            << "  repeats " << report.repeats.size()
            << (report.fixed_test_set ? "  (fixed test set)" : "") << '\n';
  if (report.split_fallback_warning) {
    std::cout << "warning: a (S,Y) cell was too small; splits stratified by S only\n";
  }
  if (report.fixed_test_set) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t a = 0; a < 2; ++a) {
      rows.push_back({kArmNames[a], fmt(report.arms[a].acc_mean, 4), fmt(report.arms[a].deo_mean, 4)});
    }
    print_table({"method", "acc", "deo"}, rows);
  } else {
    print_arms(report.arms);
  }
  std::size_t warnings = 0;
  for (const auto& r : report.repeats) warnings += r.warnings.size();
  if (warnings > 0) std::cout << "warnings: " << warnings << " (see JSON report)\n";
  emit(to_json(report), o);
  return 0;
}

int cmd_sweep(const Options& o) {
  if (o.data.empty()) throw ConfigError("sweep-unlabeled needs --data (or 'dataset' in --config)");
  SweepConfig cfg;
  cfg.base = benchmark_config(o);
  cfg.base.unlabeled = UnlabeledSource{};
  cfg.labeled_fraction = o.labeled_fraction;
  cfg.unlabeled_fractions = o.fractions;
  cfg.repeats = o.repeats;
  cfg.seed = o.seed;
  const SweepReport report = run_unlabeled_sweep(cfg);
  std::cout << "labeled rows " << report.n_labeled << "  test rows " << report.n_test << '\n';
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : report.rows) {
    rows.push_back({fmt(r.fraction, 4), std::to_string(r.n_unlabeled), fmt(r.arms[kPlugin].acc_mean, 4),
                    fmt(r.arms[kPlugin].acc_std, 4), fmt(r.arms[kPlugin].deo_mean, 4),
                    fmt(r.arms[kPlugin].deo_std, 4)});
  }
  print_table({"unlabeled_fraction", "N", "acc_mean", "acc_std", "deo_mean", "deo_std"}, rows);
  if (!report.warnings.empty()) std::cout << "warnings: " << report.warnings.size() << '\n';
  emit(to_json(report), o);
  return 0;
}

int cmd_consistency(const Options& o) {
  if (o.dist.empty()) throw ConfigError("consistency needs --dist");
  const SyntheticDistribution dist = distribution_from_json(read_json_file(o.dist));
  ConsistencyConfig cfg;
  cfg.n_grid = o.n_grid;
  cfg.N_grid = o.N_grid;
  cfg.repeats = o.cell_repeats;
  cfg.seed = o.seed;
  cfg.test_size = o.test_size;
  cfg.logistic.l2_lambda = o.lambda;
  cfg.logistic.max_iters = o.max_iters;
  cfg.logistic.grad_tolerance = o.grad_tolerance;
  cfg.knn.k = o.k;
  if (o.source == "exact") {
    cfg.source = ScoreSource::kExact;
  } else if (o.source == "logistic") {
    cfg.source = ScoreSource::kLogistic;
  } else if (o.source == "knn") {
    cfg.source = ScoreSource::kKnn;
  } else {
    throw ConfigError("unknown score source '" + o.source + "' (expected exact, logistic or knn)");
  }
  const ConsistencyResult result = consistency_run(dist, cfg);
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    if (!out) throw SchemaError("cannot write '" + o.out + "'");
    write_consistency_csv(result, out);
  } else {
    write_consistency_csv(result, std::cout);
  }
  if (!o.cells_out.empty()) {
    std::ofstream out(o.cells_out);
    if (!out) throw SchemaError("cannot write '" + o.cells_out + "'");
    write_consistency_cells_csv(result, out);
  }
  std::cerr << "theta_star " << fmt(result.oracle.theta_star, 10) << "  risk_star "
            << fmt(result.oracle.risk_star, 10) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Equal-opportunity recalibration of probability scores"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "JSON file with default values; flags override");
    c->add_option("--sensitive-col", o.sensitive_col, "Sensitive attribute column");
    c->add_option("--label-col", o.label_col, "Label column");
    c->add_option("--mode", o.mode, "aware | blind");
  };
  auto add_estimator = [&](CLI::App* c) {
    c->add_option("--estimator", o.estimator, "logistic | knn");
    c->add_option("--lambda", o.lambda, "L2 penalty of the logistic model");
    c->add_option("--k", o.k, "Neighbors of the k-NN model");
    c->add_option("--max-iters", o.max_iters, "Logistic gradient-descent iterations");
    c->add_option("--grad-tol", o.grad_tolerance, "Logistic gradient-norm tolerance");
  };

  auto* cal = app.add_subcommand("calibrate", "Fit scores and the threshold shift");
  add_common(cal);
  add_estimator(cal);
  cal->add_option("--train", o.train, "Labeled CSV");
  cal->add_option("--unlabeled", o.unlabeled, "Unlabeled CSV (default: reuse --train)");
  cal->add_option("--scores", o.scores, "Precomputed scores for the unlabeled rows");
  cal->add_option("--jitter", o.jitter, "Deterministic jitter amplitude");
  cal->add_option("--out", o.out, "Classifier JSON");

  auto* pred = app.add_subcommand("predict", "Predict with a calibrated classifier");
  add_common(pred);
  pred->add_option("--model", o.model, "Classifier JSON")->required();
  pred->add_option("--data", o.data, "CSV to score")->required();
  pred->add_option("--scores", o.scores, "Precomputed scores for --data");
  pred->add_option("--out", o.out, "Predictions CSV (default stdout)");

  auto* ev = app.add_subcommand("evaluate", "Accuracy and DEO on a labeled test set");
  add_common(ev);
  ev->add_option("--model", o.model, "Classifier JSON")->required();
  ev->add_option("--test", o.test, "Labeled test CSV")->required();
  ev->add_option("--scores", o.scores, "Precomputed scores for --test");
  ev->add_option("--out", o.out, "Report JSON");
  ev->add_flag("--json", o.json, "Also print the JSON report");

  auto add_protocol = [&](CLI::App* c) {
    add_common(c);
    add_estimator(c);
    c->add_option("--data", o.data, "Labeled CSV");
    c->add_option("--lambda-grid", o.lambda_grid, "Logistic penalty grid")->delimiter(',');
    c->add_option("--k-grid", o.k_grid, "k-NN grid")->delimiter(',');
    c->add_option("--repeats", o.repeats, "Repeated splits");
    c->add_option("--seed", o.seed, "Seed");
    c->add_option("--cv-folds", o.cv_folds, "Cross-validation folds");
    c->add_option("--shortlist", o.shortlist, "Accuracy shortlist fraction");
    c->add_option("--out", o.out, "Report JSON");
    c->add_flag("--json", o.json, "Also print the JSON report");
  };
  auto* bench = app.add_subcommand("benchmark", "Repeated splits with two-step CV selection");
  add_protocol(bench);
  bench->add_option("--test-set", o.test, "Fixed test CSV (drops std columns)");
  bench->add_option("--train-fraction", o.train_fraction, "Train share of each split");
  bench->add_option("--unlabeled-file", o.unlabeled_file, "Unlabeled CSV used as D_N");
  bench->add_option("--unlabeled-fraction", o.unlabeled_fraction,
                    "Share of each train split held out as D_N");

  auto* sweep = app.add_subcommand("sweep-unlabeled", "Accuracy and DEO against unlabeled size");
  add_protocol(sweep);
  sweep->add_option("--labeled-fraction", o.labeled_fraction, "Labeled share of the data");
  sweep->add_option("--fractions", o.fractions, "Unlabeled shares")->delimiter(',');

  auto* cons = app.add_subcommand("consistency", "Synthetic consistency experiment (CSV)");
  cons->add_option("--config", o.config, "JSON file with default values; flags override");
  cons->add_option("--dist", o.dist, "Distribution JSON");
  cons->add_option("--n-grid", o.n_grid, "Labeled sizes")->delimiter(',');
  cons->add_option("--N-grid", o.N_grid, "Unlabeled sizes")->delimiter(',');
  cons->add_option("--repeats", o.cell_repeats, "Repeats per cell");
  cons->add_option("--seed", o.seed, "Seed");
  cons->add_option("--source", o.source, "exact | logistic | knn");
  cons->add_option("--lambda", o.lambda, "L2 penalty (logistic source)");
  cons->add_option("--k", o.k, "Neighbors (knn source)");
  cons->add_option("--test-size", o.test_size, "Fresh test draws per cell");
  cons->add_option("--out", o.out, "Aggregated CSV (default stdout)");
  cons->add_option("--cells-out", o.cells_out, "Per-repeat CSV");

  try {
    if (const auto cfg = find_config(argc, argv)) apply_config(*cfg, o);
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::kConfig);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  }

  try {
    if (cal->parsed()) return cmd_calibrate(o);
    if (pred->parsed()) return cmd_predict(o);
    if (ev->parsed()) return cmd_evaluate(o);
    if (bench->parsed()) return cmd_benchmark(o);
    if (sweep->parsed()) return cmd_sweep(o);
    if (cons->parsed()) return cmd_consistency(o);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
