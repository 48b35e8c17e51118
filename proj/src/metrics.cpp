#include "eofair/metrics.hpp"

#include <cmath>
#include <string>

#include "eofair/error.hpp"

namespace eofair {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw SchemaError(std::string(what) + ": length mismatch (" + std::to_string(a) +
                      " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

double accuracy(std::span<const int> pred, std::span<const int> labels) {
  check_lengths(pred.size(), labels.size(), "accuracy");
  if (pred.empty()) throw SchemaError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

EvaluationReport deo(std::span<const int> pred, std::span<const int> labels,
                     std::span<const int> sensitive) {
  check_lengths(pred.size(), labels.size(), "deo");
  check_lengths(pred.size(), sensitive.size(), "deo");
  EvaluationReport r;
  r.n = pred.size();
  std::array<std::size_t, 2> hits{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (labels[i] != 1) continue;
    const int s = sensitive[i] == 1 ? 1 : 0;
    ++r.n_positives[s];
    hits[s] += pred[i] == 1;
  }
  for (int s = 0; s < 2; ++s) {
    if (r.n_positives[s] > 0) {
      r.tpr[s] = static_cast<double>(hits[s]) / static_cast<double>(r.n_positives[s]);
    }
  }
  if (r.tpr[0] && r.tpr[1]) r.deo = std::fabs(*r.tpr[1] - *r.tpr[0]);
  return r;
}

EvaluationReport evaluate(std::span<const int> pred, std::span<const int> labels,
                          std::span<const int> sensitive) {
  EvaluationReport r = deo(pred, labels, sensitive);
  r.accuracy = accuracy(pred, labels);
  return r;
}

}  // namespace eofair
