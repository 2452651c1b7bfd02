#include "scate/metrics.hpp"

#include "scate/error.hpp"

namespace scate {

double r2_score(const Vector& truth, const Vector& predicted) {
  if (truth.size() != predicted.size() || truth.size() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "r2 needs equal, non-empty vectors");
  }
  const double mean = truth.mean();
  const double ss_res = (truth - predicted).squaredNorm();
  const double ss_tot = (truth.array() - mean).square().sum();
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

double accuracy(const Vector& truth, const Vector& predicted) {
  if (truth.size() != predicted.size() || truth.size() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "accuracy needs equal, non-empty vectors");
  }
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double label = predicted(i) >= 0.5 ? 1.0 : 0.0;
    hits += label == truth(i);
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double task_metric(Task task, const Vector& truth, const Vector& predicted) {
  return task == Task::Regression ? r2_score(truth, predicted) : accuracy(truth, predicted);
}

std::string_view metric_name(Task task) { return task == Task::Regression ? "r2" : "accuracy"; }

}  // namespace scate
