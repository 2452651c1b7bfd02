#pragma once

#include "scate/data.hpp"
#include "scate/types.hpp"

namespace scate {

double r2_score(const Vector& truth, const Vector& predicted);
// Predictions are thresholded at 0.5.
double accuracy(const Vector& truth, const Vector& predicted);
// R^2 for regression, accuracy for binary classification.
double task_metric(Task task, const Vector& truth, const Vector& predicted);
std::string_view metric_name(Task task);

}  // namespace scate
