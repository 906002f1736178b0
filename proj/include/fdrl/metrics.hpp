#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace fdrl {

/// Confusion matrix (rows = true class, cols = predicted) with weighted and
/// unweighted average recall. Classes with zero support are excluded from
/// UAR and listed.
struct MetricsReport {
  Eigen::MatrixXd confusion;  // counts
  double war = 0.0;
  double uar = 0.0;
  std::vector<int> zero_support_classes;

  static MetricsReport from_predictions(const std::vector<int>& y_true,
                                        const std::vector<int>& y_pred, int classes);
  static MetricsReport from_confusion(const Eigen::MatrixXd& confusion);

  std::string to_text() const;
  std::string to_json() const;
};

}  // namespace fdrl
