#include "fdrl/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "fdrl/errors.hpp"

namespace fdrl {

MetricsReport MetricsReport::from_predictions(const std::vector<int>& y_true,
                                              const std::vector<int>& y_pred, int classes) {
  if (y_true.size() != y_pred.size())
    throw ValidationError("metrics: prediction count does not match label count");
  Eigen::MatrixXd conf = Eigen::MatrixXd::Zero(classes, classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= classes || y_pred[i] < 0 || y_pred[i] >= classes)
      throw ValidationError("metrics: class index outside [0, " + std::to_string(classes) +
                            ") at row " + std::to_string(i));
    conf(y_true[i], y_pred[i]) += 1.0;
  }
  return from_confusion(conf);
}

MetricsReport MetricsReport::from_confusion(const Eigen::MatrixXd& confusion) {
  if (confusion.rows() != confusion.cols())
    throw ValidationError("metrics: confusion matrix must be square");
  MetricsReport r;
  r.confusion = confusion;
  const double total = confusion.sum();
  r.war = total > 0 ? confusion.trace() / total : 0.0;
  double recall_sum = 0.0;
  int supported = 0;
  for (Eigen::Index c = 0; c < confusion.rows(); ++c) {
    const double support = confusion.row(c).sum();
    if (support <= 0) {
      r.zero_support_classes.push_back(static_cast<int>(c));
      continue;
    }
    recall_sum += confusion(c, c) / support;
    ++supported;
  }
  r.uar = supported > 0 ? recall_sum / supported : 0.0;
  return r;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "war = " << fmt(war) << "\n";
  os << "uar = " << fmt(uar) << "\n";
  os << "classes = " << confusion.rows() << "\n";
  for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
    os << "confusion_row_" << r << " =";
    for (Eigen::Index c = 0; c < confusion.cols(); ++c)
      os << " " << static_cast<long long>(confusion(r, c));
    os << "\n";
  }
  if (!zero_support_classes.empty()) {
    os << "zero_support_classes =";
    for (int c : zero_support_classes) os << " " << c;
    os << "\n";
  }
  return os.str();
}

std::string MetricsReport::to_json() const {
  std::ostringstream os;
  os << "{\"war\": " << fmt(war) << ", \"uar\": " << fmt(uar) << ", \"confusion\": [";
  for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
    os << (r ? ", [" : "[");
    for (Eigen::Index c = 0; c < confusion.cols(); ++c)
      os << (c ? ", " : "") << static_cast<long long>(confusion(r, c));
    os << "]";
  }
  os << "], \"zero_support_classes\": [";
  for (std::size_t i = 0; i < zero_support_classes.size(); ++i)
    os << (i ? ", " : "") << zero_support_classes[i];
  os << "]}";
  return os.str();
}

}  // namespace fdrl
