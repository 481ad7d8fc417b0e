#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace egofuse {

// Rows are ground truth, columns are predictions.
struct ConfusionMatrix {
  Eigen::MatrixXi counts;

  int num_classes() const { return static_cast<int>(counts.rows()); }
  long total() const { return counts.cast<long>().sum(); }
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double kappa = 0.0;
  double sic = 0.0;
  std::vector<double> class_precision;
  std::vector<double> class_recall;
  std::vector<double> class_f1;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int num_classes);

// Fills accuracy and the macro/per-class precision, recall and F1.
MetricsReport prf(const ConfusionMatrix& cm);
double kappa(const ConfusionMatrix& cm);
double sic(const ConfusionMatrix& cm);
// prf + kappa + sic.
MetricsReport evaluate(const ConfusionMatrix& cm);

// Unweighted mean of the scalar metrics; per-class vectors are averaged too.
MetricsReport mean_report(std::span<const MetricsReport> reports);

// Row-percentage rendering with class names as row/column headers.
std::string render_confusion(const ConfusionMatrix& cm, std::span<const std::string> class_names);

}  // namespace egofuse
