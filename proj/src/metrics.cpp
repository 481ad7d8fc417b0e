#include "egofuse/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "egofuse/error.hpp"

namespace egofuse {

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.counts.size() == 0 || cm.total() <= 0) throw DataError("empty confusion matrix");
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int num_classes) {
  if (truth.size() != pred.size()) throw DataError("truth and prediction lengths differ");
  if (truth.empty()) throw DataError("no samples to tally");
  if (num_classes < 1) throw DataError("class count must be positive");
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
      throw DataError("label outside range");
    ++cm.counts(truth[i], pred[i]);
  }
  return cm;
}

MetricsReport prf(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  const int c = cm.num_classes();
  const Eigen::MatrixXd m = cm.counts.cast<double>();
  MetricsReport r;
  r.accuracy = m.trace() / m.sum();
  for (int k = 0; k < c; ++k) {
    const double tp = m(k, k);
    const double p = ratio(tp, m.col(k).sum());
    const double rc = ratio(tp, m.row(k).sum());
    r.class_precision.push_back(p);
    r.class_recall.push_back(rc);
    r.class_f1.push_back(ratio(2.0 * p * rc, p + rc));
  }
  auto mean = [c](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / c;
  };
  r.precision = mean(r.class_precision);
  r.recall = mean(r.class_recall);
  r.f1 = mean(r.class_f1);
  return r;
}

double kappa(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  const Eigen::MatrixXd m = cm.counts.cast<double>();
  const double total = m.sum();
  const double p0 = m.trace() / total;
  const double pe = (m.rowwise().sum().array() * m.colwise().sum().transpose().array()).sum() / (total * total);
  if (pe >= 1.0) return p0 >= 1.0 ? 1.0 : 0.0;
  return (p0 - pe) / (1.0 - pe);
}

double sic(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  const int c = cm.num_classes();
  double sq = 0.0;
  for (int k = 0; k < c; ++k) {
    const long row = cm.counts.row(k).cast<long>().sum();
    if (row <= 0) throw DataError("empty truth row for class " + std::to_string(k));
    const double v = 100.0 * cm.counts(k, k) / static_cast<double>(row);
    sq += (v - 100.0) * (v - 100.0);
  }
  return 1.0 - sq / (c * 100.0 * 100.0);
}

MetricsReport evaluate(const ConfusionMatrix& cm) {
  MetricsReport r = prf(cm);
  r.kappa = kappa(cm);
  r.sic = sic(cm);
  return r;
}

MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw DataError("no reports to average");
  MetricsReport out;
  const double n = static_cast<double>(reports.size());
  const std::size_t c = reports.front().class_f1.size();
  out.class_precision.assign(c, 0.0);
  out.class_recall.assign(c, 0.0);
  out.class_f1.assign(c, 0.0);
  for (const auto& r : reports) {
    out.accuracy += r.accuracy;
    out.precision += r.precision;
    out.recall += r.recall;
    out.f1 += r.f1;
    out.kappa += r.kappa;
    out.sic += r.sic;
    for (std::size_t k = 0; k < std::min(c, r.class_f1.size()); ++k) {
      out.class_precision[k] += r.class_precision[k];
      out.class_recall[k] += r.class_recall[k];
      out.class_f1[k] += r.class_f1[k];
    }
  }
  out.accuracy /= n;
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  out.kappa /= n;
  out.sic /= n;
  for (std::size_t k = 0; k < c; ++k) {
    out.class_precision[k] /= n;
    out.class_recall[k] /= n;
    out.class_f1[k] /= n;
  }
  return out;
}

std::string render_confusion(const ConfusionMatrix& cm, std::span<const std::string> class_names) {
  const int c = cm.num_classes();
  std::size_t width = 6;
  for (int k = 0; k < c; ++k) {
    const std::string name = k < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(k)]
                                                                      : std::to_string(k);
    width = std::max(width, name.size());
  }
  auto label = [&](int k) {
    return k < static_cast<int>(class_names.size()) ? class_names[static_cast<std::size_t>(k)] : std::to_string(k);
  };
  auto pad = [width](const std::string& s) { return std::string(width - std::min(width, s.size()), ' ') + s; };
  std::string out = pad("");
  for (int k = 0; k < c; ++k) out += " " + pad(label(k));
  out += "\n";
  char buf[32];
  for (int t = 0; t < c; ++t) {
    out += pad(label(t));
    const double row = static_cast<double>(cm.counts.row(t).cast<long>().sum());
    for (int p = 0; p < c; ++p) {
      std::snprintf(buf, sizeof buf, "%.1f", row > 0 ? 100.0 * cm.counts(t, p) / row : 0.0);
      out += " " + pad(buf);
    }
    out += "\n";
  }
  return out;
}

}  // namespace egofuse
