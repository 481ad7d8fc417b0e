#include "egofuse/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "egofuse/error.hpp"

namespace egofuse {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += line[++i];
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::string metric_cells(const MetricsReport& m) {
  return num(m.accuracy) + "," + num(m.precision) + "," + num(m.recall) + "," + num(m.kappa) + "," + num(m.sic) +
         "," + num(m.f1);
}

void write_counts_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names, const fs::path& p) {
  auto out = open_out(p);
  out << "truth\\pred";
  for (const auto& n : names) out << "," << n;
  out << "\n";
  for (int t = 0; t < cm.num_classes(); ++t) {
    out << names[static_cast<std::size_t>(t)];
    for (int q = 0; q < cm.num_classes(); ++q) out << "," << cm.counts(t, q);
    out << "\n";
  }
}

void render_from_counts(const fs::path& run_dir) {
  std::ifstream in(run_dir / "confusion_counts.csv");
  if (!in) return;
  std::string line;
  std::getline(in, line);
  auto header = split_csv(line);
  std::vector<std::string> names(header.begin() + 1, header.end());
  const int c = static_cast<int>(names.size());
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(c, c);
  for (int t = 0; t < c && std::getline(in, line); ++t) {
    auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) != c + 1) throw DataError("malformed confusion_counts.csv in " + run_dir.string());
    for (int q = 0; q < c; ++q) cm.counts(t, q) = std::stoi(cells[static_cast<std::size_t>(q + 1)]);
  }
  auto out = open_out(run_dir / "confusion.txt");
  out << "row percentages (truth rows, predicted columns)\n" << render_confusion(cm, names);
}

}  // namespace

void write_run_outputs(const RunResult& r, const fs::path& run_dir) {
  fs::create_directories(run_dir);
  {
    auto out = open_out(run_dir / "metrics.csv");
    out << "trial,status,A,P,R,κ,SIC,F,C,error\n";
    for (const auto& t : r.trials) {
      if (t.ok) out << t.trial << ",ok," << metric_cells(t.metrics) << "," << num(t.c) << ",\n";
      else out << t.trial << ",failed,,,,,,,," << quote(t.error) << "\n";
    }
    const int ok = static_cast<int>(r.trials.size()) - r.failed;
    if (ok > 0) out << "mean," << ok << "/" << r.trials.size() << "," << metric_cells(r.aggregate) << ",,\n";
  }

  const int c = static_cast<int>(r.class_names.size());
  ConfusionMatrix total;
  total.counts = Eigen::MatrixXi::Zero(c, c);
  std::map<std::string, long> kinds, chans;
  for (const auto& t : r.trials) {
    if (!t.ok) continue;
    total.counts += t.confusion.counts;
    for (const auto& [k, n] : t.selection.kernel_kinds) kinds[k] += n;
    for (const auto& [k, n] : t.selection.channels) chans[k] += n;
  }
  write_counts_csv(total, r.class_names, run_dir / "confusion_counts.csv");
  render_from_counts(run_dir);
  {
    auto out = open_out(run_dir / "selection_kernels.csv");
    out << "kernel_kind,count\n";
    for (const auto& [k, n] : kinds) out << k << "," << n << "\n";
  }
  {
    auto out = open_out(run_dir / "selection_channels.csv");
    out << "channel,count\n";
    for (const auto& [k, n] : chans) out << k << "," << n << "\n";
  }
  {
    auto out = open_out(run_dir / "splits.csv");
    out << "trial,segment_id,side\n";
    for (const auto& t : r.trials) {
      for (const auto& id : t.split.train_ids) out << t.trial << "," << id << ",train\n";
      for (const auto& id : t.split.test_ids) out << t.trial << "," << id << ",test\n";
    }
  }
  {
    auto out = open_out(run_dir / "audit.csv");
    out << "trial,phase,segment_id\n";
    for (const auto& e : r.access) out << e.trial << "," << e.phase << "," << e.segment_id << "\n";
  }
}

std::vector<ComparisonRow> read_run_summaries(const fs::path& in_dir) {
  std::vector<ComparisonRow> rows;
  const fs::path runs = in_dir / "runs";
  if (!fs::is_directory(runs)) return rows;
  for (const auto& entry : fs::directory_iterator(runs)) {
    const fs::path csv = entry.path() / "metrics.csv";
    if (!entry.is_directory() || !fs::exists(csv)) continue;
    std::ifstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
      auto cells = split_csv(line);
      if (cells.size() < 8 || cells[0] != "mean") continue;
      ComparisonRow r;
      r.classifier = entry.path().filename().string();
      try {
        r.accuracy = std::stod(cells[2]);
        r.precision = std::stod(cells[3]);
        r.recall = std::stod(cells[4]);
        r.kappa = std::stod(cells[5]);
        r.sic = std::stod(cells[6]);
        r.f1 = std::stod(cells[7]);
      } catch (const std::exception&) {
        throw DataError("malformed aggregate row in " + csv.string());
      }
      rows.push_back(r);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.classifier < b.classifier; });
  return rows;
}

std::vector<ComparisonRow> report(const fs::path& in_dir) {
  const auto rows = read_run_summaries(in_dir);
  if (rows.empty()) throw DataError("no run results under " + (in_dir / "runs").string());
  for (const auto& r : rows) render_from_counts(in_dir / "runs" / r.classifier);
  {
    auto out = open_out(in_dir / "comparison.csv");
    out << kComparisonHeader << "\n";
    for (const auto& r : rows)
      out << r.classifier << "," << num(r.accuracy) << "," << num(r.precision) << "," << num(r.recall) << ","
          << num(r.kappa) << "," << num(r.sic) << "," << num(r.f1) << "\n";
  }
  {
    auto out = open_out(in_dir / "comparison.txt");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s %9s %8s %8s\n", "classifier", "A", "P", "R", "κ", "SIC", "F");
    out << buf;
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s %8s %8s %8s\n", r.classifier.c_str(), fixed(r.accuracy).c_str(),
                    fixed(r.precision).c_str(), fixed(r.recall).c_str(), fixed(r.kappa).c_str(), fixed(r.sic).c_str(),
                    fixed(r.f1).c_str());
      out << buf;
    }
  }
  return rows;
}

}  // namespace egofuse
