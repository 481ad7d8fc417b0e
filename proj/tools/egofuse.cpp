// Command-line driver: extract, run, synth, report.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "egofuse/config.hpp"
#include "egofuse/data_model.hpp"
#include "egofuse/error.hpp"
#include "egofuse/pipeline.hpp"
#include "egofuse/report.hpp"
#include "egofuse/synth.hpp"

namespace {

using namespace egofuse;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTrials = 4;

int cmd_extract(const fs::path& config_path, const std::string& flow_dir) {
  ExperimentConfig cfg = load_config(config_path);
  if (!flow_dir.empty()) cfg.flow_dir = flow_dir;
  const DatasetManifest manifest = load_manifest(cfg.manifest);
  ExtractStats stats;
  const FeatureTable table = extract(cfg, manifest, &stats);
  std::cout << "extracted " << manifest.segments.size() << " segments (" << stats.computed << " computed, "
            << stats.cached << " cached)\n";
  for (const auto& [name, ch] : table.channels())
    std::cout << "  " << name << ": dim " << ch.dim() << ", " << ch.count() << " rows\n";
  return 0;
}

int cmd_run(const fs::path& config_path, const std::string& classifier, std::optional<int> trials,
            const std::string& flow_dir) {
  ExperimentConfig cfg = load_config(config_path);
  if (!flow_dir.empty()) cfg.flow_dir = flow_dir;
  if (!classifier.empty()) cfg.classifier = parse_classifier(classifier);
  if (trials) cfg.trials = *trials;
  cfg.validate();
  const DatasetManifest manifest = load_manifest(cfg.manifest);
  const FeatureTable table = extract(cfg, manifest);
  const fs::path run_dir = cfg.output_dir / "runs" / classifier_name(cfg.classifier);
  const RunResult result = run_trials(cfg, manifest, table, cfg.save_models ? run_dir / "models" : fs::path{});
  write_run_outputs(result, run_dir);
  for (const auto& t : result.trials)
    if (!t.ok) std::cerr << "trial " << t.trial << " failed: " << t.error << "\n";
  if (result.failed < static_cast<int>(result.trials.size())) {
    report(cfg.output_dir);
    const auto& a = result.aggregate;
    std::printf("%s over %zu trials (%d failed): A=%.4f P=%.4f R=%.4f kappa=%.4f SIC=%.4f F=%.4f\n",
                classifier_name(cfg.classifier).c_str(), result.trials.size(), result.failed, a.accuracy,
                a.precision, a.recall, a.kappa, a.sic, a.f1);
  }
  if (result.too_many_failures()) {
    std::cerr << "error: " << result.failed << " of " << result.trials.size() << " trials failed\n";
    return kExitTrials;
  }
  return 0;
}

int cmd_synth(std::uint64_t seed, const fs::path& out, int per_class) {
  SynthOptions o;
  o.segments_per_class = per_class;
  const DatasetManifest m = synth_dataset(seed, out, o);
  std::cout << "wrote " << m.segments.size() << " segments in " << m.num_classes() << " classes to "
            << (out / "manifest.tsv").string() << "\n";
  return 0;
}

int cmd_report(const fs::path& in) {
  const auto rows = report(in);
  std::cout << kComparisonHeader << "\n";
  for (const auto& r : rows)
    std::printf("%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", r.classifier.c_str(), r.accuracy, r.precision, r.recall,
                r.kappa, r.sic, r.f1);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"egocentric activity recognition by multi-kernel fusion"};
  app.require_subcommand(1);

  std::string config_path, classifier, out_dir, in_dir, flow_dir;
  std::optional<int> trials;
  std::uint64_t seed = 1;
  int per_class = SynthOptions{}.segments_per_class;

  auto* extract_cmd = app.add_subcommand("extract", "extract and cache per-segment features");
  extract_cmd->add_option("--config", config_path, "experiment config file")->required();
  extract_cmd->add_option("--flow-dir", flow_dir, "directory of <id>.flw flow dumps (read if present, else written)");

  auto* run_cmd = app.add_subcommand("run", "run the trial protocol and write reports");
  run_cmd->add_option("--config", config_path, "experiment config file")->required();
  run_cmd->add_option("--classifier", classifier, "svm_poly, svm_hist, simple_mkl or mkboost");
  run_cmd->add_option("--trials", trials, "override the number of trials");
  run_cmd->add_option("--flow-dir", flow_dir, "directory of <id>.flw flow dumps (read if present, else written)");

  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic 4-class corpus");
  synth_cmd->add_option("--seed", seed, "generator seed");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();
  synth_cmd->add_option("--segments-per-class", per_class, "segments per class");

  auto* report_cmd = app.add_subcommand("report", "rebuild comparison tables from run outputs");
  report_cmd->add_option("--in", in_dir, "output directory of previous runs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*extract_cmd) return cmd_extract(config_path, flow_dir);
    if (*run_cmd) return cmd_run(config_path, classifier, trials, flow_dir);
    if (*synth_cmd) return cmd_synth(seed, out_dir, per_class);
    if (*report_cmd) return cmd_report(in_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
