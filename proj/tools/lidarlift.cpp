// lidarlift: pseudo-label toolkit for camera-supervised LiDAR segmentation.
//
// Exit codes: 0 success, 1 processing error (typed, names file and cause),
// 2 configuration or usage error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lidarlift/config.hpp"
#include "lidarlift/error.hpp"
#include "lidarlift/evaluation.hpp"
#include "lidarlift/io.hpp"
#include "lidarlift/pipeline.hpp"
#include "lidarlift/tta.hpp"

namespace fs = std::filesystem;
using namespace lidarlift;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<std::string> scheme;
  std::optional<std::string> mode;
  std::optional<double> tau_min;
  std::optional<double> tau_max;
  std::optional<std::string> sampling;
  std::vector<std::string> sequences;
};

void add_dataset_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Pipeline JSON config")->required();
  cmd->add_option("--jobs", o.jobs, "Worker threads (outputs do not depend on it)");
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--sequence", o.sequences, "Restrict to these sequences");
}

void add_refine_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--k", o.k, "Neighborhood size (odd)");
  cmd->add_option("--scheme", o.scheme, "majority | distance | confidence");
}

void add_threshold_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--mode", o.mode, "static | class_balanced");
  cmd->add_option("--tau-min", o.tau_min, "Minimum threshold");
  cmd->add_option("--tau-max", o.tau_max, "Maximum (or static) threshold");
}

PipelineConfig load(const Overrides& o) {
  auto cfg = read_config(o.config_path);
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.seed) cfg.seed = *o.seed;
  if (o.k) cfg.refine.k = *o.k;
  if (o.scheme) cfg.scheme = parse_refine_scheme(*o.scheme);
  if (o.mode) cfg.threshold.mode = parse_threshold_mode(*o.mode);
  if (o.tau_min) cfg.threshold.tau_min = *o.tau_min;
  if (o.tau_max) cfg.threshold.tau_max = *o.tau_max;
  if (o.sampling) {
    if (*o.sampling == "nearest") {
      cfg.sampling = Sampling::Nearest;
    } else if (*o.sampling == "bilinear") {
      cfg.sampling = Sampling::Bilinear;
    } else {
      throw Error(ErrorKind::Config, "--sampling must be nearest or bilinear");
    }
  }
  if (!o.sequences.empty()) cfg.sequences = o.sequences;
  cfg.validate();
  check_inputs(cfg);
  return cfg;
}

void print_summary(const char* stage, const StageSummary& s, const char* selected_name) {
  std::printf("%s: %zu scans, %zu points, %zu %s\n", stage, s.scans, s.points, s.selected,
              selected_name);
}

std::vector<fs::path> label_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, dir.string() + " is not a directory");
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".label") {
      out.push_back(fs::relative(e.path(), dir));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Lift 2D teacher predictions onto LiDAR scans and distill pseudo-labels"};
  app.require_subcommand(1);

  Overrides o;

  auto* lift = app.add_subcommand("lift", "Project 2D probability maps onto the clouds");
  add_dataset_options(lift, o);
  lift->add_option("--sampling", o.sampling, "nearest | bilinear");

  auto* refine = app.add_subcommand("refine", "KNN neighborhood refinement of lifted predictions");
  add_dataset_options(refine, o);
  add_refine_options(refine, o);

  auto* stats = app.add_subcommand("stats", "Class histogram pass and per-class thresholds");
  add_dataset_options(stats, o);
  add_threshold_options(stats, o);

  auto* threshold = app.add_subcommand("threshold", "Drop low-confidence pseudo-labels");
  add_dataset_options(threshold, o);

  std::string slice_labels = "pseudo";
  auto* slice = app.add_subcommand("slice", "Cut clouds to the camera field of view");
  add_dataset_options(slice, o);
  slice->add_option("--labels", slice_labels, "Label stage to slice alongside (or 'gt')");

  auto* pipeline = app.add_subcommand("pipeline", "lift -> refine -> stats -> threshold");
  add_dataset_options(pipeline, o);
  add_refine_options(pipeline, o);
  add_threshold_options(pipeline, o);
  pipeline->add_option("--sampling", o.sampling, "nearest | bilinear");
  bool pipeline_eval = false;
  pipeline->add_flag("--eval", pipeline_eval, "Evaluate pseudo-labels in the camera FOV");

  // eval: either against a config layout or two label directories.
  auto* eval = app.add_subcommand("eval", "Confusion matrix, per-class IoU and mIoU");
  std::string eval_config, eval_stage = "pseudo", pred_dir, gt_dir, fov_dir, class_map_path,
                           csv_out;
  bool eval_fov = false;
  std::size_t eval_jobs = 1;
  eval->add_option("--config", eval_config, "Pipeline config (evaluate a stage)");
  eval->add_option("--stage", eval_stage, "Prediction stage directory (with --config)");
  eval->add_flag("--fov", eval_fov, "Only points inside the camera FOV (with --config)");
  eval->add_option("--jobs", eval_jobs, "Worker threads");
  eval->add_option("--pred", pred_dir, "Directory of predicted .label files");
  eval->add_option("--gt", gt_dir, "Directory of ground-truth .label files");
  eval->add_option("--fov-dir", fov_dir, "Directory of FOV mask .ptns files");
  eval->add_option("--class-map", class_map_path, "Class map CSV");
  eval->add_option("--csv", csv_out, "Write the CSV summary here");

  auto* tta = app.add_subcommand("tta", "Test-time augmentation variants and aggregation");
  tta->require_subcommand(1);
  auto* tta_emit = tta->add_subcommand("emit", "Write the 12 TTA variants of a cloud");
  std::string emit_cloud, emit_out;
  tta_emit->add_option("--cloud", emit_cloud, "Input .bin cloud")->required();
  tta_emit->add_option("--out", emit_out, "Output directory")->required();
  auto* tta_agg = tta->add_subcommand("aggregate", "Average per-variant N x C predictions");
  std::vector<std::string> agg_inputs;
  std::string agg_out;
  tta_agg->add_option("--inputs", agg_inputs, "Per-variant .ptns tensors")->required();
  tta_agg->add_option("--out", agg_out, "Output .ptns")->required();

  auto* soup = app.add_subcommand("soup", "Greedy soup over checkpoint weight vectors");
  std::vector<std::string> soup_candidates;
  std::string soup_cmd, soup_out, soup_log;
  soup->add_option("--candidates", soup_candidates, "1-D float32 .ptns weight vectors")
      ->required();
  soup->add_option("--eval-cmd", soup_cmd,
                   "Command (whitespace-split) run as <cmd...> <weight file>; prints a scalar")
      ->required();
  soup->add_option("--out", soup_out, "Output .ptns for the soup")->required();
  soup->add_option("--log", soup_log, "CSV inclusion log");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with a noisy teacher");
  std::string synth_out;
  SynthOptions synth_opts;
  synth->add_option("--out", synth_out, "Dataset root to create")->required();
  synth->add_option("--scenes", synth_opts.scenes, "Number of scans");
  synth->add_option("--seed", synth_opts.seed, "Base seed");
  synth->add_option("--border-rate", synth_opts.border_rate, "Boundary-band error rate");
  synth->add_option("--body-rate", synth_opts.body_rate, "Error rate away from boundaries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (lift->parsed()) {
    const auto cfg = load(o);
    print_summary("lift", run_lift(cfg, discover_scans(cfg)), "in FOV");
  } else if (refine->parsed()) {
    const auto cfg = load(o);
    print_summary("refine", run_refine(cfg, discover_scans(cfg)), "refined");
  } else if (stats->parsed()) {
    const auto cfg = load(o);
    const auto hist = run_stats(cfg, discover_scans(cfg));
    std::cout << format_histogram_csv(hist);
  } else if (threshold->parsed()) {
    const auto cfg = load(o);
    const auto r = run_threshold(cfg, discover_scans(cfg));
    std::printf("threshold: removed %llu of %llu pseudo-labels (%.2f%%)\n",
                static_cast<unsigned long long>(r.removed),
                static_cast<unsigned long long>(r.considered), 100.0 * r.fraction());
  } else if (slice->parsed()) {
    const auto cfg = load(o);
    print_summary("slice", run_slice(cfg, discover_scans(cfg), slice_labels), "kept");
  } else if (pipeline->parsed()) {
    const auto cfg = load(o);
    const auto scans = discover_scans(cfg);
    const auto r = run_pipeline(cfg, scans);
    std::printf("pipeline: %zu scans, removed %llu of %llu pseudo-labels (%.2f%%)\n",
                scans.size(), static_cast<unsigned long long>(r.removed),
                static_cast<unsigned long long>(r.considered), 100.0 * r.fraction());
    if (pipeline_eval) {
      const auto classes = read_class_map(cfg.class_map);
      std::cout << run_eval(cfg, scans, "pseudo", true).text(classes);
    }
  } else if (eval->parsed()) {
    if (!eval_config.empty()) {
      Overrides eo;
      eo.config_path = eval_config;
      eo.jobs = eval_jobs;
      const auto cfg = load(eo);
      const auto classes = read_class_map(cfg.class_map);
      const auto r = run_eval(cfg, discover_scans(cfg), eval_stage, eval_fov);
      std::cout << r.text(classes);
      if (!csv_out.empty()) write_text_atomic(csv_out, r.csv(classes));
    } else {
      if (pred_dir.empty() || gt_dir.empty() || class_map_path.empty()) {
        throw Error(ErrorKind::Config, "eval needs --config, or --pred, --gt and --class-map");
      }
      const auto classes = read_class_map(class_map_path);
      std::vector<ConfusionMatrix> matrices;
      for (const auto& rel : label_files(pred_dir)) {
        const auto pred = read_labels(fs::path(pred_dir) / rel, &classes).semantic;
        const auto gt = read_labels(fs::path(gt_dir) / rel, &classes).semantic;
        ConfusionMatrix m(classes.size());
        if (!fov_dir.empty()) {
          auto mask_path = fs::path(fov_dir) / rel;
          mask_path.replace_extension(".ptns");
          const auto t = read_tensor(mask_path);
          const auto mask = FovMask::from_flags(t.payload);
          m.accumulate(gt, pred, &mask);
        } else {
          m.accumulate(gt, pred);
        }
        matrices.push_back(std::move(m));
      }
      if (matrices.empty()) throw Error(ErrorKind::EmptyInput, "no .label files in " + pred_dir);
      const auto r = report(matrices);
      std::cout << r.text(classes);
      if (!csv_out.empty()) write_text_atomic(csv_out, r.csv(classes));
    }
  } else if (tta_emit->parsed()) {
    const auto cloud = read_cloud_bin(emit_cloud);
    const auto spec = default_tta_spec();
    const auto variants = emit_variants(cloud, spec);
    std::vector<std::string> files;
    for (std::size_t i = 0; i < variants.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "variant_%02zu.bin", i);
      write_cloud_bin(variants[i], fs::path(emit_out) / name);
      files.emplace_back(name);
    }
    write_text_atomic(fs::path(emit_out) / "manifest.json",
                      variant_manifest(spec, files).dump(2) + "\n");
    std::printf("tta: wrote %zu variants of %zu points\n", variants.size(), cloud.size());
  } else if (tta_agg->parsed()) {
    std::vector<PerPointProbs> inputs;
    for (const auto& f : agg_inputs) inputs.push_back(tensor_to_probs(read_tensor(f)));
    write_tensor(probs_to_tensor(aggregate_tta(inputs)), agg_out);
    std::printf("tta: aggregated %zu variants\n", inputs.size());
  } else if (soup->parsed()) {
    const auto command = split_words(soup_cmd);
    std::vector<WeightVector> candidates;
    for (const auto& f : soup_candidates) {
      const auto t = read_tensor(f);
      if (t.dims.size() != 1 || t.dtype != DType::Float32) {
        throw Error(ErrorKind::DimMismatch, f + ": expected a 1-D float32 tensor");
      }
      candidates.push_back(t.to_f32());
    }
    const auto scratch = fs::path(soup_out).string() + ".eval.ptns";
    const SoupMetric metric = [&](const WeightVector& w) {
      write_tensor(Tensor::from_f32({static_cast<std::uint32_t>(w.size())}, w), scratch);
      return run_eval_command(command, scratch);
    };
    SoupResult result;
    try {
      result = greedy_soup(candidates, metric);
    } catch (...) {
      std::error_code ec;
      fs::remove(scratch, ec);
      throw;
    }
    std::error_code ec;
    fs::remove(scratch, ec);
    write_tensor(Tensor::from_f32({static_cast<std::uint32_t>(result.weights.size())},
                                  result.weights),
                 soup_out);
    std::string log = "candidate,file,solo_metric,soup_metric,accepted\n";
    for (const auto& step : result.log) {
      log += std::to_string(step.candidate) + "," + soup_candidates[step.candidate] + "," +
             format_double(step.solo_metric) + "," + format_double(step.soup_metric) + "," +
             (step.accepted ? "1" : "0") + "\n";
    }
    if (!soup_log.empty()) write_text_atomic(soup_log, log);
    std::cout << log;
    std::printf("soup: %zu of %zu candidates, metric %s\n", result.included.size(),
                candidates.size(), format_double(result.metric).c_str());
  } else if (synth->parsed()) {
    if (!(synth_opts.border_rate >= 0 && synth_opts.border_rate <= 1 &&
          synth_opts.body_rate >= 0 && synth_opts.body_rate <= 1)) {
      throw Error(ErrorKind::Config, "error rates must lie in [0, 1]");
    }
    write_synthetic_dataset(synth_out, synth_opts);
    std::printf("synth: wrote %zu scans to %s\n", synth_opts.scenes, synth_out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "lidarlift: " << e.what() << '\n';
    return e.kind() == ErrorKind::Config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "lidarlift: " << e.what() << '\n';
    return 1;
  }
}
