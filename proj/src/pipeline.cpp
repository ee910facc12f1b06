#include "lidarlift/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "lidarlift/error.hpp"
#include "lidarlift/kdtree.hpp"
#include "lidarlift/parallel.hpp"
#include "lidarlift/projection.hpp"
#include "lidarlift/refinement.hpp"
#include "lidarlift/rng.hpp"
#include "lidarlift/synthetic.hpp"

namespace fs = std::filesystem;

namespace lidarlift {

namespace {

FovMask read_mask(const fs::path& path) {
  const auto t = read_tensor(path);
  if (t.dtype != DType::UInt8 || t.dims.size() != 1) {
    throw Error(ErrorKind::DimMismatch, path.string() + ": expected a 1-D uint8 mask");
  }
  return FovMask::from_flags(t.payload);
}

void write_mask(const FovMask& mask, const fs::path& path) {
  write_tensor(Tensor::from_u8({static_cast<std::uint32_t>(mask.size())}, mask.inside), path);
}

std::vector<float> read_vector_f32(const fs::path& path) {
  const auto t = read_tensor(path);
  if (t.dtype != DType::Float32 || t.dims.size() != 1) {
    throw Error(ErrorKind::DimMismatch, path.string() + ": expected a 1-D float32 tensor");
  }
  return t.to_f32();
}

void expect_points(std::size_t got, std::size_t want, const fs::path& path) {
  if (got != want) {
    throw Error(ErrorKind::SizeMismatch, path.string() + ": " + std::to_string(got) +
                                             " entries for a " + std::to_string(want) +
                                             "-point cloud");
  }
}

}  // namespace

fs::path DatasetLayout::sequence_dir(const std::string& seq) const {
  return cfg_->dataset_root / "sequences" / seq;
}
fs::path DatasetLayout::cloud(const ScanId& s) const {
  return sequence_dir(s.sequence) / "velodyne" / (s.frame + ".bin");
}
fs::path DatasetLayout::gt_labels(const ScanId& s) const {
  return sequence_dir(s.sequence) / "labels" / (s.frame + ".label");
}
fs::path DatasetLayout::calib(const std::string& seq) const {
  return sequence_dir(seq) / "calib.txt";
}
fs::path DatasetLayout::probs_2d(const ScanId& s, const std::string& camera) const {
  return sequence_dir(s.sequence) / "probs_2d" / camera / (s.frame + ".ptns");
}
fs::path DatasetLayout::output(const ScanId& s, const std::string& stage,
                               const std::string& extension) const {
  return cfg_->output_root / "sequences" / s.sequence / stage / (s.frame + extension);
}
fs::path DatasetLayout::output_root_file(const std::string& name) const {
  return cfg_->output_root / name;
}

void check_inputs(const PipelineConfig& cfg) {
  cfg.validate();
  if (!fs::is_directory(cfg.dataset_root / "sequences")) {
    throw Error(ErrorKind::Config, "dataset root " + cfg.dataset_root.string() +
                                       " has no sequences/ directory");
  }
  if (!fs::is_regular_file(cfg.class_map)) {
    throw Error(ErrorKind::Config, "class map " + cfg.class_map.string() + " not found");
  }
  if (cfg.label_remap && !fs::is_regular_file(*cfg.label_remap)) {
    throw Error(ErrorKind::Config, "label remap " + cfg.label_remap->string() + " not found");
  }
}

std::vector<ScanId> discover_scans(const PipelineConfig& cfg) {
  std::vector<std::string> sequences = cfg.sequences;
  if (sequences.empty()) {
    const auto root = cfg.dataset_root / "sequences";
    if (fs::is_directory(root)) {
      for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) sequences.push_back(e.path().filename().string());
      }
    }
    std::sort(sequences.begin(), sequences.end());
  }
  std::vector<ScanId> scans;
  DatasetLayout layout(cfg);
  for (const auto& seq : sequences) {
    const auto dir = layout.sequence_dir(seq) / "velodyne";
    if (!fs::is_directory(dir)) {
      throw Error(ErrorKind::Io, "sequence " + seq + " has no velodyne/ directory");
    }
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".bin") {
        scans.push_back({seq, e.path().stem().string()});
      }
    }
  }
  std::sort(scans.begin(), scans.end());
  return scans;
}

StageSummary run_lift(const PipelineConfig& cfg, const std::vector<ScanId>& scans) {
  DatasetLayout layout(cfg);
  std::vector<std::size_t> points(scans.size()), inside(scans.size());
  parallel_for(scans.size(), cfg.jobs, [&](std::size_t i) {
    const auto& scan = scans[i];
    const auto cloud = read_cloud_bin(layout.cloud(scan));
    std::vector<LiftResult> lifts;
    for (const auto& camera : cfg.cameras) {
      const auto map = read_tensor(layout.probs_2d(scan, camera));
      std::optional<ImageSize> size;
      if (map.dims.size() == 3) size = ImageSize{map.dims[1], map.dims[0]};
      const auto rig = read_calib(layout.calib(scan.sequence), calib_key_for_camera(camera), size);
      lifts.push_back(lift_probs(map, cloud, rig, cfg.sampling));
    }
    const auto merged = merge_camera_lifts(lifts);
    write_tensor(probs_to_tensor(merged.probs), layout.output(scan, "lifted", ".ptns"));
    write_mask(merged.mask, layout.output(scan, "fov", ".ptns"));
    points[i] = cloud.size();
    inside[i] = merged.mask.count();
  });
  StageSummary s{scans.size(), 0, 0};
  for (std::size_t i = 0; i < scans.size(); ++i) {
    s.points += points[i];
    s.selected += inside[i];
  }
  return s;
}

StageSummary run_refine(const PipelineConfig& cfg, const std::vector<ScanId>& scans) {
  DatasetLayout layout(cfg);
  std::vector<std::size_t> points(scans.size()), inside(scans.size());
  // Scans run in parallel; within a scan refinement is sequential so the
  // total thread count stays at cfg.jobs.
  RefineOptions options = cfg.refine;
  options.jobs = 1;
  parallel_for(scans.size(), cfg.jobs, [&](std::size_t i) {
    const auto& scan = scans[i];
    const auto cloud = read_cloud_bin(layout.cloud(scan));
    const auto lifted_path = layout.output(scan, "lifted", ".ptns");
    const auto probs = tensor_to_probs(read_tensor(lifted_path));
    const auto mask_path = layout.output(scan, "fov", ".ptns");
    const auto mask = read_mask(mask_path);
    expect_points(probs.num_points, cloud.size(), lifted_path);
    expect_points(mask.size(), cloud.size(), mask_path);

    Refinement result;
    if (mask.count() == 0) {
      result.labels.assign(cloud.size(), kIgnoreId);
      result.confidence.assign(cloud.size(), 0.0F);
      result.probs = PerPointProbs(cloud.size(), probs.num_classes);
    } else {
      const KdTree tree(cloud, mask);
      try {
        result = refine(cfg.scheme, probs, tree, options);
      } catch (const Error& e) {
        throw Error(e.kind(), lifted_path.string() + ": " + e.what());
      }
    }
    write_tensor(probs_to_tensor(result.probs), layout.output(scan, "refined", ".ptns"));
    write_labels(result.labels, layout.output(scan, "refined_labels", ".label"));
    write_tensor(Tensor::from_f32({static_cast<std::uint32_t>(cloud.size())}, result.confidence),
                 layout.output(scan, "confidence", ".ptns"));
    points[i] = cloud.size();
    inside[i] = mask.count();
  });
  StageSummary s{scans.size(), 0, 0};
  for (std::size_t i = 0; i < scans.size(); ++i) {
    s.points += points[i];
    s.selected += inside[i];
  }
  return s;
}

ClassHistogram run_stats(const PipelineConfig& cfg, const std::vector<ScanId>& scans) {
  DatasetLayout layout(cfg);
  const auto classes = read_class_map(cfg.class_map);
  std::vector<ClassHistogram> partial(scans.size(), ClassHistogram(classes.size()));
  parallel_for(scans.size(), cfg.jobs, [&](std::size_t i) {
    const auto labels =
        read_labels(layout.output(scans[i], "refined_labels", ".label"), &classes).semantic;
    partial[i].add(labels);
  });
  ClassHistogram total(classes.size());
  for (const auto& h : partial) total += h;
  write_text_atomic(layout.output_root_file("histogram.csv"), format_histogram_csv(total));
  write_text_atomic(layout.output_root_file("thresholds.csv"),
                    format_thresholds_csv(thresholds_for(total, cfg.threshold)));
  return total;
}

ReductionStats run_threshold(const PipelineConfig& cfg, const std::vector<ScanId>& scans) {
  DatasetLayout layout(cfg);
  const auto classes = read_class_map(cfg.class_map);
  const auto thresholds =
      parse_thresholds_csv(read_text_file(layout.output_root_file("thresholds.csv")));
  if (thresholds.size() != classes.size()) {
    throw Error(ErrorKind::SizeMismatch, "thresholds.csv lists " +
                                             std::to_string(thresholds.size()) +
                                             " classes, class map has " +
                                             std::to_string(classes.size()));
  }
  std::vector<ReductionStats> per_scan(scans.size());
  parallel_for(scans.size(), cfg.jobs, [&](std::size_t i) {
    const auto& scan = scans[i];
    const auto label_path = layout.output(scan, "refined_labels", ".label");
    const auto labels = read_labels(label_path, &classes).semantic;
    const auto conf_path = layout.output(scan, "confidence", ".ptns");
    const auto confidence = read_vector_f32(conf_path);
    expect_points(confidence.size(), labels.size(), conf_path);
    const auto result = apply_threshold(labels, confidence, thresholds);
    write_labels(result.labels, layout.output(scan, "pseudo", ".label"));
    per_scan[i] = {result.removed, result.considered};
  });

  std::string csv = "sequence,frame,removed,considered,reduction\n";
  ReductionStats pooled;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    pooled += per_scan[i];
    csv += scans[i].sequence + "," + scans[i].frame + "," + std::to_string(per_scan[i].removed) +
           "," + std::to_string(per_scan[i].considered) + "," +
           format_double(per_scan[i].fraction()) + "\n";
  }
  csv += "total,," + std::to_string(pooled.removed) + "," + std::to_string(pooled.considered) +
         "," + format_double(pooled.fraction()) + "\n";
  write_text_atomic(layout.output_root_file("reduction.csv"), csv);
  return pooled;
}

StageSummary run_slice(const PipelineConfig& cfg, const std::vector<ScanId>& scans,
                       const std::string& label_stage) {
  DatasetLayout layout(cfg);
  std::vector<std::size_t> points(scans.size()), inside(scans.size());
  parallel_for(scans.size(), cfg.jobs, [&](std::size_t i) {
    const auto& scan = scans[i];
    const auto cloud = read_cloud_bin(layout.cloud(scan));
    const auto mask = read_mask(layout.output(scan, "fov", ".ptns"));
    const auto sliced = slice_cloud(cloud, mask);
    write_cloud_bin(sliced.cloud, layout.output(scan, "sliced/velodyne", ".bin"));
    write_tensor(Tensor::from_u32({static_cast<std::uint32_t>(sliced.index_map.size())},
                                  sliced.index_map),
                 layout.output(scan, "sliced/index", ".ptns"));
    const auto label_path = label_stage == "gt" ? layout.gt_labels(scan)
                                                : layout.output(scan, label_stage, ".label");
    if (fs::exists(label_path)) {
      const auto labels = read_labels(label_path).semantic;
      expect_points(labels.size(), cloud.size(), label_path);
      write_labels(slice_values(labels, mask), layout.output(scan, "sliced/labels", ".label"));
    }
    points[i] = cloud.size();
    inside[i] = mask.count();
  });
  StageSummary s{scans.size(), 0, 0};
  for (std::size_t i = 0; i < scans.size(); ++i) {
    s.points += points[i];
    s.selected += inside[i];
  }
  return s;
}

Report run_eval(const PipelineConfig& cfg, const std::vector<ScanId>& scans,
                const std::string& pred_stage, bool fov_only) {
  DatasetLayout layout(cfg);
  const auto classes = read_class_map(cfg.class_map);
  const LabelRemap remap = cfg.label_remap ? read_label_remap(*cfg.label_remap) : LabelRemap{};
  const LabelRemap* remap_ptr = cfg.label_remap ? &remap : nullptr;
  std::vector<ConfusionMatrix> matrices(scans.size(), ConfusionMatrix(classes.size()));
  parallel_for(scans.size(), cfg.jobs, [&](std::size_t i) {
    const auto& scan = scans[i];
    const auto gt = read_labels(layout.gt_labels(scan), &classes, remap_ptr).semantic;
    const auto pred_path = pred_stage == "gt" ? layout.gt_labels(scan)
                                              : layout.output(scan, pred_stage, ".label");
    const auto pred = pred_stage == "gt"
                          ? gt
                          : read_labels(pred_path, &classes).semantic;
    expect_points(pred.size(), gt.size(), pred_path);
    if (fov_only) {
      const auto mask = read_mask(layout.output(scan, "fov", ".ptns"));
      matrices[i].accumulate(gt, pred, &mask);
    } else {
      matrices[i].accumulate(gt, pred);
    }
  });
  std::vector<ReductionStats> reductions;
  const auto reduction_csv = layout.output_root_file("reduction.csv");
  if (pred_stage == "pseudo" && fs::exists(reduction_csv)) {
    // Last line of reduction.csv holds the pooled totals.
    std::istringstream in(read_text_file(reduction_csv));
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("total,,", 0) != 0) continue;
      std::istringstream fields(line.substr(7));
      ReductionStats s;
      char comma = 0;
      if (fields >> s.removed >> comma >> s.considered && comma == ',') reductions.push_back(s);
    }
  }
  auto r = report(matrices, reductions);
  write_text_atomic(layout.output_root_file("eval_" + pred_stage + (fov_only ? "_fov" : "") + ".csv"),
                    r.csv(classes));
  return r;
}

ReductionStats run_pipeline(const PipelineConfig& cfg, const std::vector<ScanId>& scans) {
  run_lift(cfg, scans);
  run_refine(cfg, scans);
  run_stats(cfg, scans);
  return run_threshold(cfg, scans);
}

void write_synthetic_dataset(const fs::path& root, const SynthOptions& options) {
  const auto classes = synth::class_map();
  write_text_atomic(root / "class_map.csv", format_class_map(classes));
  const auto seq_dir = root / "sequences" / options.sequence;
  const synth::TeacherNoise noise{options.border_rate, options.body_rate, 2};
  std::string calib;
  for (std::size_t i = 0; i < options.scenes; ++i) {
    char frame[16];
    std::snprintf(frame, sizeof(frame), "%06zu", i);
    const auto spec = synth::random_scene_spec(mix_seed(options.seed, i));
    const auto scene = synth::render_scene(spec);
    write_cloud_bin(scene.cloud, seq_dir / "velodyne" / (std::string(frame) + ".bin"));
    write_labels(scene.gt, seq_dir / "labels" / (std::string(frame) + ".label"));
    write_tensor(synth::simulate_teacher(spec, scene, noise, mix_seed(options.seed ^ 0x7EAC4E2ULL, i)),
                 seq_dir / "probs_2d" / "image_2" / (std::string(frame) + ".ptns"));
    write_text_atomic(seq_dir / "scenes" / (std::string(frame) + ".json"),
                      synth::to_json(spec).dump(2) + "\n");
    calib = format_calib(scene.rig, "P2");  // one rig per sequence
  }
  if (!calib.empty()) write_text_atomic(seq_dir / "calib.txt", calib);

  PipelineConfig cfg;
  cfg.dataset_root = ".";
  cfg.output_root = "out";
  cfg.class_map = "class_map.csv";
  cfg.seed = options.seed;
  write_text_atomic(root / "config.json", to_json(cfg).dump(2) + "\n");
}

}  // namespace lidarlift
