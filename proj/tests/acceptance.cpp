// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lidarlift/error.hpp"
#include "lidarlift/evaluation.hpp"
#include "lidarlift/io.hpp"
#include "lidarlift/pipeline.hpp"
#include "lidarlift/projection.hpp"
#include "lidarlift/refinement.hpp"
#include "lidarlift/rng.hpp"
#include "lidarlift/synthetic.hpp"
#include "lidarlift/thresholding.hpp"
#include "lidarlift/tta.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;
using namespace lidarlift;

namespace {

const fs::path kWork = fs::temp_directory_path() / "lidarlift_acceptance";

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (limit_s > 0 && secs > limit_s) {
    out.pass = false;
    out.detail += " (over the " + format_double(limit_s) + " s limit)";
  }
  if (!out.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", id, name,
              out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

Outcome thresholds_match_scalar_formula() {
  Rng rng(1);
  double worst = 0.0;
  bool ends_exact = true;
  for (int trial = 0; trial < 200; ++trial) {
    ClassHistogram h(2 + rng.below(20));
    for (auto& c : h.counts) c = rng.uniform() < 0.25 ? 0 : rng.below(1'000'000);
    h.counts[1 + rng.below(h.num_classes() - 1)] += 1;
    const double a = rng.uniform();
    const double b = rng.uniform();
    const ThresholdConfig cfg{std::min(a, b), std::max(a, b), ThresholdMode::ClassBalanced};
    const auto tau = class_thresholds(h, cfg);
    const double max = static_cast<double>(h.max_count());
    for (std::size_t i = 1; i < tau.size(); ++i) {
      const double want =
          oracle::class_threshold(static_cast<double>(h.counts[i]), max, cfg.tau_min, cfg.tau_max);
      worst = std::max(worst, std::abs(tau[i] - want));
      if (h.counts[i] == h.max_count() && tau[i] != cfg.tau_max) ends_exact = false;
      if (h.counts[i] == 0 && tau[i] != cfg.tau_min) ends_exact = false;
    }
  }
  return {worst <= 1e-12 && ends_exact,
          "max |diff| " + format_double(worst) + ", end points exact: " +
              (ends_exact ? "yes" : "no")};
}

// --- 2 ---------------------------------------------------------------------

Outcome refinement_matches_brute_force() {
  Rng rng(2);
  std::size_t compared = 0;
  std::size_t mismatched = 0;
  for (int cloud_id = 0; cloud_id < 50; ++cloud_id) {
    const std::size_t n = 30 + rng.below(471);
    const std::size_t classes = 2 + rng.below(6);
    PointCloud cloud;
    PerPointProbs probs(n, classes);
    std::vector<std::uint8_t> flags(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool snap = rng.uniform() < 0.3;  // exact ties
      auto coord = [&](double lo, double hi) {
        const double v = rng.uniform(lo, hi);
        return static_cast<float>(snap ? std::round(v) : v);
      };
      cloud.points.push_back({coord(-8, 8), coord(-8, 8), coord(-2, 2), 0});
      flags[i] = i == 0 || rng.uniform() < 0.85;
      if (!flags[i]) continue;
      probs.masked[i] = 0;
      double sum = 0;
      for (std::size_t c = 0; c < classes; ++c) sum += probs.row(i)[c] = float(rng.uniform());
      for (std::size_t c = 0; c < classes; ++c) probs.row(i)[c] = float(probs.row(i)[c] / sum);
    }
    const auto mask = FovMask::from_flags(flags);
    const KdTree tree(cloud, mask);
    for (std::size_t k : {1, 3, 19, 23}) {
      if (k > tree.size()) continue;
      RefineOptions opt;
      opt.k = k;
      const auto maj = refine_majority(probs, tree, opt);
      const auto dist = refine_distance_weighted(probs, tree, opt);
      const auto conf = refine_confidence_avg(probs, tree, opt);
      const auto o_maj = oracle::refine(oracle::Scheme::Majority, cloud, probs, tree.indexed(), k);
      const auto o_dist = oracle::refine(oracle::Scheme::Distance, cloud, probs, tree.indexed(), k);
      const auto o_conf =
          oracle::refine(oracle::Scheme::Confidence, cloud, probs, tree.indexed(), k);
      compared += 3;
      mismatched += maj != o_maj.labels;
      mismatched += dist != o_dist.labels;
      mismatched += conf.labels != o_conf.labels || conf.refined.values != o_conf.refined;
    }
  }
  return {mismatched == 0, std::to_string(compared - mismatched) + "/" + std::to_string(compared) +
                               " scheme runs bit-identical"};
}

// --- corpus shared by 3, 4 and 9 ------------------------------------------

struct Corpus {
  fs::path root;
  PipelineConfig cfg;
  std::vector<ScanId> scans;
};

Corpus make_corpus() {
  Corpus c;
  c.root = kWork / "corpus";
  fs::remove_all(c.root);
  SynthOptions opts;
  opts.scenes = 10;
  opts.border_rate = 0.5;
  write_synthetic_dataset(c.root, opts);
  c.cfg = read_config(c.root / "config.json");
  c.scans = discover_scans(c.cfg);
  return c;
}

/// Argmax of the lifted rows, i.e. the unrefined baseline labels.
Labels lifted_labels(const PipelineConfig& cfg, const ScanId& scan) {
  const DatasetLayout layout(cfg);
  return tensor_to_probs(read_tensor(layout.output(scan, "lifted", ".ptns"))).argmax_labels();
}

FovMask scan_fov(const PipelineConfig& cfg, const ScanId& scan) {
  const DatasetLayout layout(cfg);
  return FovMask::from_flags(read_tensor(layout.output(scan, "fov", ".ptns")).payload);
}

Labels gt_of(const PipelineConfig& cfg, const ScanId& scan) {
  return read_labels(DatasetLayout(cfg).gt_labels(scan)).semantic;
}

double fov_miou(const PipelineConfig& cfg, const std::vector<ScanId>& scans,
                const std::function<Labels(const ScanId&)>& pred) {
  std::vector<ConfusionMatrix> m;
  for (const auto& s : scans) {
    const auto mask = scan_fov(cfg, s);
    m.push_back(lidarlift::accumulate(gt_of(cfg, s), pred(s), 6, &mask));
  }
  return report(m).result.miou;
}

// --- 3 ---------------------------------------------------------------------

Outcome refinement_improves_noisy_lift(Corpus& corpus) {
  auto cfg = corpus.cfg;
  cfg.output_root = kWork / "refine_check";
  fs::remove_all(cfg.output_root);
  run_lift(cfg, corpus.scans);
  const double base = fov_miou(cfg, corpus.scans, [&](const ScanId& s) {
    return lifted_labels(cfg, s);
  });

  cfg.scheme = RefineScheme::ConfidenceAverage;
  cfg.refine.k = 1;
  run_refine(cfg, corpus.scans);
  const double k1 = run_eval(cfg, corpus.scans, "refined_labels", true).result.miou;

  cfg.refine.k = 19;
  std::string others;
  bool others_ok = true;
  for (auto scheme : {RefineScheme::Majority, RefineScheme::DistanceWeighted}) {
    cfg.scheme = scheme;
    run_refine(cfg, corpus.scans);
    const double m = run_eval(cfg, corpus.scans, "refined_labels", true).result.miou;
    others_ok = others_ok && m >= base;
    others += std::string(", ") + std::string(to_string(scheme)) + " K=19 " + fmt(100 * m, 2);
  }
  cfg.scheme = RefineScheme::ConfidenceAverage;
  run_refine(cfg, corpus.scans);
  const double k19 = run_eval(cfg, corpus.scans, "refined_labels", true).result.miou;

  const double gain = 100.0 * (k19 - base);
  return {gain >= 2.0 && k1 == base && others_ok,
          "baseline " + fmt(100 * base, 2) + ", K=1 " + fmt(100 * k1, 2) + ", confidence K=19 " +
              fmt(100 * k19, 2) + " (gain " + fmt(gain, 2) + " points)" + others};
}

// --- 4 ---------------------------------------------------------------------

Outcome thresholding_sweep(Corpus& corpus) {
  auto cfg = corpus.cfg;
  cfg.output_root = kWork / "threshold_check";
  fs::remove_all(cfg.output_root);
  run_lift(cfg, corpus.scans);
  run_refine(cfg, corpus.scans);
  const auto hist = run_stats(cfg, corpus.scans);

  std::uint32_t minority = 1;
  for (std::uint32_t c = 1; c < hist.num_classes(); ++c) {
    if (hist.counts[c] > 0 && (hist.counts[minority] == 0 || hist.counts[c] < hist.counts[minority])) {
      minority = c;
    }
  }

  struct Run {
    double reduction;
    double precision;
    std::uint64_t minority_kept;
  };
  auto run = [&](ThresholdConfig t) {
    cfg.threshold = t;
    write_text_atomic(DatasetLayout(cfg).output_root_file("thresholds.csv"),
                      format_thresholds_csv(thresholds_for(hist, t)));
    const auto r = run_threshold(cfg, corpus.scans);
    std::uint64_t kept = 0;
    std::uint64_t correct = 0;
    std::uint64_t minority_kept = 0;
    for (const auto& s : corpus.scans) {
      const auto pseudo = read_labels(DatasetLayout(cfg).output(s, "pseudo", ".label")).semantic;
      const auto gt = gt_of(cfg, s);
      for (std::size_t i = 0; i < pseudo.size(); ++i) {
        if (pseudo[i] == kIgnoreId) continue;
        ++kept;
        correct += pseudo[i] == gt[i];
        minority_kept += pseudo[i] == minority;
      }
    }
    return Run{r.fraction(), kept == 0 ? 0.0 : double(correct) / double(kept), minority_kept};
  };

  bool monotone = true;
  std::string detail = "tau_min ->(reduction, precision):";
  Run previous{-1.0, -1.0, 0};
  for (double tmin : {0.5, 0.6, 0.7, 0.8}) {
    const auto r = run({tmin, 0.95, ThresholdMode::ClassBalanced});
    monotone = monotone && r.reduction >= previous.reduction && r.precision >= previous.precision;
    detail += " " + fmt(tmin, 1) + "->(" + fmt(r.reduction) + ", " + fmt(r.precision) + ")";
    previous = r;
  }
  const auto balanced = run({kDefaultTauMin, 0.95, ThresholdMode::ClassBalanced});
  const auto fixed = run({0.95, 0.95, ThresholdMode::Static});
  detail += "; minority class " + std::to_string(minority) + " kept " +
            std::to_string(balanced.minority_kept) + " (balanced) vs " +
            std::to_string(fixed.minority_kept) + " (static 0.95)";
  return {monotone && balanced.minority_kept >= fixed.minority_kept, detail};
}

// --- 5 ---------------------------------------------------------------------

Outcome projection_checks() {
  auto rig = CalibrationRig::pinhole(721.5, 609.6, 172.9, {1242, 375});
  // Camera looking along sensor +x.
  rig.sensor_to_camera << 0, -1, 0, 0.02, 0, 0, -1, -0.08, 1, 0, 0, -0.27, 0, 0, 0, 1;

  auto axis = CalibrationRig::pinhole(500, 320, 240, {640, 480});
  const auto p = project_points(PointCloud{{{0, 0, 12, 0}}}, axis);
  const bool axis_ok = p[0].valid && p[0].u == 320.0 && p[0].v == 240.0;

  Rng rng(5);
  PointCloud cloud;
  for (int i = 0; i < 1000; ++i) {
    cloud.points.push_back({static_cast<float>(rng.uniform(-40, 40)),
                            static_cast<float>(rng.uniform(-40, 40)),
                            static_cast<float>(rng.uniform(-3, 3)), 0});
  }
  const auto mask = fov_mask(cloud, rig);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) agree += mask[i] == oracle::in_fov(rig, cloud.points[i]);

  std::vector<std::uint32_t> ids(cloud.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::uint32_t>(i * 31 + 7);
  const auto sliced = slice_cloud(cloud, mask);
  std::vector<std::uint32_t> restored(cloud.size(), 0);
  scatter_values(slice_values(ids, mask), sliced.index_map, restored);
  bool round_trip = sliced.cloud.size() == mask.count();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    round_trip = round_trip && restored[i] == (mask[i] ? ids[i] : 0);
  }
  for (std::size_t k = 0; k < sliced.cloud.size(); ++k) {
    round_trip = round_trip && sliced.cloud.points[k] == cloud.points[sliced.index_map[k]];
  }
  return {axis_ok && agree == cloud.size() && round_trip,
          std::string("principal point ") + (axis_ok ? "ok" : "wrong") + ", frustum agreement " +
              std::to_string(agree) + "/1000 (" + std::to_string(mask.count()) +
              " inside), slice/scatter " + (round_trip ? "ok" : "broken")};
}

// --- 6 ---------------------------------------------------------------------

Outcome evaluation_checks() {
  const auto hand = iou(lidarlift::accumulate({1, 1, 2}, {1, 2, 2}, 3));
  const bool hand_ok = *hand.per_class[1] == 0.5 && *hand.per_class[2] == 0.5 && hand.miou == 0.5;

  Rng rng(6);
  Labels gt(500);
  Labels pred(500);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt[i] = static_cast<std::uint32_t>(rng.below(5));
    pred[i] = rng.uniform() < 0.7 ? gt[i] : static_cast<std::uint32_t>(rng.below(5));
  }
  const bool perfect = iou(lidarlift::accumulate(gt, gt, 5)).miou == 1.0;
  const auto scan = lidarlift::accumulate(gt, pred, 5);
  const double once = report({scan}).result.miou;
  const double thrice = report(std::vector<ConfusionMatrix>(3, scan)).result.miou;
  const bool scale = std::abs(once - thrice) <= 1e-15;
  return {hand_ok && perfect && scale,
          "IoU_A " + fmt(*hand.per_class[1], 2) + ", IoU_B " + fmt(*hand.per_class[2], 2) +
              ", mIoU " + fmt(hand.miou, 2) + "; perfect " + (perfect ? "1.0" : "!= 1.0") +
              "; duplicated scans " + (scale ? "unchanged" : "changed")};
}

// --- 7 ---------------------------------------------------------------------

Outcome soup_checks() {
  const auto toy = greedy_soup({{0.0F}, {1.0F}, {10.0F}},
                               [](const WeightVector& w) { return -std::abs(double(w[0]) - 0.5); });
  const bool trace = toy.weights == WeightVector{0.5F} && toy.log.size() == 3 &&
                     toy.log[0].candidate == 0 && toy.log[1].accepted &&
                     toy.log[2].candidate == 2 && !toy.log[2].accepted;

  Rng rng(7);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + rng.below(8);
    std::vector<double> center(dim);
    for (auto& v : center) v = rng.uniform(-1, 1);
    const auto metric = [&](const WeightVector& w) {
      double s = 0;
      for (std::size_t i = 0; i < dim; ++i) s -= (w[i] - center[i]) * (w[i] - center[i]);
      return s;
    };
    std::vector<WeightVector> cands(1 + rng.below(10), WeightVector(dim));
    double best = -1e300;
    for (auto& c : cands) {
      for (auto& v : c) v = static_cast<float>(rng.uniform(-3, 3));
      best = std::max(best, metric(c));
    }
    ok += greedy_soup(cands, metric).metric >= best;
  }
  return {trace && ok == 100, std::string("toy soup ") + format_double(toy.weights[0]) +
                                  (trace ? " with 10.0 rejected" : " (trace differs)") + "; " +
                                  std::to_string(ok) + "/100 random sets >= best solo"};
}

// --- 8 ---------------------------------------------------------------------

Outcome format_round_trips() {
  const auto dir = kWork / "formats";
  fs::remove_all(dir);
  Rng rng(8);
  int identical = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto n = rng.below(64);
    std::vector<std::uint8_t> first;
    std::vector<std::uint8_t> second;
    const auto a = dir / "a";
    const auto b = dir / "b";
    switch (i % 3) {
      case 0: {
        PointCloud c;
        for (std::uint64_t k = 0; k < n; ++k) {
          c.points.push_back({float(rng.uniform(-90, 90)), float(rng.uniform(-90, 90)),
                              float(rng.uniform(-5, 5)), float(rng.uniform())});
        }
        write_cloud_bin(c, a);
        write_cloud_bin(read_cloud_bin(a), b);
        break;
      }
      case 1: {
        Labels l(n);
        for (auto& v : l) v = static_cast<std::uint32_t>(rng.below(30));
        write_labels(l, a);
        write_labels(read_labels(a).semantic, b);
        break;
      }
      default: {
        std::vector<float> v(n * 3);
        for (auto& x : v) x = float(rng.uniform());
        write_tensor(Tensor::from_f32({static_cast<std::uint32_t>(n), 3}, v), a);
        write_tensor(read_tensor(a), b);
      }
    }
    identical += read_file(a) == read_file(b);
  }

  // Malformed inputs and the error each must produce.
  const auto good = encode_tensor(Tensor::from_u8({2}, std::vector<std::uint8_t>{1, 2}));
  auto patched = [&](std::size_t at, std::uint8_t value) {
    auto b = good;
    b[at] = value;
    return b;
  };
  auto truncated = good;
  truncated.pop_back();
  struct Case {
    const char* name;
    std::function<void()> run;
    ErrorKind want;
  };
  const std::vector<Case> cases{
      {"cloud length", [] { decode_cloud(std::vector<std::uint8_t>(15)); }, ErrorKind::Length},
      {"label length", [] { decode_labels(std::vector<std::uint8_t>(5)); }, ErrorKind::Length},
      {"unknown class",
       [] {
         const auto map = parse_class_map("0,unlabeled\n1,road\n");
         decode_labels(encode_labels({1, 9}), &map);
       },
       ErrorKind::UnknownClass},
      {"tensor magic", [&] { decode_tensor(patched(0, 'Q')); }, ErrorKind::BadMagic},
      {"tensor version", [&] { decode_tensor(patched(4, 9)); }, ErrorKind::UnsupportedVersion},
      {"tensor size", [&] { decode_tensor(truncated); }, ErrorKind::SizeMismatch},
      {"tensor dtype", [&] { decode_tensor(patched(5, 7)); }, ErrorKind::Parse},
      {"calib missing Tr", [] { parse_calib("P2: 1 0 0 0 0 1 0 0 0 0 1 0\n", "P2", ImageSize{4, 4}); },
       ErrorKind::Parse},
      {"calib bad rotation",
       [] {
         parse_calib("P2: 1 0 0 0 0 1 0 0 0 0 1 0\nTr: 1 1 0 0 0 1 0 0 0 0 1 0\n", "P2",
                     ImageSize{4, 4});
       },
       ErrorKind::Parse},
      {"class map gap", [] { parse_class_map("0,unlabeled\n2,car\n"); }, ErrorKind::Parse},
      {"missing file", [&] { read_cloud_bin(dir / "nope.bin"); }, ErrorKind::Io},
  };
  int typed = 0;
  std::string wrong;
  for (const auto& c : cases) {
    try {
      c.run();
      wrong += std::string(" ") + c.name + "(no error)";
    } catch (const Error& e) {
      if (e.kind() == c.want) {
        ++typed;
      } else {
        wrong += std::string(" ") + c.name + "(" + std::string(to_string(e.kind())) + ")";
      }
    } catch (...) {
      wrong += std::string(" ") + c.name + "(untyped)";
    }
  }

  // Random garbage must only ever raise the library error.
  int untyped = 0;
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> bytes(rng.below(80));
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
    if (i % 2 == 0 && bytes.size() >= 10) std::copy(good.begin(), good.begin() + 5, bytes.begin());
    const std::string text(bytes.begin(), bytes.end());
    for (const std::function<void()>& f : std::vector<std::function<void()>>{
             [&] { decode_tensor(bytes); }, [&] { decode_cloud(bytes); },
             [&] { decode_labels(bytes); }, [&] { parse_calib(text, "P2", ImageSize{8, 8}); },
             [&] { parse_class_map(text); }, [&] { parse_label_remap(text); }}) {
      try {
        f();
      } catch (const Error&) {
      } catch (...) {
        ++untyped;
      }
    }
  }
  const bool ok = identical == 1000 && typed == static_cast<int>(cases.size()) && untyped == 0;
  return {ok, std::to_string(identical) + "/1000 byte-identical, " + std::to_string(typed) + "/" +
                  std::to_string(cases.size()) + " malformed cases typed" + wrong + ", " +
                  std::to_string(untyped) + " untyped errors on random input"};
}

// --- 9 ---------------------------------------------------------------------

std::map<std::string, std::vector<std::uint8_t>> snapshot(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

Outcome determinism(Corpus& corpus) {
  std::vector<std::map<std::string, std::vector<std::uint8_t>>> runs;
  std::string labels;
  for (std::size_t jobs : {1, 1, 4, 8}) {
    auto cfg = corpus.cfg;
    cfg.jobs = jobs;
    cfg.output_root = kWork / ("det_" + std::to_string(runs.size()));
    fs::remove_all(cfg.output_root);
    run_pipeline(cfg, corpus.scans);
    run_slice(cfg, corpus.scans, "pseudo");
    run_eval(cfg, corpus.scans, "pseudo", true);
    runs.push_back(snapshot(cfg.output_root));
    labels += (labels.empty() ? "" : ",") + std::to_string(jobs);
  }
  bool same = !runs.front().empty();
  for (const auto& r : runs) same = same && r == runs.front();
  return {same, std::to_string(runs.front().size()) + " output files, jobs {" + labels + "} " +
                    (same ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  fs::create_directories(kWork);
  criterion(1, "class-balanced thresholds", 1.0, thresholds_match_scalar_formula);
  criterion(2, "KNN refinement oracle equivalence", 30.0, refinement_matches_brute_force);

  Corpus corpus;
  auto shared = [&]() -> Corpus& {
    if (corpus.scans.empty()) corpus = make_corpus();
    return corpus;
  };
  criterion(3, "refinement direction on noisy lifts", 120.0,
            [&] { return refinement_improves_noisy_lift(shared()); });
  criterion(4, "thresholding sweep behavior", 0.0, [&] { return thresholding_sweep(shared()); });
  criterion(5, "projection correctness", 1.0, projection_checks);
  criterion(6, "evaluation correctness", 0.0, evaluation_checks);
  criterion(7, "greedy soup", 5.0, soup_checks);
  criterion(8, "format round-trips and malformed input", 0.0, format_round_trips);
  criterion(9, "pipeline determinism across runs and jobs", 0.0,
            [&] { return determinism(shared()); });

  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  fs::remove_all(kWork);
  return failures == 0 ? 0 : 1;
}
