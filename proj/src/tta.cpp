#include "lidarlift/tta.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "lidarlift/error.hpp"
#include "lidarlift/io.hpp"

extern char** environ;

namespace lidarlift {

std::string TtaVariant::name() const {
  switch (kind) {
    case VariantKind::Identity: return "identity";
    case VariantKind::FlipX: return "flip_x";
    case VariantKind::FlipY: return "flip_y";
    case VariantKind::FlipXY: return "flip_xy";
    case VariantKind::Yaw: return "yaw_" + format_double(yaw_degrees);
  }
  return "?";
}

PointCloud TtaVariant::apply(const PointCloud& cloud) const {
  switch (kind) {
    case VariantKind::Identity: return cloud;
    case VariantKind::FlipX: return flip(cloud, FlipAxis::X);
    case VariantKind::FlipY: return flip(cloud, FlipAxis::Y);
    case VariantKind::FlipXY: return flip(cloud, FlipAxis::XY);
    case VariantKind::Yaw: return yaw_rotate(cloud, yaw_degrees * std::numbers::pi / 180.0);
  }
  return cloud;
}

std::vector<TtaVariant> default_tta_spec() {
  std::vector<TtaVariant> spec{{VariantKind::Identity},
                               {VariantKind::FlipX},
                               {VariantKind::FlipY},
                               {VariantKind::FlipXY}};
  for (std::size_t k = 1; k <= kTtaRotations; ++k) {
    spec.push_back({VariantKind::Yaw, kTtaYawStepDegrees * static_cast<double>(k)});
  }
  return spec;
}

bool is_valid_tta_spec(const std::vector<TtaVariant>& spec) {
  if (spec.size() != 12 || spec.front().kind != VariantKind::Identity) return false;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& v = spec[i];
    if (v.kind == VariantKind::Yaw && std::fmod(v.yaw_degrees, 360.0) == 0.0) return false;
    for (std::size_t j = 0; j < i; ++j) {
      if (spec[j] == v) return false;
    }
  }
  return true;
}

std::vector<PointCloud> emit_variants(const PointCloud& cloud,
                                      const std::vector<TtaVariant>& spec) {
  std::vector<PointCloud> out;
  out.reserve(spec.size());
  for (const auto& v : spec) out.push_back(v.apply(cloud));
  return out;
}

nlohmann::json variant_manifest(const std::vector<TtaVariant>& spec,
                                const std::vector<std::string>& files) {
  auto list = nlohmann::json::array();
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& v = spec[i];
    nlohmann::json entry{{"index", i}, {"name", v.name()}};
    switch (v.kind) {
      case VariantKind::Identity: entry["transform"] = "identity"; break;
      case VariantKind::FlipX: entry["transform"] = "flip"; entry["axis"] = "x"; break;
      case VariantKind::FlipY: entry["transform"] = "flip"; entry["axis"] = "y"; break;
      case VariantKind::FlipXY: entry["transform"] = "flip"; entry["axis"] = "xy"; break;
      case VariantKind::Yaw:
        entry["transform"] = "yaw";
        entry["yaw_degrees"] = v.yaw_degrees;
        break;
    }
    if (i < files.size()) entry["file"] = files[i];
    list.push_back(std::move(entry));
  }
  return nlohmann::json{{"variants", std::move(list)}};
}

PerPointProbs aggregate_tta(const std::vector<PerPointProbs>& variants) {
  if (variants.empty()) throw Error(ErrorKind::EmptyInput, "no TTA variants to aggregate");
  const std::size_t n = variants.front().num_points;
  const std::size_t classes = variants.front().num_classes;
  for (std::size_t v = 1; v < variants.size(); ++v) {
    if (variants[v].num_points != n || variants[v].num_classes != classes) {
      throw Error(ErrorKind::DimMismatch,
                  "variant " + std::to_string(v) + " is " +
                      std::to_string(variants[v].num_points) + "x" +
                      std::to_string(variants[v].num_classes) + ", expected " +
                      std::to_string(n) + "x" + std::to_string(classes));
    }
  }
  PerPointProbs out(n, classes);
  std::vector<double> acc(classes);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::size_t seen = 0;
    for (const auto& v : variants) {
      if (v.is_masked(i)) continue;
      ++seen;
      const float* r = v.row(i);
      for (std::size_t c = 0; c < classes; ++c) acc[c] += r[c];
    }
    if (seen == 0) continue;
    out.masked[i] = 0;
    float* dst = out.row(i);
    for (std::size_t c = 0; c < classes; ++c) {
      dst[c] = static_cast<float>(acc[c] / static_cast<double>(seen));
    }
  }
  return out;
}

WeightVector average_weights(const std::vector<WeightVector>& candidates,
                             const std::vector<std::size_t>& members) {
  if (members.empty()) return {};
  const std::size_t len = candidates[members.front()].size();
  std::vector<double> acc(len, 0.0);
  for (auto m : members) {
    const auto& w = candidates[m];
    for (std::size_t j = 0; j < len; ++j) acc[j] += w[j];
  }
  WeightVector out(len);
  const double n = static_cast<double>(members.size());
  for (std::size_t j = 0; j < len; ++j) out[j] = static_cast<float>(acc[j] / n);
  return out;
}

SoupResult greedy_soup(const std::vector<WeightVector>& candidates, const SoupMetric& metric) {
  if (candidates.empty()) throw Error(ErrorKind::EmptyInput, "greedy soup needs a candidate");
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].size() != candidates[0].size()) {
      throw Error(ErrorKind::LengthMismatch,
                  "candidate " + std::to_string(i) + " has " +
                      std::to_string(candidates[i].size()) + " weights, candidate 0 has " +
                      std::to_string(candidates[0].size()));
    }
  }

  SoupResult result;
  std::vector<double> solo(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    solo[i] = metric(candidates[i]);
    ++result.evaluations;
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return solo[a] > solo[b]; });

  result.included.push_back(order.front());
  result.weights = candidates[order.front()];
  result.metric = solo[order.front()];
  result.log.push_back({order.front(), solo[order.front()], result.metric, true});

  for (std::size_t r = 1; r < order.size(); ++r) {
    const std::size_t cand = order[r];
    auto trial_members = result.included;
    trial_members.push_back(cand);
    auto trial = average_weights(candidates, trial_members);
    const double trial_metric = metric(trial);
    ++result.evaluations;
    const bool accept = trial_metric >= result.metric;
    result.log.push_back({cand, solo[cand], trial_metric, accept});
    if (accept) {
      result.included = std::move(trial_members);
      result.weights = std::move(trial);
      result.metric = trial_metric;
    }
  }
  return result;
}

double run_eval_command(const std::vector<std::string>& command, const std::string& weight_path) {
  if (command.empty()) throw Error(ErrorKind::EvalCommandFailed, "empty eval command");
  std::vector<std::string> args = command;
  args.push_back(weight_path);
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  int fds[2];
  if (::pipe(fds) != 0) throw Error(ErrorKind::EvalCommandFailed, "pipe() failed");
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  posix_spawn_file_actions_addclose(&actions, fds[1]);
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw Error(ErrorKind::EvalCommandFailed, "cannot launch '" + command.front() + "'");
  }

  std::string output;
  char buf[4096];
  for (;;) {
    const ssize_t got = ::read(fds[0], buf, sizeof(buf));
    if (got > 0) {
      output.append(buf, static_cast<std::size_t>(got));
    } else if (got == 0 || errno != EINTR) {
      break;
    }
  }
  ::close(fds[0]);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error(ErrorKind::EvalCommandFailed,
                "'" + command.front() + "' exited abnormally on " + weight_path);
  }

  const auto b = output.find_first_not_of(" \t\r\n");
  const auto e = output.find_last_not_of(" \t\r\n");
  double value = 0.0;
  if (b != std::string::npos) {
    const char* first = output.data() + b;
    const char* last = output.data() + e + 1;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec == std::errc{} && ptr == last && std::isfinite(value)) return value;
  }
  throw Error(ErrorKind::EvalCommandFailed,
              "'" + command.front() + "' printed no scalar: '" + output + "'");
}

}  // namespace lidarlift
