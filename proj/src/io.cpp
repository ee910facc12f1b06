#include "lidarlift/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "lidarlift/error.hpp"

namespace lidarlift {

namespace {

std::uint32_t load_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

float load_f32(const std::uint8_t* p) { return std::bit_cast<float>(load_u32(p)); }
void store_f32(std::vector<std::uint8_t>& out, float v) {
  store_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    if (s.front() == '+') s.remove_prefix(1);
  }
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<double> parse_floats(std::string_view s, std::size_t line_no) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (true) {
    pos = s.find_first_not_of(" \t\r", pos);
    if (pos == std::string_view::npos) break;
    auto end = s.find_first_of(" \t\r", pos);
    if (end == std::string_view::npos) end = s.size();
    double v = 0.0;
    if (!parse_number(s.substr(pos, end - pos), v) || !std::isfinite(v)) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad number '" +
                                        std::string(s.substr(pos, end - pos)) + "'");
    }
    values.push_back(v);
    pos = end;
  }
  return values;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::Io, "read failed for " + path.string());
  return bytes;
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot rename into " + path.string());
  }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return {buf, ptr};
}

// --- clouds ----------------------------------------------------------------

PointCloud decode_cloud(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorKind::Length,
                "cloud byte length " + std::to_string(bytes.size()) + " not divisible by 16");
  }
  PointCloud cloud;
  cloud.points.resize(bytes.size() / 16);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto* p = bytes.data() + i * 16;
    cloud.points[i] = {load_f32(p), load_f32(p + 4), load_f32(p + 8), load_f32(p + 12)};
  }
  return cloud;
}

std::vector<std::uint8_t> encode_cloud(const PointCloud& cloud) {
  std::vector<std::uint8_t> out;
  out.reserve(cloud.size() * 16);
  for (const auto& p : cloud.points) {
    store_f32(out, p.x);
    store_f32(out, p.y);
    store_f32(out, p.z);
    store_f32(out, p.intensity);
  }
  return out;
}

PointCloud read_cloud_bin(const std::filesystem::path& path) {
  try {
    return decode_cloud(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_cloud_bin(const PointCloud& cloud, const std::filesystem::path& path) {
  write_file_atomic(path, encode_cloud(cloud));
}

// --- class maps ------------------------------------------------------------

ClassMap parse_class_map(std::string_view text) {
  std::vector<std::pair<std::uint32_t, std::string>> rows;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    const auto where = "class map line " + std::to_string(line_no);
    if (comma == std::string_view::npos) throw Error(ErrorKind::Parse, where + ": expected id,name");
    std::uint32_t id = 0;
    if (!parse_number(line.substr(0, comma), id)) {
      throw Error(ErrorKind::Parse, where + ": bad class id");
    }
    const auto name = trim(line.substr(comma + 1));
    if (name.empty()) throw Error(ErrorKind::Parse, where + ": empty class name");
    rows.emplace_back(id, std::string(name));
  }
  if (rows.empty()) throw Error(ErrorKind::Parse, "class map is empty");

  std::vector<std::string> names(rows.size());
  std::vector<bool> seen(rows.size(), false);
  std::set<std::string> unique_names;
  for (const auto& [id, name] : rows) {
    if (id >= rows.size()) {
      throw Error(ErrorKind::Parse, "class ids must be dense 0..C-1; got " + std::to_string(id));
    }
    if (seen[id]) throw Error(ErrorKind::Parse, "duplicate class id " + std::to_string(id));
    if (!unique_names.insert(name).second) {
      throw Error(ErrorKind::Parse, "duplicate class name '" + name + "'");
    }
    seen[id] = true;
    names[id] = name;
  }
  if (names[0] != "unlabeled") {
    throw Error(ErrorKind::Parse, "class 0 must be named 'unlabeled', got '" + names[0] + "'");
  }
  return ClassMap{std::move(names)};
}

ClassMap read_class_map(const std::filesystem::path& path) {
  try {
    return parse_class_map(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_class_map(const ClassMap& map) {
  std::string out;
  for (std::size_t i = 0; i < map.size(); ++i) {
    out += std::to_string(i) + "," + map.names[i] + "\n";
  }
  return out;
}

std::uint32_t LabelRemap::apply(std::uint32_t raw) const noexcept {
  auto it = std::lower_bound(entries.begin(), entries.end(), raw,
                             [](const auto& e, std::uint32_t v) { return e.first < v; });
  return it != entries.end() && it->first == raw ? it->second : kIgnoreId;
}

LabelRemap parse_label_remap(std::string_view text) {
  LabelRemap remap;
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    std::uint32_t raw = 0;
    std::uint32_t train = 0;
    if (comma == std::string_view::npos || !parse_number(line.substr(0, comma), raw) ||
        !parse_number(line.substr(comma + 1), train)) {
      throw Error(ErrorKind::Parse,
                  "remap line " + std::to_string(line_no) + ": expected raw_id,train_id");
    }
    remap.entries.emplace_back(raw, train);
  }
  std::sort(remap.entries.begin(), remap.entries.end());
  for (std::size_t i = 1; i < remap.entries.size(); ++i) {
    if (remap.entries[i].first == remap.entries[i - 1].first) {
      throw Error(ErrorKind::Parse,
                  "duplicate raw id " + std::to_string(remap.entries[i].first) + " in remap");
    }
  }
  return remap;
}

LabelRemap read_label_remap(const std::filesystem::path& path) {
  try {
    return parse_label_remap(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

// --- labels ----------------------------------------------------------------

LabelFile decode_labels(std::span<const std::uint8_t> bytes, const ClassMap* map,
                        const LabelRemap* remap) {
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorKind::Length,
                "label byte length " + std::to_string(bytes.size()) + " not divisible by 4");
  }
  const std::size_t n = bytes.size() / 4;
  LabelFile out;
  out.semantic.resize(n);
  out.instance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t word = load_u32(bytes.data() + i * 4);
    std::uint32_t cls = word & 0xFFFFU;
    if (remap != nullptr) cls = remap->apply(cls);
    if (map != nullptr && !map->contains(cls)) {
      throw Error(ErrorKind::UnknownClass,
                  "point " + std::to_string(i) + " has class " + std::to_string(cls) +
                      " outside the class map (C=" + std::to_string(map->size()) + ")");
    }
    out.semantic[i] = cls;
    out.instance[i] = static_cast<std::uint16_t>(word >> 16);
  }
  return out;
}

std::vector<std::uint8_t> encode_labels(const Labels& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(labels.size() * 4);
  for (auto l : labels) store_u32(out, l & 0xFFFFU);
  return out;
}

LabelFile read_labels(const std::filesystem::path& path, const ClassMap* map,
                      const LabelRemap* remap) {
  try {
    return decode_labels(read_file(path), map, remap);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_labels(const Labels& labels, const std::filesystem::path& path) {
  write_file_atomic(path, encode_labels(labels));
}

// --- calibration -----------------------------------------------------------

CalibrationRig parse_calib(std::string_view text, std::string_view camera_key,
                           std::optional<ImageSize> fallback_size) {
  std::optional<std::vector<double>> projection;
  std::optional<std::vector<double>> velo_to_cam;
  std::optional<std::vector<double>> size;

  // "P2" pairs with "S2" (compact) or "S_02" (KITTI raw style).
  std::string size_key = "S";
  std::string size_key_raw = "S_0";
  if (camera_key.size() >= 2) {
    size_key += camera_key.substr(1);
    size_key_raw += camera_key.substr(1);
  }

  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorKind::Parse, "calib line " + std::to_string(line_no) + ": missing ':'");
    }
    const auto key = trim(line.substr(0, colon));
    const auto rest = line.substr(colon + 1);
    if (key == camera_key) {
      projection = parse_floats(rest, line_no);
    } else if (key == "Tr" || key == "Tr_velo_to_cam") {
      velo_to_cam = parse_floats(rest, line_no);
    } else if (key == size_key || key == size_key_raw) {
      size = parse_floats(rest, line_no);
    }
  }

  if (!projection) throw Error(ErrorKind::Parse, "missing '" + std::string(camera_key) + ":' line");
  if (!velo_to_cam) throw Error(ErrorKind::Parse, "missing 'Tr:' line");
  if (projection->size() != 12) {
    throw Error(ErrorKind::Parse, std::string(camera_key) + ": expected 12 floats, got " +
                                      std::to_string(projection->size()));
  }
  if (velo_to_cam->size() != 12) {
    throw Error(ErrorKind::Parse,
                "Tr: expected 12 floats, got " + std::to_string(velo_to_cam->size()));
  }

  CalibrationRig rig;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      rig.projection(r, c) = (*projection)[r * 4 + c];
      rig.sensor_to_camera(r, c) = (*velo_to_cam)[r * 4 + c];
    }
  }
  rig.sensor_to_camera.row(3) << 0.0, 0.0, 0.0, 1.0;

  if (size) {
    const auto& s = *size;
    if (s.size() != 2 || s[0] < 1 || s[1] < 1 || s[0] != std::floor(s[0]) ||
        s[1] != std::floor(s[1]) || s[0] > std::numeric_limits<std::uint32_t>::max() ||
        s[1] > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorKind::Parse, size_key + ": expected two positive integers");
    }
    rig.image = {static_cast<std::uint32_t>(s[0]), static_cast<std::uint32_t>(s[1])};
  } else if (fallback_size) {
    rig.image = *fallback_size;
  } else {
    throw Error(ErrorKind::Parse, "no image size: missing '" + size_key + ":' line");
  }
  // Published calibrations are orthonormal to roughly 1e-6 after text rounding.
  if (!rig.is_valid(1e-4)) {
    throw Error(ErrorKind::Parse, "Tr rotation block is not a proper rotation");
  }
  return rig;
}

CalibrationRig read_calib(const std::filesystem::path& path, std::string_view camera_key,
                          std::optional<ImageSize> fallback_size) {
  try {
    return parse_calib(read_text_file(path), camera_key, fallback_size);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_calib(const CalibrationRig& rig, std::string_view camera_key) {
  std::ostringstream out;
  auto row = [&](std::string_view key, auto get) {
    out << key << ':';
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) out << ' ' << format_double(get(r, c));
    }
    out << '\n';
  };
  row(camera_key, [&](int r, int c) { return rig.projection(r, c); });
  row("Tr", [&](int r, int c) { return rig.sensor_to_camera(r, c); });
  out << 'S' << (camera_key.size() >= 2 ? camera_key.substr(1) : std::string_view{}) << ": "
      << rig.image.width << ' ' << rig.image.height << '\n';
  return out.str();
}

// --- tensors ---------------------------------------------------------------

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::UInt8: return 1;
    case DType::UInt32: return 4;
  }
  throw Error(ErrorKind::Parse, "unknown dtype");
}

std::size_t Tensor::element_count() const noexcept {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Tensor Tensor::from_f32(std::vector<std::uint32_t> dims, std::span<const float> values) {
  Tensor t;
  t.dtype = DType::Float32;
  t.dims = std::move(dims);
  if (t.element_count() != values.size()) {
    throw Error(ErrorKind::SizeMismatch, "tensor dims do not match value count");
  }
  t.payload.reserve(values.size() * 4);
  for (float v : values) store_f32(t.payload, v);
  return t;
}

Tensor Tensor::from_u8(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values) {
  Tensor t;
  t.dtype = DType::UInt8;
  t.dims = std::move(dims);
  if (t.element_count() != values.size()) {
    throw Error(ErrorKind::SizeMismatch, "tensor dims do not match value count");
  }
  t.payload.assign(values.begin(), values.end());
  return t;
}

Tensor Tensor::from_u32(std::vector<std::uint32_t> dims, std::span<const std::uint32_t> values) {
  Tensor t;
  t.dtype = DType::UInt32;
  t.dims = std::move(dims);
  if (t.element_count() != values.size()) {
    throw Error(ErrorKind::SizeMismatch, "tensor dims do not match value count");
  }
  t.payload.reserve(values.size() * 4);
  for (auto v : values) store_u32(t.payload, v);
  return t;
}

std::vector<float> Tensor::to_f32() const {
  if (dtype != DType::Float32) throw Error(ErrorKind::DimMismatch, "tensor is not float32");
  std::vector<float> out(payload.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = load_f32(payload.data() + i * 4);
  return out;
}

std::vector<std::uint32_t> Tensor::to_u32() const {
  if (dtype != DType::UInt32) throw Error(ErrorKind::DimMismatch, "tensor is not uint32");
  std::vector<std::uint32_t> out(payload.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = load_u32(payload.data() + i * 4);
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kFixedHeader = 4 + 1 + 1 + 4;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "PTNS", 4) != 0) {
    throw Error(ErrorKind::BadMagic, "missing PTNS magic");
  }
  if (bytes.size() < kFixedHeader) throw Error(ErrorKind::SizeMismatch, "truncated header");
  if (bytes[4] != kTensorVersion) {
    throw Error(ErrorKind::UnsupportedVersion, "version " + std::to_string(bytes[4]));
  }
  const std::uint8_t dtype_code = bytes[5];
  if (dtype_code > static_cast<std::uint8_t>(DType::UInt32)) {
    throw Error(ErrorKind::Parse, "unknown dtype code " + std::to_string(dtype_code));
  }
  Tensor t;
  t.dtype = static_cast<DType>(dtype_code);
  const std::uint32_t ndim = load_u32(bytes.data() + 6);
  if ((bytes.size() - kFixedHeader) / 4 < ndim) {
    throw Error(ErrorKind::SizeMismatch, "truncated dims (ndim=" + std::to_string(ndim) + ")");
  }
  std::size_t count = 1;
  t.dims.resize(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.dims[i] = load_u32(bytes.data() + kFixedHeader + 4 * i);
    if (t.dims[i] != 0 && count > std::numeric_limits<std::size_t>::max() / 8 / t.dims[i]) {
      throw Error(ErrorKind::SizeMismatch, "tensor dims overflow");
    }
    count *= t.dims[i];
  }
  const std::size_t header = kFixedHeader + 4 * static_cast<std::size_t>(ndim);
  const std::size_t expected = count * dtype_size(t.dtype);
  if (bytes.size() - header != expected) {
    throw Error(ErrorKind::SizeMismatch, "payload has " + std::to_string(bytes.size() - header) +
                                             " bytes, dims require " + std::to_string(expected));
  }
  t.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return t;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  if (tensor.payload.size() != tensor.element_count() * dtype_size(tensor.dtype)) {
    throw Error(ErrorKind::SizeMismatch, "tensor payload does not match dims");
  }
  std::vector<std::uint8_t> out{'P', 'T', 'N', 'S', kTensorVersion,
                                static_cast<std::uint8_t>(tensor.dtype)};
  store_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) store_u32(out, d);
  out.insert(out.end(), tensor.payload.begin(), tensor.payload.end());
  return out;
}

Tensor read_tensor(const std::filesystem::path& path) {
  try {
    return decode_tensor(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  write_file_atomic(path, encode_tensor(tensor));
}

Tensor probs_to_tensor(const PerPointProbs& probs) {
  return Tensor::from_f32({static_cast<std::uint32_t>(probs.num_points),
                           static_cast<std::uint32_t>(probs.num_classes)},
                          probs.values);
}

PerPointProbs tensor_to_probs(const Tensor& tensor) {
  if (tensor.dtype != DType::Float32 || tensor.dims.size() != 2) {
    throw Error(ErrorKind::DimMismatch, "expected an N x C float32 tensor");
  }
  PerPointProbs probs(tensor.dims[0], tensor.dims[1]);
  probs.values = tensor.to_f32();
  for (std::size_t i = 0; i < probs.num_points; ++i) {
    const float* r = probs.row(i);
    bool any = false;
    for (std::size_t c = 0; c < probs.num_classes; ++c) any = any || r[c] != 0.0F;
    probs.masked[i] = any ? 0 : 1;
  }
  return probs;
}

}  // namespace lidarlift
