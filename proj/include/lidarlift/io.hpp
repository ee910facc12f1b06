#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarlift/camera.hpp"
#include "lidarlift/pointcloud.hpp"

namespace lidarlift {

// --- Velodyne point clouds (.bin): little-endian f32 x, y, z, intensity ---

PointCloud decode_cloud(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_cloud(const PointCloud& cloud);
PointCloud read_cloud_bin(const std::filesystem::path& path);
void write_cloud_bin(const PointCloud& cloud, const std::filesystem::path& path);

// --- Class maps ---

/// Dense class table; id 0 is always "unlabeled".
struct ClassMap {
  std::vector<std::string> names;

  std::size_t size() const noexcept { return names.size(); }
  bool contains(std::uint32_t id) const noexcept { return id < names.size(); }
};

ClassMap parse_class_map(std::string_view text);
ClassMap read_class_map(const std::filesystem::path& path);
std::string format_class_map(const ClassMap& map);

/// Raw dataset id -> dense train id table ("raw_id,train_id" lines). Raw ids
/// not listed map to kIgnoreId.
struct LabelRemap {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;  // sorted by raw id

  std::uint32_t apply(std::uint32_t raw) const noexcept;
};

LabelRemap parse_label_remap(std::string_view text);
LabelRemap read_label_remap(const std::filesystem::path& path);

// --- Labels (.label): little-endian u32, low 16 bits = class, high 16 = instance ---

struct LabelFile {
  Labels semantic;
  std::vector<std::uint16_t> instance;
};

/// When `map` is given, every (remapped) class must be in it, else UnknownClassError.
LabelFile decode_labels(std::span<const std::uint8_t> bytes, const ClassMap* map = nullptr,
                        const LabelRemap* remap = nullptr);
/// Instance bits are written as zero.
std::vector<std::uint8_t> encode_labels(const Labels& labels);
LabelFile read_labels(const std::filesystem::path& path, const ClassMap* map = nullptr,
                      const LabelRemap* remap = nullptr);
void write_labels(const Labels& labels, const std::filesystem::path& path);

// --- Calibration text ("P2:" 3x4, "Tr:" 3x4, optional "S2:" width height) ---

/// `camera_key` names the projection line ("P2"). Image size comes from an
/// "S<n>:" / "S_0<n>:" line when present, else `fallback_size`; with neither
/// a ParseError is raised.
CalibrationRig parse_calib(std::string_view text, std::string_view camera_key = "P2",
                           std::optional<ImageSize> fallback_size = std::nullopt);
CalibrationRig read_calib(const std::filesystem::path& path, std::string_view camera_key = "P2",
                          std::optional<ImageSize> fallback_size = std::nullopt);
std::string format_calib(const CalibrationRig& rig, std::string_view camera_key = "P2");

// --- PTNS tensor container ---
//
// "PTNS" | version u8 (=1) | dtype u8 | ndim u32 | dims u32 x ndim | payload,
// all little-endian, payload row-major.

enum class DType : std::uint8_t { Float32 = 0, UInt8 = 1, UInt32 = 2 };

std::size_t dtype_size(DType dtype);

struct Tensor {
  DType dtype = DType::Float32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const noexcept;

  static Tensor from_f32(std::vector<std::uint32_t> dims, std::span<const float> values);
  static Tensor from_u8(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values);
  static Tensor from_u32(std::vector<std::uint32_t> dims, std::span<const std::uint32_t> values);

  std::vector<float> to_f32() const;
  std::vector<std::uint32_t> to_u32() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline constexpr std::uint8_t kTensorVersion = 1;

Tensor decode_tensor(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& tensor, const std::filesystem::path& path);

/// N x C float32 tensor; masked rows are zero.
Tensor probs_to_tensor(const PerPointProbs& probs);
/// Rows summing to zero are treated as masked.
PerPointProbs tensor_to_probs(const Tensor& tensor);

// --- Filesystem helpers ---

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
/// Writes via a sibling temp file and rename so readers never observe a
/// partially written file. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal text that round-trips `value`.
std::string format_double(double value);

}  // namespace lidarlift
