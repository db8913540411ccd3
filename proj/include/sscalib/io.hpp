#pragma once

#include <filesystem>
#include <string>

#include "sscalib/geometry.hpp"
#include "sscalib/point_cloud.hpp"

namespace sscalib {

enum class PlyFormat { kBinaryLittleEndian, kAscii };

/// x, y, z as float32 plus `label` when the cloud has labels and
/// red/green/blue/colored when it has colors.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               PlyFormat format = PlyFormat::kBinaryLittleEndian);

/// Reads the vertex element of an ascii or binary_little_endian PLY. Unknown
/// scalar properties are skipped. Errors carry the byte offset.
PointCloud read_ply(const std::filesystem::path& path);

/// One "x,y,z" row per point; blank lines and lines starting with '#' are
/// skipped, as is a leading non-numeric header row.
PointCloud read_csv(const std::filesystem::path& path);

/// Dispatches on the extension: .ply, otherwise CSV.
PointCloud read_cloud(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

Intrinsics read_intrinsics(const std::filesystem::path& path);
std::string intrinsics_to_json(const Intrinsics& k);
Intrinsics intrinsics_from_json(const std::string& text);

}  // namespace sscalib
