#pragma once

#include <filesystem>

#include "tosc/geom/point_cloud.hpp"

namespace tosc::io {

enum class PlyFormat { BinaryLittleEndian, Ascii };

/// Vertex positions (x, y, z) plus an optional int property `region`.
/// Positions are written as double so round trips are exact.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
               PlyFormat format = PlyFormat::BinaryLittleEndian);
PointCloud read_ply(const std::filesystem::path& path);

/// OBJ vertices only; faces and other records are ignored when reading.
void write_obj(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_obj(const std::filesystem::path& path);

/// Dispatch on the file extension (.ply / .obj).
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace tosc::io
