#include "tosc/geom/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "tosc/common/error.hpp"

namespace tosc::io {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

Scalar parse_scalar(const std::string& t, const std::filesystem::path& path) {
  if (t == "char" || t == "int8") return Scalar::I8;
  if (t == "uchar" || t == "uint8") return Scalar::U8;
  if (t == "short" || t == "int16") return Scalar::I16;
  if (t == "ushort" || t == "uint16") return Scalar::U16;
  if (t == "int" || t == "int32") return Scalar::I32;
  if (t == "uint" || t == "uint32") return Scalar::U32;
  if (t == "float" || t == "float32") return Scalar::F32;
  if (t == "double" || t == "float64") return Scalar::F64;
  fail(ErrorCode::Io, "ply: unsupported property type '" + t + "' in " + path.string());
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::I8: case Scalar::U8: return 1;
    case Scalar::I16: case Scalar::U16: return 2;
    case Scalar::I32: case Scalar::U32: case Scalar::F32: return 4;
    case Scalar::F64: return 8;
  }
  return 0;
}

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double decode(Scalar s, const char* p) {
  switch (s) {
    case Scalar::I8: return load<std::int8_t>(p);
    case Scalar::U8: return load<std::uint8_t>(p);
    case Scalar::I16: return load<std::int16_t>(p);
    case Scalar::U16: return load<std::uint16_t>(p);
    case Scalar::I32: return load<std::int32_t>(p);
    case Scalar::U32: return load<std::uint32_t>(p);
    case Scalar::F32: return load<float>(p);
    case Scalar::F64: return load<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  Scalar type;
};

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open file: " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write file: " + path.string());
  return out;
}

}  // namespace

void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format) {
  cloud.validate();
  auto out = open_out(path);
  out << "ply\n"
      << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.labeled()) out << "property int region\n";
  out << "end_header\n";
  if (format == PlyFormat::Ascii) {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      out << p.x() << ' ' << p.y() << ' ' << p.z();
      if (cloud.labeled()) out << ' ' << cloud.labels[i];
      out << '\n';
    }
  } else {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3& p = cloud.points[i];
      const double xyz[3] = {p.x(), p.y(), p.z()};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
      if (cloud.labeled()) {
        const std::int32_t l = cloud.labels[i];
        out.write(reinterpret_cast<const char*>(&l), sizeof(l));
      }
    }
  }
  if (!out) fail(ErrorCode::Io, "write failed: " + path.string());
}

PointCloud read_ply(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) fail(ErrorCode::Io, "ply: missing magic in " + path.string());

  bool ascii = false;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::size_t count = 0;
  std::vector<Property> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") ascii = true;
      else if (fmt != "binary_little_endian")
        fail(ErrorCode::Io, "ply: unsupported format '" + fmt + "' in " + path.string());
    } else if (kw == "element") {
      std::string name;
      ls >> name;
      if (name == "vertex") {
        if (seen_vertex) fail(ErrorCode::Io, "ply: duplicate vertex element");
        ls >> count;
        in_vertex = seen_vertex = true;
      } else {
        if (!seen_vertex) fail(ErrorCode::Io, "ply: vertex element must come first in " + path.string());
        in_vertex = false;
      }
    } else if (kw == "property" && in_vertex) {
      std::string type, name;
      ls >> type;
      if (type == "list") fail(ErrorCode::Io, "ply: list property on vertex element");
      ls >> name;
      props.push_back({name, parse_scalar(type, path)});
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!seen_vertex) fail(ErrorCode::Io, "ply: no vertex element in " + path.string());

  int ix = -1, iy = -1, iz = -1, ir = -1;
  for (int i = 0; i < static_cast<int>(props.size()); ++i) {
    if (props[i].name == "x") ix = i;
    if (props[i].name == "y") iy = i;
    if (props[i].name == "z") iz = i;
    if (props[i].name == "region") ir = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) fail(ErrorCode::Io, "ply: missing x/y/z in " + path.string());

  PointCloud cloud;
  cloud.points.resize(count);
  if (ir >= 0) cloud.labels.resize(count);
  std::vector<double> values(props.size());
  std::size_t stride = 0;
  for (const auto& p : props) stride += scalar_size(p.type);
  std::vector<char> buf(stride);
  for (std::size_t v = 0; v < count; ++v) {
    if (ascii) {
      for (auto& x : values) {
        if (!(in >> x)) fail(ErrorCode::Io, "ply: truncated ascii body in " + path.string());
      }
    } else {
      if (!in.read(buf.data(), static_cast<std::streamsize>(stride)))
        fail(ErrorCode::Io, "ply: truncated binary body in " + path.string());
      std::size_t off = 0;
      for (std::size_t i = 0; i < props.size(); ++i) {
        values[i] = decode(props[i].type, buf.data() + off);
        off += scalar_size(props[i].type);
      }
    }
    cloud.points[v] = Vec3(values[ix], values[iy], values[iz]);
    if (ir >= 0) cloud.labels[v] = static_cast<RegionId>(values[ir]);
  }
  cloud.validate();
  return cloud;
}

void write_obj(const std::filesystem::path& path, const PointCloud& cloud) {
  cloud.validate();
  auto out = open_out(path);
  out << std::setprecision(17);
  for (const auto& p : cloud.points) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  if (!out) fail(ErrorCode::Io, "write failed: " + path.string());
}

PointCloud read_obj(const std::filesystem::path& path) {
  auto in = open_in(path);
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2 || line[0] != 'v' || (line[1] != ' ' && line[1] != '\t')) continue;
    std::istringstream ls(line.substr(2));
    double x, y, z;
    if (!(ls >> x >> y >> z)) fail(ErrorCode::Io, "obj: malformed vertex in " + path.string());
    cloud.points.emplace_back(x, y, z);
  }
  cloud.validate();
  return cloud;
}

PointCloud read_cloud(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ply") return read_ply(path);
  if (ext == ".obj") return read_obj(path);
  fail(ErrorCode::Io, "unsupported geometry extension: " + path.string());
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  const auto ext = path.extension().string();
  if (ext == ".ply") return write_ply(path, cloud);
  if (ext == ".obj") return write_obj(path, cloud);
  fail(ErrorCode::Io, "unsupported geometry extension: " + path.string());
}

}  // namespace tosc::io
