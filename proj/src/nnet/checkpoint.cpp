#include "tosc/nnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "tosc/common/error.hpp"

namespace tosc::nn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'T', 'O', 'S', 'C', 'N', 'N', '0', '1'};
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

struct Parsed {
  json header;
  std::uint64_t payload_offset = 0;
};

Parsed read_header(std::ifstream& in, const fs::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    fail(ErrorCode::Io, "not a checkpoint (bad magic): " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 28)) fail(ErrorCode::Io, "corrupt checkpoint header: " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) fail(ErrorCode::Io, "truncated checkpoint header: " + path.string());
  Parsed p;
  try {
    p.header = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, "corrupt checkpoint header: " + path.string() + ": " + e.what());
  }
  p.payload_offset = 16 + len;
  return p;
}

}  // namespace

void save_checkpoint(const fs::path& path, const ParamSet& params, const std::string& meta_json) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : params.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"shape", {t.value.rows(), t.value.cols()}},
                       {"dtype", "float64"},
                       {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.value.size()) * sizeof(double);
  }
  json header = {{"format", "tosc-nn-checkpoint"},
                 {"version", 1},
                 {"step", params.step()},
                 {"seed", params.seed()},
                 {"meta", json::parse(meta_json)},
                 {"tensors", tensors}};
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write checkpoint " + tmp.string());
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(len));
    for (const auto& t : params.tensors()) {
      // Column-major storage of the Eigen matrix, as-is.
      out.write(reinterpret_cast<const char*>(t.value.data()),
                static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    }
    if (!out) fail(ErrorCode::Io, "checkpoint write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string load_checkpoint(const fs::path& path, ParamSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open checkpoint " + path.string());
  const Parsed p = read_header(in, path);
  const json& tensors = p.header.at("tensors");
  if (tensors.size() != params.tensors().size()) {
    fail(ErrorCode::InvalidArgument, "checkpoint tensor count does not match the model");
  }
  std::size_t i = 0;
  for (auto& t : params.tensors()) {
    const json& rec = tensors.at(i++);
    const auto shape = rec.at("shape").get<std::vector<long>>();
    if (rec.at("name").get<std::string>() != t.name || shape.size() != 2 ||
        shape[0] != t.value.rows() || shape[1] != t.value.cols() ||
        rec.at("dtype").get<std::string>() != "float64") {
      fail(ErrorCode::InvalidArgument, "checkpoint tensor mismatch at " + t.name);
    }
    in.seekg(static_cast<std::streamoff>(p.payload_offset + rec.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    if (!in) fail(ErrorCode::Io, "truncated checkpoint payload: " + path.string());
  }
  params.set_step(p.header.at("step").get<long>());
  return p.header.at("meta").dump();
}

std::string read_checkpoint_meta(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open checkpoint " + path.string());
  return read_header(in, path).header.at("meta").dump();
}

}  // namespace tosc::nn
