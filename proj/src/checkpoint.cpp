#include "glyphforge/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "glyphforge/errors.hpp"

namespace glyphforge {

namespace {

constexpr char kMagic[4] = {'G', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void write_pod(std::ofstream& out, const V& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
void read_pod(std::ifstream& in, V& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
}

}  // namespace

void save_param_blob(const std::string& path, const ParamStore<float>& ps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  std::uint64_t count = static_cast<std::uint64_t>(ps.total_size());
  write_pod(out, count);
  std::uint64_t hash = ps.content_hash();
  write_pod(out, hash);
  out.write(reinterpret_cast<const char*>(ps.raw().data()),
            static_cast<std::streamsize>(count * sizeof(float)));
  if (!out.good()) throw IoFailure("write failed: " + path);
}

void load_param_blob(const std::string& path, ParamStore<float>& ps) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in.good() || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("bad checkpoint magic: " + path);
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t count = 0, hash = 0;
  read_pod(in, count);
  read_pod(in, hash);
  if (count != static_cast<std::uint64_t>(ps.total_size()))
    throw LayoutMismatch("checkpoint parameter count " + std::to_string(count) +
                         " does not match model (" +
                         std::to_string(ps.total_size()) + "): " + path);
  in.read(reinterpret_cast<char*>(ps.raw().data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in.good()) throw IoFailure("truncated checkpoint: " + path);
  if (ps.content_hash() != hash)
    throw HashMismatch("checkpoint content hash mismatch: " + path);
}

void save_adam_state(const std::string& path, ParamStore<float>& ps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write optimizer state: " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  std::uint64_t count = static_cast<std::uint64_t>(ps.total_size());
  write_pod(out, count);
  if (ps.adam_m().size() != ps.total_size()) {
    ps.adam_m().setZero(ps.total_size());
    ps.adam_v().setZero(ps.total_size());
  }
  out.write(reinterpret_cast<const char*>(ps.adam_m().data()),
            static_cast<std::streamsize>(count * sizeof(float)));
  out.write(reinterpret_cast<const char*>(ps.adam_v().data()),
            static_cast<std::streamsize>(count * sizeof(float)));
  if (!out.good()) throw IoFailure("write failed: " + path);
}

void load_adam_state(const std::string& path, ParamStore<float>& ps) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open optimizer state: " + path);
  char magic[4];
  in.read(magic, 4);
  std::uint32_t version = 0;
  read_pod(in, version);
  std::uint64_t count = 0;
  read_pod(in, count);
  if (!in.good() || std::memcmp(magic, kMagic, 4) != 0 || version != kVersion ||
      count != static_cast<std::uint64_t>(ps.total_size()))
    throw HashMismatch("optimizer state does not match model: " + path);
  ps.adam_m().resize(count);
  ps.adam_v().resize(count);
  in.read(reinterpret_cast<char*>(ps.adam_m().data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  in.read(reinterpret_cast<char*>(ps.adam_v().data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (!in.good()) throw IoFailure("truncated optimizer state: " + path);
}

nlohmann::json param_entries_json(const ParamStore<float>& ps) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : ps.entries())
    entries.push_back({{"name", e.name}, {"shape", e.shape}});
  return entries;
}

void check_param_entries(const nlohmann::json& sidecar_entries,
                         const ParamStore<float>& ps, const std::string& what) {
  nlohmann::json mine = param_entries_json(ps);
  if (sidecar_entries != mine)
    throw LayoutMismatch(what + ": checkpoint layout differs from model");
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write: " + path);
  out << j.dump(2) << "\n";
  if (!out.good()) throw IoFailure("write failed: " + path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (in.eof()) break;
  }
  return h;
}

}  // namespace glyphforge
