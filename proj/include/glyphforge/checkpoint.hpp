#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "glyphforge/nn.hpp"

namespace glyphforge {

// Checkpoints are a versioned binary blob (raw float32 parameters behind a
// small header) plus a JSON sidecar describing the architecture. Loading
// verifies entry names/shapes and the content hash.

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_param_blob(const std::string& path, const ParamStore<float>& ps);
// Loads into an already-constructed store with identical entries.
void load_param_blob(const std::string& path, ParamStore<float>& ps);

// Adam moment vectors, for exact training resume.
void save_adam_state(const std::string& path, ParamStore<float>& ps);
void load_adam_state(const std::string& path, ParamStore<float>& ps);

nlohmann::json param_entries_json(const ParamStore<float>& ps);
// Throws LayoutMismatch when the sidecar entry list differs from the store.
void check_param_entries(const nlohmann::json& sidecar_entries,
                         const ParamStore<float>& ps, const std::string& what);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

std::uint64_t file_fnv1a(const std::string& path);

}  // namespace glyphforge
