#pragma once

#include <string>

#include <json.hpp>

#include "defproj/encoder.hpp"
#include "defproj/entry_matrix.hpp"

namespace defproj {

// Self-describing binary container: magic, format version, a JSON manifest
// (config plus a tensor directory), then raw little-endian payload. Values
// round-trip bitwise.
inline constexpr int kContainerVersion = 1;

void save_encoder(const std::string& path, const EncoderParams& params);
EncoderParams load_encoder(const std::string& path);

void save_entry_matrix(const std::string& path,
                       const EntryEmbeddingMatrix& matrix);
EntryEmbeddingMatrix load_entry_matrix(const std::string& path);

// manifest only, for inspection
nlohmann::json read_container_manifest(const std::string& path);

}  // namespace defproj
