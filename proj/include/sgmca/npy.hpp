#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sgmca/matrix.hpp"

namespace sgmca {

/// NPY v1.0, dtype <f8, C order. 1-D files load as a single-row Matrix.
void write_npy(const std::string& path, const Matrix& m);
Matrix read_npy(const std::string& path);

/// SHA-256 as a lowercase hex digest.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_file(const std::string& path);

/// JSON manifest listing each file (relative to the manifest's directory)
/// with size and SHA-256, plus caller-supplied metadata under "meta".
void write_manifest(const std::string& path, const std::vector<std::string>& files,
                    const nlohmann::json& meta);

} // namespace sgmca
