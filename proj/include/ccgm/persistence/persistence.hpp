#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ccgm/core/errors.hpp"

namespace ccgm::persist {

// Registry of artifact magics. Every on-disk artifact starts with one of
// these 5-byte tags.
inline constexpr std::string_view kDatasetMagic = "CCGM1";     // dataset / sample tensor block
inline constexpr std::string_view kNiqeModelMagic = "NIQE1";   // fitted NIQE model
inline constexpr std::string_view kPoolMagic = "POOL1";        // Type II negative pool
inline constexpr std::string_view kCheckpointMagic = "CKPT1";  // trainer checkpoint
inline constexpr std::string_view kEvalModelMagic = "EVLM1";   // evaluation models

inline constexpr std::uint32_t kFormatVersion = 1;

std::string artifact_kind_name(std::string_view magic);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

// Single-file container:
//   magic[5] | u32 version | u64 manifest_len | manifest JSON |
//   u64 payload_len | payload | u64 fnv1a64(payload)
// All integers little-endian. The manifest's "tensors" array indexes the
// payload by (name, dtype, shape, offset).
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::string_view magic, std::uint32_t version = kFormatVersion);

    nlohmann::json& manifest() { return manifest_; }

    void add_f32(const std::string& name, std::span<const float> data,
                 std::vector<std::size_t> shape);
    void add_f64(const std::string& name, std::span<const double> data,
                 std::vector<std::size_t> shape);
    void add_u64(const std::string& name, std::span<const std::uint64_t> data);

    // Serializes to memory; identical artifacts yield identical bytes.
    std::vector<std::uint8_t> bytes() const;

    // Writes via temp-then-rename.
    void write(const std::filesystem::path& path) const;

private:
    void add_raw(const std::string& name, const void* data, std::size_t byte_size,
                 const char* dtype, std::vector<std::size_t> shape);

    std::string magic_;
    std::uint32_t version_;
    nlohmann::json manifest_;
    nlohmann::json tensors_ = nlohmann::json::array();
    std::vector<std::uint8_t> payload_;
};

class ArtifactReader {
public:
    static ArtifactReader open(const std::filesystem::path& path, std::string_view expected_magic);
    static ArtifactReader from_bytes(std::vector<std::uint8_t> bytes, std::string_view expected_magic,
                                     const std::string& origin = "<memory>");

    const nlohmann::json& manifest() const { return manifest_; }
    std::uint32_t version() const { return version_; }

    bool has(const std::string& name) const;
    std::vector<std::size_t> shape(const std::string& name) const;
    std::vector<float> f32(const std::string& name) const;
    std::vector<double> f64(const std::string& name) const;
    std::vector<std::uint64_t> u64(const std::string& name) const;

private:
    const nlohmann::json& entry(const std::string& name) const;

    nlohmann::json manifest_;
    std::uint32_t version_ = 0;
    std::vector<std::uint8_t> payload_;
};

// Plain tensor block used inside dataset cache directories:
//   magic[5] "CCGM1" | u32 version | u32 ndims | u64 dims[ndims] |
//   float32 data | u64 fnv1a64(data)
void write_tensor_block(const std::filesystem::path& path, std::span<const float> data,
                        std::span<const std::size_t> dims);
std::pair<std::vector<float>, std::vector<std::size_t>> read_tensor_block(
    const std::filesystem::path& path);

// Atomic small-file helpers (temp-then-rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ccgm::persist
