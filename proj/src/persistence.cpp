#include "ccgm/persistence/persistence.hpp"

#include <cstring>
#include <fstream>

namespace ccgm::persist {

namespace {

void append_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xff));
}

template <typename T>
T read_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size()) throw FormatError("truncated artifact");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        value |= static_cast<T>(bytes[pos + i]) << (8 * i);
    pos += sizeof(T);
    return value;
}

void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw LoadError("cannot open for writing: " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw LoadError("short write: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace

std::string artifact_kind_name(std::string_view magic) {
    if (magic == kDatasetMagic) return "dataset tensor block";
    if (magic == kNiqeModelMagic) return "NIQE model";
    if (magic == kPoolMagic) return "negative pool";
    if (magic == kCheckpointMagic) return "trainer checkpoint";
    if (magic == kEvalModelMagic) return "evaluation model bundle";
    return "unknown artifact";
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

ArtifactWriter::ArtifactWriter(std::string_view magic, std::uint32_t version)
    : magic_(magic), version_(version) {
    if (magic_.size() != 5) throw FormatError("artifact magic must be 5 bytes");
    manifest_ = nlohmann::json::object();
}

void ArtifactWriter::add_raw(const std::string& name, const void* data, std::size_t byte_size,
                             const char* dtype, std::vector<std::size_t> shape) {
    nlohmann::json e;
    e["name"] = name;
    e["dtype"] = dtype;
    e["shape"] = shape;
    e["offset"] = payload_.size();
    e["byte_size"] = byte_size;
    tensors_.push_back(std::move(e));
    append_bytes(payload_, data, byte_size);
}

void ArtifactWriter::add_f32(const std::string& name, std::span<const float> data,
                             std::vector<std::size_t> shape) {
    add_raw(name, data.data(), data.size_bytes(), "f32", std::move(shape));
}

void ArtifactWriter::add_f64(const std::string& name, std::span<const double> data,
                             std::vector<std::size_t> shape) {
    add_raw(name, data.data(), data.size_bytes(), "f64", std::move(shape));
}

void ArtifactWriter::add_u64(const std::string& name, std::span<const std::uint64_t> data) {
    add_raw(name, data.data(), data.size_bytes(), "u64", {data.size()});
}

std::vector<std::uint8_t> ArtifactWriter::bytes() const {
    nlohmann::json manifest = manifest_;
    manifest["tensors"] = tensors_;
    const std::string mjson = manifest.dump();

    std::vector<std::uint8_t> out;
    append_bytes(out, magic_.data(), 5);
    append_le<std::uint32_t>(out, version_);
    append_le<std::uint64_t>(out, mjson.size());
    append_bytes(out, mjson.data(), mjson.size());
    append_le<std::uint64_t>(out, payload_.size());
    append_bytes(out, payload_.data(), payload_.size());
    append_le<std::uint64_t>(out, fnv1a64(payload_));
    return out;
}

void ArtifactWriter::write(const std::filesystem::path& path) const {
    atomic_write(path, bytes());
}

ArtifactReader ArtifactReader::open(const std::filesystem::path& path,
                                    std::string_view expected_magic) {
    return from_bytes(read_all(path), expected_magic, path.string());
}

ArtifactReader ArtifactReader::from_bytes(std::vector<std::uint8_t> bytes,
                                          std::string_view expected_magic,
                                          const std::string& origin) {
    if (bytes.size() < 5) throw FormatError("truncated artifact: " + origin);
    std::string magic(reinterpret_cast<const char*>(bytes.data()), 5);
    if (magic != expected_magic) {
        throw FormatError("bad magic '" + magic + "' in " + origin + ": expected " +
                          std::string(expected_magic) + " (" +
                          artifact_kind_name(expected_magic) + ")");
    }
    std::size_t pos = 5;
    ArtifactReader r;
    r.version_ = read_le<std::uint32_t>(bytes, pos);
    if (r.version_ > kFormatVersion) {
        throw FormatError("artifact version " + std::to_string(r.version_) +
                          " newer than supported " + std::to_string(kFormatVersion) + ": " + origin);
    }
    const auto mlen = read_le<std::uint64_t>(bytes, pos);
    if (pos + mlen > bytes.size()) throw FormatError("truncated manifest: " + origin);
    const std::string mjson(reinterpret_cast<const char*>(bytes.data() + pos), mlen);
    pos += mlen;
    r.manifest_ = nlohmann::json::parse(mjson);
    const auto plen = read_le<std::uint64_t>(bytes, pos);
    if (pos + plen + 8 > bytes.size()) throw FormatError("truncated payload: " + origin);
    r.payload_.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + plen));
    pos += plen;
    const auto stored_hash = read_le<std::uint64_t>(bytes, pos);
    if (stored_hash != fnv1a64(r.payload_)) {
        throw CorruptionError("payload hash mismatch in " + origin);
    }
    return r;
}

const nlohmann::json& ArtifactReader::entry(const std::string& name) const {
    for (const auto& e : manifest_.at("tensors")) {
        if (e.at("name").get<std::string>() == name) return e;
    }
    throw FormatError("tensor '" + name + "' missing from artifact");
}

bool ArtifactReader::has(const std::string& name) const {
    for (const auto& e : manifest_.at("tensors"))
        if (e.at("name").get<std::string>() == name) return true;
    return false;
}

std::vector<std::size_t> ArtifactReader::shape(const std::string& name) const {
    return entry(name).at("shape").get<std::vector<std::size_t>>();
}

namespace {
template <typename T>
std::vector<T> extract(const std::vector<std::uint8_t>& payload, const nlohmann::json& e,
                       const char* dtype) {
    if (e.at("dtype").get<std::string>() != dtype)
        throw FormatError("tensor '" + e.at("name").get<std::string>() + "' has dtype " +
                          e.at("dtype").get<std::string>() + ", expected " + dtype);
    const auto offset = e.at("offset").get<std::size_t>();
    const auto byte_size = e.at("byte_size").get<std::size_t>();
    if (offset + byte_size > payload.size()) throw FormatError("tensor extends past payload");
    std::vector<T> out(byte_size / sizeof(T));
    std::memcpy(out.data(), payload.data() + offset, byte_size);
    return out;
}
}  // namespace

std::vector<float> ArtifactReader::f32(const std::string& name) const {
    return extract<float>(payload_, entry(name), "f32");
}

std::vector<double> ArtifactReader::f64(const std::string& name) const {
    return extract<double>(payload_, entry(name), "f64");
}

std::vector<std::uint64_t> ArtifactReader::u64(const std::string& name) const {
    return extract<std::uint64_t>(payload_, entry(name), "u64");
}

void write_tensor_block(const std::filesystem::path& path, std::span<const float> data,
                        std::span<const std::size_t> dims) {
    std::vector<std::uint8_t> out;
    append_bytes(out, kDatasetMagic.data(), 5);
    append_le<std::uint32_t>(out, kFormatVersion);
    append_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
    for (std::size_t d : dims) append_le<std::uint64_t>(out, d);
    const auto* raw = reinterpret_cast<const std::uint8_t*>(data.data());
    std::span<const std::uint8_t> raw_span(raw, data.size_bytes());
    append_bytes(out, raw, data.size_bytes());
    append_le<std::uint64_t>(out, fnv1a64(raw_span));
    atomic_write(path, out);
}

std::pair<std::vector<float>, std::vector<std::size_t>> read_tensor_block(
    const std::filesystem::path& path) {
    auto bytes = read_all(path);
    if (bytes.size() < 5) throw FormatError("truncated tensor block: " + path.string());
    std::string magic(reinterpret_cast<const char*>(bytes.data()), 5);
    if (magic != kDatasetMagic) {
        throw FormatError("bad magic '" + magic + "' in " + path.string() + ": expected " +
                          std::string(kDatasetMagic) + " (" + artifact_kind_name(kDatasetMagic) +
                          ")");
    }
    std::size_t pos = 5;
    const auto version = read_le<std::uint32_t>(bytes, pos);
    if (version > kFormatVersion)
        throw FormatError("tensor block version newer than supported: " + path.string());
    const auto ndims = read_le<std::uint32_t>(bytes, pos);
    if (ndims > 8) throw FormatError("implausible dim count in " + path.string());
    std::vector<std::size_t> dims(ndims);
    std::size_t numel = 1;
    for (auto& d : dims) {
        d = read_le<std::uint64_t>(bytes, pos);
        numel *= d;
    }
    if (pos + numel * sizeof(float) + 8 > bytes.size())
        throw FormatError("truncated tensor data: " + path.string());
    std::vector<float> data(numel);
    std::memcpy(data.data(), bytes.data() + pos, numel * sizeof(float));
    std::span<const std::uint8_t> raw(bytes.data() + pos, numel * sizeof(float));
    pos += numel * sizeof(float);
    const auto stored_hash = read_le<std::uint64_t>(bytes, pos);
    if (stored_hash != fnv1a64(raw)) throw CorruptionError("payload hash mismatch in " + path.string());
    return {std::move(data), std::move(dims)};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    atomic_write(path, std::span<const std::uint8_t>(
                           reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
    auto bytes = read_all(path);
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

}  // namespace ccgm::persist
