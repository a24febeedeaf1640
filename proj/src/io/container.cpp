#include "polypgen/io/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "polypgen/error.hpp"
#include "polypgen/io/digest.hpp"

namespace polypgen::io {

static_assert(std::endian::native == std::endian::little, "checkpoint container assumes a little-endian host");

namespace {

constexpr std::size_t kMagicLen = 8;
constexpr std::size_t kDigestLen = 64;

template <class U>
void put(std::string& buf, U v) {
    char raw[sizeof(U)];
    std::memcpy(raw, &v, sizeof(U));
    buf.append(raw, sizeof(U));
}

template <class U>
U get(const std::string& buf, std::size_t& pos, const std::filesystem::path& path) {
    if (pos + sizeof(U) > buf.size()) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": truncated");
    U v;
    std::memcpy(&v, buf.data() + pos, sizeof(U));
    pos += sizeof(U);
    return v;
}

std::string serialize(std::string_view magic, const nlohmann::json& header, std::span<const float> parameters) {
    require(magic.size() == kMagicLen, ErrorCode::InvalidConfig, "container magic must be 8 bytes");
    const std::string head = header.dump();
    std::string buf;
    buf.reserve(kMagicLen + 16 + head.size() + parameters.size() * sizeof(float) + kDigestLen);
    buf.append(magic);
    put<std::uint32_t>(buf, kContainerVersion);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(head.size()));
    buf.append(head);
    put<std::uint64_t>(buf, parameters.size());
    buf.append(reinterpret_cast<const char*>(parameters.data()), parameters.size() * sizeof(float));
    return buf;
}

}  // namespace

std::string container_digest(std::string_view magic, const nlohmann::json& header, std::span<const float> parameters) {
    return sha256_hex(serialize(magic, header, parameters));
}

void write_container(const std::filesystem::path& path, std::string_view magic, const nlohmann::json& header,
                     std::span<const float> parameters) {
    std::string buf = serialize(magic, header, parameters);
    buf.append(sha256_hex(buf));
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorCode::IoFailure, path.string());
}

Container read_container(const std::filesystem::path& path, std::string_view magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < kMagicLen + 8 + kDigestLen) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": truncated");
    if (std::string_view(buf.data(), kMagicLen) != magic)
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": wrong magic (expected " + std::string(magic) + ")");
    std::size_t pos = kMagicLen;
    const auto version = get<std::uint32_t>(buf, pos, path);
    if (version != kContainerVersion)
        throw Error(ErrorCode::VersionMismatch,
                    path.string() + ": version " + std::to_string(version) + ", expected " + std::to_string(kContainerVersion));

    const std::size_t body = buf.size() - kDigestLen;
    const std::string stored(buf.data() + body, kDigestLen);
    const std::string actual = sha256_hex(std::string_view(buf.data(), body));
    if (stored != actual) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": digest mismatch");

    const auto head_len = get<std::uint32_t>(buf, pos, path);
    if (pos + head_len > body) throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": header overruns file");
    Container c;
    try {
        c.header = nlohmann::json::parse(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                                         buf.begin() + static_cast<std::ptrdiff_t>(pos + head_len));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": bad header: " + e.what());
    }
    pos += head_len;
    const auto count = get<std::uint64_t>(buf, pos, path);
    if (pos + count * sizeof(float) != body)
        throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": parameter payload size mismatch");
    c.parameters.resize(count);
    std::memcpy(c.parameters.data(), buf.data() + pos, count * sizeof(float));
    c.digest = actual;
    return c;
}

}  // namespace polypgen::io
