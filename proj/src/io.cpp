#include "stv/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

namespace stv {

static_assert(std::endian::native == std::endian::little,
              "payload files are little-endian; big-endian hosts are unsupported");

namespace {
constexpr char kMagic[9] = "STVFILE1";
}

void write_payload_file(const std::filesystem::path& path, const nlohmann::json& manifest,
                        const std::vector<double>& payload) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for write: " + path.string());
    const std::string header = manifest.dump();
    const std::uint64_t hlen = header.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw io_error("write failed: " + path.string());
}

PayloadFile read_payload_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw io_error("bad magic in " + path.string());
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw io_error("truncated header in " + path.string());
    PayloadFile f;
    f.manifest = nlohmann::json::parse(header);
    // remaining bytes are the payload
    const auto pos = in.tellg();
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(pos);
    const std::size_t bytes = static_cast<std::size_t>(end - pos);
    if (bytes % sizeof(double) != 0) throw io_error("payload not a multiple of 8 bytes");
    f.payload.resize(bytes / sizeof(double));
    in.read(reinterpret_cast<char*>(f.payload.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw io_error("truncated payload in " + path.string());
    return f;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::uint64_t file_hash(const std::filesystem::path& path) {
    return fnv1a64(read_text_file(path));
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw io_error("format_double failed");
    return std::string(buf, ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for write: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw io_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path.string());
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace stv
