#include "depman/zip.hpp"

#include "depman/error.hpp"

#include <zlib.h>

#include <cstdint>
#include <limits>

namespace depman::zip {

namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralSig = 0x06054b50;
constexpr std::uint16_t kDosTime = 0;       // 00:00:00
constexpr std::uint16_t kDosDate = 0x0021;  // 1980-01-01
constexpr std::uint16_t kUtf8Flag = 0x0800;

[[noreturn]] void corrupt(const std::string& what) {
    throw Error(Errc::NotAnArchive, what);
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint16_t u16(std::size_t at) const {
        need(at, 2);
        return static_cast<std::uint16_t>(byte(at) | (byte(at + 1) << 8));
    }
    std::uint32_t u32(std::size_t at) const {
        need(at, 4);
        return static_cast<std::uint32_t>(byte(at)) | (static_cast<std::uint32_t>(byte(at + 1)) << 8) |
               (static_cast<std::uint32_t>(byte(at + 2)) << 16) | (static_cast<std::uint32_t>(byte(at + 3)) << 24);
    }
    std::string_view slice(std::size_t at, std::size_t n) const {
        need(at, n);
        return data_.substr(at, n);
    }
    std::size_t size() const { return data_.size(); }

private:
    unsigned byte(std::size_t at) const { return static_cast<unsigned char>(data_[at]); }
    void need(std::size_t at, std::size_t n) const {
        if (at > data_.size() || n > data_.size() - at) corrupt("truncated archive");
    }
    std::string_view data_;
};

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t crc_of(std::string_view data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for large members.
    std::size_t off = 0;
    while (off < data.size()) {
        auto n = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off), n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

std::string inflate_raw(std::string_view compressed, std::size_t expected) {
    std::string out(expected, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) corrupt("inflate init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    std::size_t produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != expected) corrupt("corrupt deflate stream");
    return out;
}

} // namespace

bool looks_like_zip(std::string_view data) noexcept {
    auto sig = [&](std::uint32_t s) {
        if (data.size() < 4) return false;
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(data[static_cast<std::size_t>(i)]);
        return v == s;
    };
    return sig(kLocalHeaderSig) || sig(kEndOfCentralSig);
}

Entries read(std::string_view archive) {
    Reader r(archive);
    if (archive.size() < 22) corrupt("too short for a ZIP archive");

    // End-of-central-directory record sits in the last 22 + 65535 bytes.
    std::size_t eocd = std::string_view::npos;
    std::size_t lowest = archive.size() > 22 + 0xFFFF ? archive.size() - 22 - 0xFFFF : 0;
    for (std::size_t at = archive.size() - 22 + 1; at-- > lowest;) {
        if (r.u32(at) == kEndOfCentralSig && at + 22 + r.u16(at + 20) == archive.size()) {
            eocd = at;
            break;
        }
    }
    if (eocd == std::string_view::npos) corrupt("end of central directory not found");

    std::uint16_t count = r.u16(eocd + 10);
    std::uint32_t cd_size = r.u32(eocd + 12);
    std::uint32_t cd_offset = r.u32(eocd + 16);
    if (r.u16(eocd + 4) != 0 || r.u16(eocd + 6) != 0) corrupt("multi-disk archives not supported");
    if (std::size_t(cd_offset) + cd_size > eocd) corrupt("central directory out of range");

    Entries entries;
    std::size_t at = cd_offset;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (r.u32(at) != kCentralHeaderSig) corrupt("bad central directory header");
        std::uint16_t flags = r.u16(at + 8);
        std::uint16_t method = r.u16(at + 10);
        std::uint32_t crc = r.u32(at + 16);
        std::uint32_t csize = r.u32(at + 20);
        std::uint32_t usize = r.u32(at + 24);
        std::uint16_t name_len = r.u16(at + 28);
        std::uint16_t extra_len = r.u16(at + 30);
        std::uint16_t comment_len = r.u16(at + 32);
        std::uint32_t local = r.u32(at + 42);
        std::string name(r.slice(at + 46, name_len));
        at += 46u + name_len + extra_len + comment_len;

        if (flags & 0x1) corrupt("encrypted entry '" + name + "'");
        if (csize == std::numeric_limits<std::uint32_t>::max() || usize == std::numeric_limits<std::uint32_t>::max()) {
            corrupt("ZIP64 entries not supported");
        }
        if (r.u32(local) != kLocalHeaderSig) corrupt("bad local header for '" + name + "'");
        std::size_t data_at = std::size_t(local) + 30 + r.u16(local + 26) + r.u16(local + 28);
        std::string_view raw = r.slice(data_at, csize);

        if (name.empty() || name.back() == '/') continue;
        std::string content;
        if (method == 0) {
            if (csize != usize) corrupt("stored entry size mismatch for '" + name + "'");
            content.assign(raw);
        } else if (method == 8) {
            content = inflate_raw(raw, usize);
        } else {
            corrupt("unsupported compression method " + std::to_string(method) + " for '" + name + "'");
        }
        if (crc_of(content) != crc) corrupt("CRC mismatch for '" + name + "'");
        if (!entries.emplace(std::move(name), std::move(content)).second) corrupt("duplicate entry");
    }
    return entries;
}

std::string write(const Entries& entries) {
    std::string out;
    std::string central;
    for (const auto& [name, content] : entries) {
        if (content.size() >= std::numeric_limits<std::uint32_t>::max() || name.size() > 0xFFFF) {
            throw std::length_error("entry too large for ZIP32: " + name);
        }
        auto offset = static_cast<std::uint32_t>(out.size());
        auto size = static_cast<std::uint32_t>(content.size());
        std::uint32_t crc = crc_of(content);

        put32(out, kLocalHeaderSig);
        put16(out, 20);
        put16(out, kUtf8Flag);
        put16(out, 0);
        put16(out, kDosTime);
        put16(out, kDosDate);
        put32(out, crc);
        put32(out, size);
        put32(out, size);
        put16(out, static_cast<std::uint16_t>(name.size()));
        put16(out, 0);
        out += name;
        out += content;

        put32(central, kCentralHeaderSig);
        put16(central, 20);
        put16(central, 20);
        put16(central, kUtf8Flag);
        put16(central, 0);
        put16(central, kDosTime);
        put16(central, kDosDate);
        put32(central, crc);
        put32(central, size);
        put32(central, size);
        put16(central, static_cast<std::uint16_t>(name.size()));
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put32(central, 0);
        put32(central, offset);
        central += name;
    }
    if (entries.size() > 0xFFFF) throw std::length_error("too many entries for ZIP32");
    auto cd_offset = static_cast<std::uint32_t>(out.size());
    out += central;
    put32(out, kEndOfCentralSig);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put32(out, static_cast<std::uint32_t>(central.size()));
    put32(out, cd_offset);
    put16(out, 0);
    return out;
}

} // namespace depman::zip
