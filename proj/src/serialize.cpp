#include "vpr/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace vpr {

namespace {

constexpr std::array<char, 4> kTensorMagic = {'D', 'T', 'N', 'S'};
constexpr std::array<char, 4> kCheckpointMagic = {'D', 'C', 'K', 'P'};
constexpr std::uint8_t kVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void need(const std::uint8_t* p, const std::uint8_t* end, std::size_t n,
          const std::string& origin, const char* field) {
    if (static_cast<std::size_t>(end - p) < n)
        throw data_error(origin + ": truncated file while reading " + field);
}

}  // namespace

std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t len,
                         std::uint32_t seed) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::vector<std::uint8_t> tensor_to_bytes(const TensorBlob& blob) {
    const std::size_t n = static_cast<std::size_t>(blob.count());
    if ((blob.is_f64 ? blob.f64.size() : blob.f32.size()) != n)
        throw data_error("tensor_to_bytes: payload length does not match shape " +
                         shape_str(blob.shape));
    std::vector<std::uint8_t> out;
    out.reserve(8 + blob.shape.size() * 8 + n * (blob.is_f64 ? 8 : 4));
    for (char c : kTensorMagic) out.push_back(static_cast<std::uint8_t>(c));
    out.push_back(kVersion);
    out.push_back(blob.is_f64 ? 1 : 0);
    out.push_back(static_cast<std::uint8_t>(blob.shape.size()));
    out.push_back(0);  // reserved
    for (index_t e : blob.shape) put_u64(out, static_cast<std::uint64_t>(e));
    if (blob.is_f64) {
        for (double v : blob.f64)
            put_u64(out, std::bit_cast<std::uint64_t>(v));
    } else {
        for (float v : blob.f32)
            put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

TensorBlob tensor_from_bytes(const std::uint8_t*& p, const std::uint8_t* end,
                             const std::string& origin) {
    need(p, end, 8, origin, "header");
    if (std::memcmp(p, kTensorMagic.data(), 4) != 0)
        throw data_error(origin + ": bad magic in tensor header");
    const std::uint8_t version = p[4];
    if (version != kVersion)
        throw data_error(origin + ": unsupported tensor version " +
                         std::to_string(version));
    const std::uint8_t dtype = p[5];
    if (dtype > 1)
        throw data_error(origin + ": unknown dtype byte " +
                         std::to_string(dtype));
    const std::uint8_t ndim = p[6];
    p += 8;

    TensorBlob blob;
    blob.is_f64 = dtype == 1;
    need(p, end, static_cast<std::size_t>(ndim) * 8, origin, "extents");
    for (int i = 0; i < ndim; ++i) {
        const std::uint64_t e = get_u64(p);
        p += 8;
        if (e == 0)
            throw data_error(origin + ": zero extent in tensor shape");
        blob.shape.push_back(static_cast<index_t>(e));
    }
    const std::size_t n = static_cast<std::size_t>(numel(blob.shape));
    const std::size_t esz = blob.is_f64 ? 8 : 4;
    need(p, end, n * esz, origin, "payload");
    if (blob.is_f64) {
        blob.f64.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            blob.f64[i] = std::bit_cast<double>(get_u64(p));
            p += 8;
        }
    } else {
        blob.f32.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            blob.f32[i] = std::bit_cast<float>(get_u32(p));
            p += 4;
        }
    }
    return blob;
}

void write_tensor_file(const std::string& path, const TensorBlob& blob) {
    const auto bytes = tensor_to_bytes(blob);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error(path + ": cannot open for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw data_error(path + ": write failed");
}

namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw data_error(path + ": cannot open");
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(buf.data()), size);
    if (!f) throw data_error(path + ": read failed");
    return buf;
}

}  // namespace

TensorBlob read_tensor_file(const std::string& path) {
    const auto buf = read_all(path);
    const std::uint8_t* p = buf.data();
    const std::uint8_t* end = p + buf.size();
    TensorBlob blob = tensor_from_bytes(p, end, path);
    if (p != end)
        throw data_error(path + ": trailing bytes after tensor payload");
    return blob;
}

void write_checkpoint(const std::string& path, const CheckpointEntries& entries) {
    std::unordered_set<std::string> names;
    std::vector<std::uint8_t> out;
    for (char c : kCheckpointMagic) out.push_back(static_cast<std::uint8_t>(c));
    out.push_back(kVersion);
    put_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, blob] : entries) {
        if (!names.insert(name).second)
            throw data_error(path + ": duplicate checkpoint entry '" + name + "'");
        if (name.size() > 0xFFFF)
            throw data_error(path + ": entry name too long");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        const auto tb = tensor_to_bytes(blob);
        out.insert(out.end(), tb.begin(), tb.end());
    }
    put_u32(out, crc32_ieee(out.data(), out.size()));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error(path + ": cannot open for writing");
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw data_error(path + ": write failed");
}

CheckpointEntries read_checkpoint(const std::string& path) {
    const auto buf = read_all(path);
    if (buf.size() < 13)
        throw data_error(path + ": too short for a checkpoint");
    const std::uint8_t* p = buf.data();
    const std::uint8_t* end = p + buf.size() - 4;
    const std::uint32_t stored = get_u32(end);
    const std::uint32_t actual =
        crc32_ieee(buf.data(), buf.size() - 4);
    if (stored != actual)
        throw data_error(path + ": CRC mismatch (file corrupt)");
    if (std::memcmp(p, kCheckpointMagic.data(), 4) != 0)
        throw data_error(path + ": bad checkpoint magic");
    if (p[4] != kVersion)
        throw data_error(path + ": unsupported checkpoint version " +
                         std::to_string(p[4]));
    const std::uint32_t count = get_u32(p + 5);
    p += 9;
    CheckpointEntries entries;
    std::unordered_set<std::string> names;
    for (std::uint32_t i = 0; i < count; ++i) {
        need(p, end, 2, path, "entry name length");
        const std::uint16_t len = get_u16(p);
        p += 2;
        need(p, end, len, path, "entry name");
        std::string name(reinterpret_cast<const char*>(p), len);
        p += len;
        if (!names.insert(name).second)
            throw data_error(path + ": duplicate checkpoint entry '" + name + "'");
        entries.emplace_back(std::move(name), tensor_from_bytes(p, end, path));
    }
    if (p != end)
        throw data_error(path + ": trailing bytes after last entry");
    return entries;
}

}  // namespace vpr
