#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "lfs/tape.hpp"

namespace lfs::numgrad {

// Flat binary checkpoint: magic "LFSC", format version u32, count u32, then
// per-parameter records (name length u16, name bytes, rank u8, dims as u32s,
// raw little-endian f64 payload).
inline constexpr char kCheckpointMagic[4] = {'L', 'F', 'S', 'C'};
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

static_assert(sizeof(double) == 8, "f64 payload requires 8-byte double");

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::istream& is, T& v, const char* what) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    require(static_cast<bool>(is), "checkpoint truncated while reading ", what);
}

inline bool host_is_little_endian() {
    const uint32_t probe = 1;
    return *reinterpret_cast<const unsigned char*>(&probe) == 1;
}

}  // namespace detail

// Stores are written with a name prefix so one file can hold several banks
// ("ssl/...", "sac/...").
inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, const ParamStore*>>& stores) {
    require(detail::host_is_little_endian(), "checkpoint format requires a little-endian host");
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "cannot open checkpoint for writing: ", path);

    uint32_t count = 0;
    for (const auto& [prefix, store] : stores) count += static_cast<uint32_t>(store->count());

    os.write(kCheckpointMagic, 4);
    detail::write_raw(os, kCheckpointVersion);
    detail::write_raw(os, count);
    for (const auto& [prefix, store] : stores) {
        for (const auto& name : store->names()) {
            const Array& a = store->value(name);
            const std::string full = prefix + name;
            require(full.size() <= 0xffff, "parameter name too long: ", full);
            const uint16_t len = static_cast<uint16_t>(full.size());
            detail::write_raw(os, len);
            os.write(full.data(), len);
            const uint8_t rank = static_cast<uint8_t>(a.rank());
            detail::write_raw(os, rank);
            for (int d = 0; d < a.rank(); ++d) {
                const uint32_t dim = static_cast<uint32_t>(a.dim(d));
                detail::write_raw(os, dim);
            }
            os.write(reinterpret_cast<const char*>(a.data.data()),
                     static_cast<std::streamsize>(a.data.size() * sizeof(double)));
        }
    }
    require(static_cast<bool>(os), "write failure on checkpoint: ", path);
}

// Reads all records without needing pre-built stores (used to infer network
// dimensions from a checkpoint).
inline std::vector<std::pair<std::string, Array>> read_checkpoint_entries(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "cannot open checkpoint: ", path);
    char magic[4];
    is.read(magic, 4);
    require(static_cast<bool>(is) && std::memcmp(magic, kCheckpointMagic, 4) == 0, "bad checkpoint magic in ", path);
    uint32_t version = 0, count = 0;
    detail::read_raw(is, version, "version");
    require(version == kCheckpointVersion, "unsupported checkpoint version ", version, " in ", path);
    detail::read_raw(is, count, "count");

    std::vector<std::pair<std::string, Array>> out;
    out.reserve(count);
    for (uint32_t r = 0; r < count; ++r) {
        uint16_t len = 0;
        detail::read_raw(is, len, "name length");
        std::string name(len, '\0');
        is.read(name.data(), len);
        require(static_cast<bool>(is), "checkpoint truncated while reading name");
        uint8_t rank = 0;
        detail::read_raw(is, rank, "rank");
        std::vector<int> shape(rank);
        for (int d = 0; d < rank; ++d) {
            uint32_t dim = 0;
            detail::read_raw(is, dim, "dim");
            shape[static_cast<size_t>(d)] = static_cast<int>(dim);
        }
        Array a = Array::zeros(shape);
        is.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(double)));
        require(static_cast<bool>(is), "checkpoint truncated in payload of '", name, "'");
        out.emplace_back(std::move(name), std::move(a));
    }
    return out;
}

// Loads records into the given stores by prefix+name match. Every record in
// the file must land in exactly one store with an identical shape; parameters
// missing from the file are left untouched unless `strict` is set.
inline void load_checkpoint(const std::string& path, const std::vector<std::pair<std::string, ParamStore*>>& stores,
                            bool strict = true) {
    require(detail::host_is_little_endian(), "checkpoint format requires a little-endian host");
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "cannot open checkpoint: ", path);

    char magic[4];
    is.read(magic, 4);
    require(static_cast<bool>(is) && std::memcmp(magic, kCheckpointMagic, 4) == 0, "bad checkpoint magic in ", path);
    uint32_t version = 0, count = 0;
    detail::read_raw(is, version, "version");
    require(version == kCheckpointVersion, "unsupported checkpoint version ", version, " in ", path);
    detail::read_raw(is, count, "count");

    size_t loaded = 0;
    for (uint32_t r = 0; r < count; ++r) {
        uint16_t len = 0;
        detail::read_raw(is, len, "name length");
        std::string full(len, '\0');
        is.read(full.data(), len);
        require(static_cast<bool>(is), "checkpoint truncated while reading name");
        uint8_t rank = 0;
        detail::read_raw(is, rank, "rank");
        std::vector<int> shape(rank);
        for (int d = 0; d < rank; ++d) {
            uint32_t dim = 0;
            detail::read_raw(is, dim, "dim");
            shape[static_cast<size_t>(d)] = static_cast<int>(dim);
        }
        Array a = Array::zeros(shape);
        is.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(double)));
        require(static_cast<bool>(is), "checkpoint truncated in payload of '", full, "'");

        bool placed = false;
        for (const auto& [prefix, store] : stores) {
            if (full.rfind(prefix, 0) != 0) continue;
            const std::string name = full.substr(prefix.size());
            if (!store->has(name)) continue;
            Array& dst = store->value(name);
            require(dst.same_shape(a), "checkpoint shape mismatch for '", full, "': file ", shape_str(a.shape),
                    " vs model ", shape_str(dst.shape));
            dst.data = std::move(a.data);
            placed = true;
            ++loaded;
            break;
        }
        require(placed || !strict, "checkpoint record '", full, "' matches no known parameter");
    }

    if (strict) {
        size_t expected = 0;
        for (const auto& [prefix, store] : stores) expected += static_cast<size_t>(store->count());
        require(loaded == expected, "checkpoint ", path, " is missing parameters: loaded ", loaded, " of ", expected);
    }
}

}  // namespace lfs::numgrad
