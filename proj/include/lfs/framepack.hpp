#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lfs/common.hpp"
#include "lfs/framekit.hpp"

namespace lfs::harness {

// Frame-pack container: header (magic "LFSP", version, frame count, H, W, C,
// dtype, episode length) followed by raw frames. Frames group into
// non-overlapping episodes of uniform length.
inline constexpr char kPackMagic[4] = {'L', 'F', 'S', 'P'};
inline constexpr uint32_t kPackVersion = 1;

enum class PackError { BadMagic = 1, VersionMismatch = 2, Truncated = 3, BadHeader = 4 };

class FramePackError : public Error {
public:
    FramePackError(PackError code, const std::string& msg) : Error(msg), code_(code) {}
    PackError code() const { return code_; }

private:
    PackError code_;
};

enum class PackDtype : uint8_t { U8 = 1, F64 = 8 };

struct FramePack {
    int h = 0, w = 0, c = 0;
    int episode_length = 0;
    PackDtype dtype = PackDtype::F64;
    std::vector<framekit::Frame> frames;  // frame index = position within its episode

    int frame_count() const { return static_cast<int>(frames.size()); }
    int episodes() const { return episode_length > 0 ? frame_count() / episode_length : 0; }
};

inline void write_framepack(const std::string& path, const std::vector<framekit::Frame>& frames, int episode_length,
                            PackDtype dtype = PackDtype::F64) {
    require(!frames.empty(), "cannot write an empty frame pack");
    require(episode_length >= 1 && static_cast<int>(frames.size()) % episode_length == 0,
            "frame count ", frames.size(), " is not a multiple of episode length ", episode_length);
    const auto& f0 = frames.front();
    for (const auto& f : frames)
        require(f.same_geometry(f0), "frame pack requires uniform frame geometry");

    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "cannot open frame pack for writing: ", path);
    os.write(kPackMagic, 4);
    auto w32 = [&](uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    w32(kPackVersion);
    w32(static_cast<uint32_t>(frames.size()));
    w32(static_cast<uint32_t>(f0.h));
    w32(static_cast<uint32_t>(f0.w));
    w32(static_cast<uint32_t>(f0.c));
    const uint8_t dt = static_cast<uint8_t>(dtype);
    os.write(reinterpret_cast<const char*>(&dt), 1);
    w32(static_cast<uint32_t>(episode_length));

    if (dtype == PackDtype::F64) {
        for (const auto& f : frames)
            os.write(reinterpret_cast<const char*>(f.px.data()),
                     static_cast<std::streamsize>(f.px.size() * sizeof(double)));
    } else {
        std::vector<uint8_t> row;
        for (const auto& f : frames) {
            row.resize(f.px.size());
            for (size_t i = 0; i < f.px.size(); ++i) {
                const double v = std::min(1.0, std::max(0.0, f.px[i]));
                row[i] = static_cast<uint8_t>(std::lround(v * 255.0));
            }
            os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
        }
    }
    require(static_cast<bool>(os), "write failure on frame pack: ", path);
}

inline FramePack read_framepack(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FramePackError(PackError::Truncated, "cannot open frame pack: " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kPackMagic, 4) != 0)
        throw FramePackError(PackError::BadMagic, "bad frame-pack magic in " + path);
    auto r32 = [&](const char* what) -> uint32_t {
        uint32_t v = 0;
        is.read(reinterpret_cast<char*>(&v), 4);
        if (!is) throw FramePackError(PackError::Truncated, std::string("frame pack truncated in header: ") + what);
        return v;
    };
    const uint32_t version = r32("version");
    if (version != kPackVersion)
        throw FramePackError(PackError::VersionMismatch,
                             "frame-pack version mismatch: file has " + std::to_string(version));
    FramePack pack;
    const uint32_t count = r32("frame count");
    pack.h = static_cast<int>(r32("height"));
    pack.w = static_cast<int>(r32("width"));
    pack.c = static_cast<int>(r32("channels"));
    uint8_t dt = 0;
    is.read(reinterpret_cast<char*>(&dt), 1);
    if (!is) throw FramePackError(PackError::Truncated, "frame pack truncated in header: dtype");
    if (dt != static_cast<uint8_t>(PackDtype::U8) && dt != static_cast<uint8_t>(PackDtype::F64))
        throw FramePackError(PackError::BadHeader, "unknown frame-pack dtype " + std::to_string(dt));
    pack.dtype = static_cast<PackDtype>(dt);
    pack.episode_length = static_cast<int>(r32("episode length"));
    if (pack.h < 1 || pack.w < 1 || pack.c < 1 || pack.episode_length < 1 ||
        count % static_cast<uint32_t>(pack.episode_length) != 0)
        throw FramePackError(PackError::BadHeader, "inconsistent frame-pack header in " + path);

    const int64_t plane = static_cast<int64_t>(pack.h) * pack.w * pack.c;
    pack.frames.reserve(count);
    std::vector<uint8_t> bytes;
    for (uint32_t i = 0; i < count; ++i) {
        framekit::Frame f(pack.h, pack.w, pack.c, static_cast<int64_t>(i % static_cast<uint32_t>(pack.episode_length)));
        if (pack.dtype == PackDtype::F64) {
            is.read(reinterpret_cast<char*>(f.px.data()), static_cast<std::streamsize>(plane * sizeof(double)));
        } else {
            bytes.resize(static_cast<size_t>(plane));
            is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(plane));
            for (int64_t j = 0; j < plane; ++j) f.px[static_cast<size_t>(j)] = bytes[static_cast<size_t>(j)] / 255.0;
        }
        if (!is) throw FramePackError(PackError::Truncated, "truncated payload in frame pack " + path);
        pack.frames.push_back(std::move(f));
    }
    return pack;
}

// Minimal binary PGM (P5, maxval 255) reader/writer used by the `pack` CLI.
inline void write_pgm(const std::string& path, const framekit::Frame& f) {
    require(f.c == 1, "PGM supports single-channel frames");
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "cannot open PGM for writing: ", path);
    os << "P5\n" << f.w << " " << f.h << "\n255\n";
    for (double v : f.px) {
        const uint8_t b = static_cast<uint8_t>(std::lround(std::min(1.0, std::max(0.0, v)) * 255.0));
        os.write(reinterpret_cast<const char*>(&b), 1);
    }
}

inline framekit::Frame read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "cannot open PGM: ", path);
    std::string magic;
    is >> magic;
    require(magic == "P5", "unsupported PGM type '", magic, "' in ", path);
    int w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    require(w >= 1 && h >= 1 && maxval == 255, "unsupported PGM header in ", path);
    is.get();  // single whitespace after header
    framekit::Frame f(h, w, 1, 0);
    std::vector<uint8_t> bytes(static_cast<size_t>(w) * h);
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(is), "truncated PGM payload in ", path);
    for (size_t i = 0; i < bytes.size(); ++i) f.px[i] = bytes[i] / 255.0;
    return f;
}

}  // namespace lfs::harness
