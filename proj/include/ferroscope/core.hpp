// ferroscope: one-class steel surface anomaly detection toolkit.
// Core utilities: error hierarchy, deterministic RNG, byte-level I/O helpers.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ferroscope {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes: usage/config -> 1,
// data/format -> 2, numerical failure -> 3.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidArgument : Error {
    using Error::Error;
};
struct ShapeError : Error {
    using Error::Error;
};
struct StateError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct DescriptorMismatch : FormatError {
    using FormatError::FormatError;
};
struct DataError : Error {
    using Error::Error;
};
struct TooSmallError : DataError {
    using DataError::DataError;
};
struct CorruptCorpusError : DataError {
    using DataError::DataError;
};
struct StratificationError : DataError {
    using DataError::DataError;
};
struct UndefinedStatError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct DegenerateCalibrationError : NumericError {
    using NumericError::NumericError;
};
struct IoError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 core; all randomized components derive their
// streams from a user seed through mix() so results are reproducible and
// independent of call ordering elsewhere in the program.
// ---------------------------------------------------------------------------

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0,1)
    double unit() { return double(next_u64() >> 11) * 0x1.0p-53; }
    float unitf() { return float(next_u64() >> 40) * 0x1.0p-24f; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    float uniformf(float lo, float hi) { return lo + (hi - lo) * unitf(); }

    // [0,n)
    std::uint64_t range(std::uint64_t n) { return n ? next_u64() % n : 0; }
    int range_int(int n) { return int(range(std::uint64_t(n))); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0, u2 = 0.0;
        do {
            u1 = unit();
        } while (u1 <= 1e-300);
        u2 = unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }
    float normalf() { return float(normal()); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(range(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives a decorrelated sub-seed from (a, b).
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

inline int round_half_up(double x) { return int(std::floor(x + 0.5)); }

inline std::uint8_t quantize_u8(double x) {
    int v = round_half_up(x);
    if (v < 0) v = 0;
    if (v > 255) v = 255;
    return std::uint8_t(v);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Little-endian binary I/O (portable independent of host byte order)
// ---------------------------------------------------------------------------

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
}

inline void put_u64le(std::string& out, std::uint64_t v) {
    put_u32le(out, std::uint32_t(v & 0xffffffffULL));
    put_u32le(out, std::uint32_t(v >> 32));
}

inline void put_f32le(std::string& out, float f) {
    std::uint32_t v = 0;
    std::memcpy(&v, &f, 4);
    put_u32le(out, v);
}

inline void put_f64le(std::string& out, double d) {
    std::uint64_t v = 0;
    std::memcpy(&v, &d, 8);
    put_u64le(out, v);
}

class ByteReader {
  public:
    ByteReader(const std::string& bytes, std::string what)
        : bytes_(bytes), what_(std::move(what)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(bytes_[pos_ + std::size_t(i)]);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t lo = u32();
        std::uint64_t hi = u32();
        return lo | (hi << 32);
    }
    float f32() {
        std::uint32_t v = u32();
        float f = 0;
        std::memcpy(&f, &v, 4);
        return f;
    }
    double f64() {
        std::uint64_t v = u64();
        double d = 0;
        std::memcpy(&d, &v, 8);
        return d;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void f32_array(float* dst, std::size_t n) {
        need(4 * n);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t v = std::uint32_t(std::uint8_t(bytes_[pos_])) |
                              std::uint32_t(std::uint8_t(bytes_[pos_ + 1])) << 8 |
                              std::uint32_t(std::uint8_t(bytes_[pos_ + 2])) << 16 |
                              std::uint32_t(std::uint8_t(bytes_[pos_ + 3])) << 24;
            std::memcpy(dst + i, &v, 4);
            pos_ += 4;
        }
    }
    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw FormatError(what_ + ": truncated (need " + std::to_string(n) + " bytes at offset " +
                              std::to_string(pos_) + ")");
    }
    const std::string& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline void put_f32_array(std::string& out, const float* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put_f32le(out, src[i]);
}

// ---------------------------------------------------------------------------
// Whole-file I/O. Writes are atomic (temp file + rename) so interrupted runs
// never leave truncated files that later stages accept.
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) throw IoError("read failed: " + path.string());
    return bytes;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out.good()) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace ferroscope
