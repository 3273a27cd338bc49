#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cropmap {

// ---------------------------------------------------------------------------
// Errors
//
// One exception family per failure class the pipeline distinguishes; the CLI
// maps them onto exit codes (config -> 2, everything else data-ish -> 3).
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

class FormatError : public Error {
 public:
    explicit FormatError(const std::string& msg) : Error("format error: " + msg) {}
};

class SizeError : public Error {
 public:
    explicit SizeError(const std::string& msg) : Error("size error: " + msg) {}
};

class GeometryError : public Error {
 public:
    explicit GeometryError(const std::string& msg) : Error("geometry error: " + msg) {}
};

class DataError : public Error {
 public:
    explicit DataError(const std::string& msg) : Error("data error: " + msg) {}
};

class ContractError : public Error {
 public:
    explicit ContractError(const std::string& msg) : Error("contract error: " + msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic random streams
//
// Everything stochastic in the pipeline draws from splitmix64. Streams are
// counter-based: a stream is fully determined by (seed, counter), so work can
// be partitioned across threads in any way without changing the output.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Documented seed-split function: child seed for worker/tree/run `index`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 0x51ed2700a1b2c3d4ULL));
}

// Sequential generator over a splitmix64 stream.
class Rng {
 public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Modulo bias is negligible for the n used here (<< 2^32).
        return n == 0 ? 0 : next_u64() % n;
    }

    // Standard normal via Box-Muller; platform-independent.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

 private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Counter-based stream: value depends only on (seed, counter), never on call
// order. Used by synthgen so tiles can be generated in any partition.
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(splitmix64(splitmix64(seed) ^ (counter * 0xd6e8feb86659fd93ULL)) >> 11) * 0x1.0p-53;
}

inline double counter_gaussian(std::uint64_t seed, std::uint64_t counter) {
    // Two sub-draws per counter; Box-Muller cosine branch only.
    double u1 = counter_uniform(seed, counter * 2);
    double u2 = counter_uniform(seed, counter * 2 + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// ---------------------------------------------------------------------------
// parallel_for
//
// Static range split over a fixed thread count. Each index writes only its
// own output slots, so results are identical for any thread count.
// ---------------------------------------------------------------------------

inline unsigned hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    unsigned t = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(t);
    std::exception_ptr first_error;
    std::mutex guard;
    for (unsigned w = 0; w < t; ++w) {
        pool.emplace_back([&, w]() {
            std::size_t lo = n * w / t;
            std::size_t hi = n * (w + 1) / t;
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(guard);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    parallel_for(n, hardware_threads(), std::forward<Fn>(fn));
}

// ---------------------------------------------------------------------------
// Dense row-major matrix of doubles (samples x features)
// ---------------------------------------------------------------------------

class Matrix {
 public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

 private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Small file helpers (little-endian binary payloads)
// ---------------------------------------------------------------------------

namespace fsutil {

inline void write_bytes(const std::filesystem::path& p, const void* data, std::size_t n) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot write file: " + p.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!f) throw FormatError("short write: " + p.string());
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary | std::ios::ate);
    if (!f) throw FormatError("cannot open file: " + p.string());
    auto size = static_cast<std::size_t>(f.tellg());
    f.seekg(0);
    std::vector<std::uint8_t> buf(size);
    if (size > 0) f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!f) throw FormatError("short read: " + p.string());
    return buf;
}

inline std::string read_text(const std::filesystem::path& p) {
    auto b = read_bytes(p);
    return std::string(b.begin(), b.end());
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    write_bytes(p, s.data(), s.size());
}

}  // namespace fsutil

// FNV-1a 64-bit; used for input provenance hashes in run metadata.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace cropmap
