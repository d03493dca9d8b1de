#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pastiche/core/errors.hpp"
#include "pastiche/core/tensor.hpp"

// Binary container primitives shared by checkpoint and embedding-index
// files. All integers and floats are little-endian on disk.
static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace pastiche::io {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw IoError("write failed");
}

inline void read_bytes(std::istream& is, void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n)) throw IoError("file truncated");
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v;
    read_bytes(is, &v, sizeof(T));
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint64_t>(os, s.size());
    write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, uint64_t max_len = 1'000'000'000) {
    const uint64_t n = read_pod<uint64_t>(is);
    if (n > max_len) throw IoError("corrupt file: unreasonable string length");
    std::string s(n, '\0');
    if (n) read_bytes(is, s.data(), n);
    return s;
}

inline void write_tensor(std::ostream& os, const Tensor& t) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(t.ndim()));
    for (int64_t i = 0; i < t.ndim(); ++i) write_pod<int64_t>(os, t.dim(i));
    write_bytes(os, t.data(), sizeof(double) * static_cast<size_t>(t.numel()));
}

inline Tensor read_tensor(std::istream& is) {
    const uint32_t nd = read_pod<uint32_t>(is);
    if (nd > 8) throw IoError("corrupt file: tensor rank too large");
    std::vector<int64_t> shape(nd);
    int64_t numel = 1;
    for (uint32_t i = 0; i < nd; ++i) {
        shape[i] = read_pod<int64_t>(is);
        if (shape[i] <= 0 || shape[i] > (int64_t(1) << 32)) throw IoError("corrupt tensor shape");
        numel *= shape[i];
    }
    Tensor t(std::move(shape));
    read_bytes(is, t.data(), sizeof(double) * static_cast<size_t>(numel));
    return t;
}

inline void write_magic(std::ostream& os, const char (&magic)[9]) { write_bytes(os, magic, 8); }

inline void expect_magic(std::istream& is, const char (&magic)[9], const char* what) {
    char buf[8];
    read_bytes(is, buf, 8);
    if (std::memcmp(buf, magic, 8) != 0)
        throw IoError(std::string(what) + ": bad magic, not a valid file");
}

// FNV-1a, used to fingerprint the config a checkpoint was produced with.
inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace pastiche::io
