#pragma once

// TALLTEN1 container: 8-byte magic, u8 dtype code, u8 rank, rank x u64 LE
// extents, then the raw little-endian values.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "tall/error.hpp"
#include "tall/tensor.hpp"

namespace tall {

inline constexpr std::string_view kTensorMagic = "TALLTEN1";

namespace detail {

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

template <Scalar T>
using bits_t = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace detail

template <Scalar T>
std::vector<std::uint8_t> encode_tensor(const Tensor<T>& t) {
    std::vector<std::uint8_t> out;
    out.reserve(10 + 8 * t.rank() + sizeof(T) * t.size());
    out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
    out.push_back(static_cast<std::uint8_t>(dtype_of<T>()));
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) detail::put_le<std::uint64_t>(out, e);
    for (T v : t.data()) detail::put_le(out, std::bit_cast<detail::bits_t<T>>(v));
    return out;
}

/// Decodes a TALLTEN1 buffer. Errors report the byte offset of the failure.
template <Scalar T>
Tensor<T> decode_tensor(std::span<const std::uint8_t> buf) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n, const char* what) {
        if (buf.size() - pos < n) throw FormatError(std::string("truncated ") + what, buf.size());
    };
    need(kTensorMagic.size(), "magic");
    if (std::memcmp(buf.data(), kTensorMagic.data(), kTensorMagic.size()) != 0)
        throw FormatError("bad magic", 0);
    pos = kTensorMagic.size();
    need(2, "header");
    const auto code = buf[pos];
    if (code != static_cast<std::uint8_t>(DType::f32) && code != static_cast<std::uint8_t>(DType::f64))
        throw FormatError("unknown dtype code " + std::to_string(code), pos);
    if (code != static_cast<std::uint8_t>(dtype_of<T>()))
        throw FormatError("dtype mismatch (file code " + std::to_string(code) + ")", pos);
    ++pos;
    const std::size_t rank = buf[pos++];
    if (rank == 0) throw FormatError("rank 0", pos - 1);
    Shape shape(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        need(8, "extents");
        shape[i] = detail::get_le<std::uint64_t>(buf.data() + pos);
        if (shape[i] == 0) throw FormatError("zero extent", pos);
        pos += 8;
    }
    const std::size_t n = numel(shape);
    if ((buf.size() - pos) / sizeof(T) < n) throw FormatError("truncated values", buf.size());
    std::vector<T> data(n);
    for (std::size_t i = 0; i < n; ++i, pos += sizeof(T))
        data[i] = std::bit_cast<T>(detail::get_le<detail::bits_t<T>>(buf.data() + pos));
    if (pos != buf.size()) throw FormatError("trailing bytes", pos);
    return Tensor<T>(std::move(shape), std::move(data));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

template <Scalar T>
void write_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
    write_file_bytes(path, encode_tensor(t));
}

template <Scalar T>
Tensor<T> read_tensor(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return decode_tensor<T>(bytes);
}

}  // namespace tall
