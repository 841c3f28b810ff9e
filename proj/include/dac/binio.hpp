#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "dac/errors.hpp"

namespace dac::binio {

/// Little-endian binary writer. All multi-byte values are written byte by
/// byte so the on-disk format is independent of host endianness.
class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw IoError("write failed");
        offset_ += n;
    }

    void u8(std::uint8_t v) { bytes(&v, 1); }

    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        bytes(b, 4);
    }

    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
        bytes(b, 8);
    }

    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        if (!s.empty()) bytes(s.data(), s.size());
    }

    std::size_t offset() const { return offset_; }

private:
    std::ostream& out_;
    std::size_t offset_ = 0;
};

/// Little-endian binary reader tracking the byte offset for error reports.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw ParseError("unexpected end of file", offset_);
        }
        offset_ += n;
    }

    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }

    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        unsigned char b[8];
        bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

    double f64() { return std::bit_cast<double>(u64()); }

    std::string str(std::size_t max_len) {
        const std::uint32_t n = u32();
        if (n > max_len) throw ParseError("string length implausibly large", offset_ - 4);
        std::string s(n, '\0');
        if (n) bytes(s.data(), n);
        return s;
    }

    /// Throws unless the stream is exhausted.
    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (in_.gcount() != 0) throw ParseError("trailing bytes after end of payload", offset_);
    }

    std::size_t offset() const { return offset_; }

private:
    std::istream& in_;
    std::size_t offset_ = 0;
};

}  // namespace dac::binio
