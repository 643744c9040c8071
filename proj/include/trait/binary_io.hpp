#pragma once

// Little-endian primitive readers/writers shared by the embedding, graph and
// checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "trait/error.hpp"

namespace trait::io {

template <typename T>
	requires std::is_integral_v<T>
inline void write_le(std::ostream& out, T value) {
	using U = std::make_unsigned_t<T>;
	auto u = static_cast<U>(value);
	char buf[sizeof(T)];
	for (std::size_t i = 0; i < sizeof(T); ++i) {
		buf[i] = static_cast<char>((u >> (8 * i)) & 0xFFu);
	}
	out.write(buf, sizeof(T));
}

inline void write_le(std::ostream& out, float value) {
	write_le(out, std::bit_cast<std::uint32_t>(value));
}

inline void write_le(std::ostream& out, double value) {
	write_le(out, std::bit_cast<std::uint64_t>(value));
}

template <typename T>
	requires std::is_integral_v<T>
inline T read_le(std::istream& in, std::string_view what) {
	unsigned char buf[sizeof(T)];
	if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
		throw FormatError("unexpected end of file while reading " + std::string(what));
	}
	std::make_unsigned_t<T> u = 0;
	for (std::size_t i = 0; i < sizeof(T); ++i) {
		u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
	}
	return static_cast<T>(u);
}

inline float read_f32(std::istream& in, std::string_view what) {
	return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

inline double read_f64(std::istream& in, std::string_view what) {
	return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

inline void write_magic(std::ostream& out, std::string_view magic) {
	out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
	std::string got(magic.size(), '\0');
	if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
		throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
	}
}

/// u16 length prefix followed by raw bytes.
inline void write_short_string(std::ostream& out, std::string_view s) {
	if (s.size() > 0xFFFFu) {
		throw ValidationError("string too long for u16 length prefix: " + std::string(s.substr(0, 32)));
	}
	write_le(out, static_cast<std::uint16_t>(s.size()));
	out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_short_string(std::istream& in, std::string_view what) {
	auto n = read_le<std::uint16_t>(in, what);
	std::string s(n, '\0');
	if (n > 0 && !in.read(s.data(), n)) {
		throw FormatError("unexpected end of file while reading " + std::string(what));
	}
	return s;
}

/// 64-bit FNV-1a, used for manifest input fingerprints.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
	for (unsigned char c : bytes) {
		h ^= c;
		h *= 0x100000001b3ull;
	}
	return h;
}

} // namespace trait::io
