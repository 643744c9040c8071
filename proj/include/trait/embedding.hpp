#pragma once

// Dense embedding tables and the TREM binary format shared by sentence and
// word embeddings:
//
//   magic "TREM" | version u32 | count u64 | dim u32
//   count x ( key_len u16 | key bytes (UTF-8) | dim x f32 )
//
// All integers and floats are little-endian.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trait/binary_io.hpp"
#include "trait/error.hpp"

namespace trait {

inline constexpr std::string_view kEmbeddingMagic = "TREM";
inline constexpr std::uint32_t kEmbeddingVersion = 1;

class EmbeddingTable {
public:
	EmbeddingTable() = default;
	explicit EmbeddingTable(std::uint32_t dimension) : dim_(dimension) {
		if (dimension == 0) throw ValidationError("embedding dimension must be positive");
	}

	/// Adds a vector; rejects duplicate keys, wrong dimension, non-finite or
	/// zero-norm vectors.
	void add(std::string key, std::span<const float> vec) {
		if (dim_ == 0) throw ValidationError("embedding table has no dimension");
		if (vec.size() != dim_) {
			throw ValidationError("embedding for '" + key + "' has dimension " + std::to_string(vec.size()) +
			                      ", expected " + std::to_string(dim_));
		}
		double sq = 0.0;
		for (float x : vec) {
			if (!std::isfinite(x)) throw ValidationError("embedding for '" + key + "' has a non-finite component");
			sq += static_cast<double>(x) * static_cast<double>(x);
		}
		if (!(sq > 0.0)) throw ValidationError("embedding for '" + key + "' has zero norm");
		if (index_.contains(key)) throw ValidationError("duplicate embedding key '" + key + "'");
		index_.emplace(key, keys_.size());
		keys_.push_back(std::move(key));
		data_.insert(data_.end(), vec.begin(), vec.end());
	}

	std::uint32_t dimension() const { return dim_; }
	std::size_t size() const { return keys_.size(); }
	const std::string& key(std::size_t row) const { return keys_.at(row); }

	std::optional<std::size_t> find(std::string_view key) const {
		if (auto it = index_.find(std::string(key)); it != index_.end()) return it->second;
		return std::nullopt;
	}

	std::span<const float> row(std::size_t r) const {
		return std::span<const float>(data_).subspan(r * dim_, dim_);
	}

	std::optional<std::span<const float>> lookup(std::string_view key) const {
		if (auto r = find(key)) return row(*r);
		return std::nullopt;
	}

private:
	std::uint32_t dim_ = 0;
	std::vector<std::string> keys_;
	std::vector<float> data_;
	std::unordered_map<std::string, std::size_t> index_;
};

inline void write_embeddings(const EmbeddingTable& table, std::ostream& out) {
	io::write_magic(out, kEmbeddingMagic);
	io::write_le(out, kEmbeddingVersion);
	io::write_le(out, static_cast<std::uint64_t>(table.size()));
	io::write_le(out, table.dimension());
	for (std::size_t r = 0; r < table.size(); ++r) {
		io::write_short_string(out, table.key(r));
		for (float x : table.row(r)) io::write_le(out, x);
	}
}

inline void write_embeddings(const EmbeddingTable& table, const std::string& path) {
	std::ofstream out(path, std::ios::binary);
	if (!out) throw Error("cannot write embedding file: " + path);
	write_embeddings(table, out);
}

inline EmbeddingTable read_embeddings(std::istream& in) {
	io::expect_magic(in, kEmbeddingMagic);
	auto version = io::read_le<std::uint32_t>(in, "embedding version");
	if (version != kEmbeddingVersion) throw FormatError("unsupported embedding file version " + std::to_string(version));
	auto count = io::read_le<std::uint64_t>(in, "embedding count");
	auto dim = io::read_le<std::uint32_t>(in, "embedding dimension");
	if (dim == 0) {
		if (count != 0) throw FormatError("embedding file declares dimension 0 with records");
		return EmbeddingTable{};
	}
	EmbeddingTable table(dim);
	std::vector<float> buf(dim);
	for (std::uint64_t i = 0; i < count; ++i) {
		auto key = io::read_short_string(in, "embedding key");
		for (auto& x : buf) x = io::read_f32(in, "embedding vector");
		try {
			table.add(std::move(key), buf);
		} catch (const ValidationError& e) {
			throw FormatError(std::string("record ") + std::to_string(i) + ": " + e.what());
		}
	}
	return table;
}

inline EmbeddingTable read_embeddings(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw FormatError("cannot open embedding file: " + path);
	return read_embeddings(in);
}

} // namespace trait
