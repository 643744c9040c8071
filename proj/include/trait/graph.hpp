#pragma once

// Correspondence graph (MRF edge structure) over sentences that share an
// attribute value, and the word-promotion table used by the generalized
// Polya urn.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trait/binary_io.hpp"
#include "trait/corpus.hpp"
#include "trait/embedding.hpp"
#include "trait/error.hpp"
#include "trait/parallel.hpp"

namespace trait {

/// u.v / (|u||v|), accumulated in double precision.
template <typename T>
double cosine_similarity(std::span<const T> u, std::span<const T> v) {
	if (u.size() != v.size()) throw ValidationError("cosine_similarity: dimension mismatch");
	double dot = 0.0;
	double nu = 0.0;
	double nv = 0.0;
	for (std::size_t k = 0; k < u.size(); ++k) {
		double a = static_cast<double>(u[k]);
		double b = static_cast<double>(v[k]);
		dot += a * b;
		nu += a * a;
		nv += b * b;
	}
	if (!(nu > 0.0) || !(nv > 0.0)) throw ValidationError("cosine_similarity: zero-norm vector");
	return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
	return cosine_similarity(std::span<const double>(u), std::span<const double>(v));
}

/// Symmetric sentence adjacency in CSR form, indexed by global sentence index.
class CorrespondenceGraph {
public:
	CorrespondenceGraph() = default;

	/// Builds from per-node neighbor lists; lists are sorted and deduplicated.
	CorrespondenceGraph(double rho, std::vector<std::string> keys, std::vector<std::vector<std::uint32_t>> adjacency)
	    : rho_(rho), keys_(std::move(keys)) {
		if (keys_.size() != adjacency.size()) throw ValidationError("graph keys/adjacency size mismatch");
		offsets_.reserve(adjacency.size() + 1);
		for (auto& list : adjacency) {
			std::sort(list.begin(), list.end());
			list.erase(std::unique(list.begin(), list.end()), list.end());
			neighbors_.insert(neighbors_.end(), list.begin(), list.end());
			offsets_.push_back(neighbors_.size());
		}
	}

	/// Empty graph over the corpus sentences (no correspondence).
	static CorrespondenceGraph empty(const Corpus& corpus, double rho = 1.0) {
		std::vector<std::string> keys;
		for (const auto* s : corpus.sentences()) keys.push_back(corpus.sentence_key(*s));
		return CorrespondenceGraph(rho, std::move(keys), std::vector<std::vector<std::uint32_t>>(corpus.num_sentences()));
	}

	double rho() const { return rho_; }
	std::size_t num_nodes() const { return keys_.size(); }
	std::size_t num_edges() const { return neighbors_.size() / 2; }
	const std::string& key(std::size_t node) const { return keys_.at(node); }
	const std::vector<std::string>& keys() const { return keys_; }

	std::span<const std::uint32_t> neighbors(std::size_t node) const {
		return std::span<const std::uint32_t>(neighbors_).subspan(offsets_[node], offsets_[node + 1] - offsets_[node]);
	}

	/// Throws ValidationError unless the graph is symmetric and loop-free and
	/// every edge stays within one attribute partition of `corpus`.
	void validate(const Corpus& corpus) const {
		auto sentences = corpus.sentences();
		if (sentences.size() != num_nodes()) {
			throw ValidationError("graph has " + std::to_string(num_nodes()) + " nodes but corpus has " +
			                      std::to_string(sentences.size()) + " sentences");
		}
		for (std::size_t i = 0; i < num_nodes(); ++i) {
			if (keys_[i] != corpus.sentence_key(*sentences[i])) {
				throw ValidationError("graph node " + std::to_string(i) + " is '" + keys_[i] + "' but corpus sentence is '" +
				                      corpus.sentence_key(*sentences[i]) + "'");
			}
			auto ai = corpus.documents[sentences[i]->doc].attribute;
			for (auto j : neighbors(i)) {
				if (j == i) throw ValidationError("self-loop at " + keys_[i]);
				if (j >= num_nodes()) throw ValidationError("neighbor index out of range at " + keys_[i]);
				auto nj = neighbors(j);
				if (!std::binary_search(nj.begin(), nj.end(), static_cast<std::uint32_t>(i))) {
					throw ValidationError("asymmetric edge " + keys_[i] + " -> " + keys_[j]);
				}
				if (corpus.documents[sentences[j]->doc].attribute != ai) {
					throw ValidationError("edge crosses attribute values: " + keys_[i] + " -- " + keys_[j]);
				}
			}
		}
	}

private:
	double rho_ = 1.0;
	std::vector<std::string> keys_;
	std::vector<std::size_t> offsets_{0};
	std::vector<std::uint32_t> neighbors_;
};

/// Exact all-pairs construction within each attribute partition: an edge
/// (i, j) exists iff i != j and cosine(e_i, e_j) > rho (strict).
inline CorrespondenceGraph build_correspondence_graph(const EmbeddingTable& embeddings, const Corpus& corpus,
                                                      const AttributePartition& partitions, double rho,
                                                      unsigned threads = worker_threads()) {
	if (!(rho >= -1.0 && rho <= 1.0)) throw ValidationError("rho must lie in [-1, 1]");
	auto sentences = corpus.sentences();
	std::vector<std::string> keys(sentences.size());
	for (std::size_t i = 0; i < sentences.size(); ++i) keys[i] = corpus.sentence_key(*sentences[i]);

	// Raw single-precision rows gathered in sentence order, with norms
	// accumulated exactly as cosine_similarity does so both agree bit-for-bit.
	const std::size_t dim = embeddings.dimension();
	std::vector<float> rows(sentences.size() * dim);
	std::vector<double> norms(sentences.size(), 0.0);
	for (const auto& part : partitions) {
		for (auto g : part) {
			auto row = embeddings.lookup(keys.at(g));
			if (!row) throw ValidationError("missing embedding for sentence '" + keys[g] + "'");
			double sq = 0.0;
			for (std::size_t k = 0; k < dim; ++k) {
				rows[g * dim + k] = (*row)[k];
				sq += static_cast<double>((*row)[k]) * static_cast<double>((*row)[k]);
			}
			norms[g] = std::sqrt(sq);
		}
	}
	auto cosine = [&](std::size_t a, std::size_t b) {
		const float* x = &rows[a * dim];
		const float* y = &rows[b * dim];
		double acc = 0.0;
		for (std::size_t k = 0; k < dim; ++k) acc += static_cast<double>(x[k]) * static_cast<double>(y[k]);
		return std::clamp(acc / (norms[a] * norms[b]), -1.0, 1.0);
	};

	std::vector<std::vector<std::uint32_t>> adjacency(sentences.size());
	constexpr std::size_t kBlock = 256;
	for (const auto& part : partitions) {
		const std::size_t n = part.size();
		// Each row is owned by one worker; cosine(a,b) == cosine(b,a) bit-for-bit, so
		// rows computed independently stay mutually symmetric.
		parallel_for(
		    (n + kBlock - 1) / kBlock,
		    [&](std::size_t block_begin, std::size_t block_end) {
			    for (std::size_t rb = block_begin; rb < block_end; ++rb) {
				    std::size_t r0 = rb * kBlock;
				    std::size_t r1 = std::min(n, r0 + kBlock);
				    for (std::size_t c0 = 0; c0 < n; c0 += kBlock) {
					    std::size_t c1 = std::min(n, c0 + kBlock);
					    for (std::size_t r = r0; r < r1; ++r) {
						    for (std::size_t c = c0; c < c1; ++c) {
							    if (r == c) continue;
							    if (cosine(part[r], part[c]) > rho) {
								    adjacency[part[r]].push_back(static_cast<std::uint32_t>(part[c]));
							    }
						    }
					    }
				    }
			    }
		    },
		    threads);
	}
	return CorrespondenceGraph(rho, std::move(keys), std::move(adjacency));
}

inline CorrespondenceGraph build_correspondence_graph(const EmbeddingTable& embeddings, const Corpus& corpus, double rho,
                                                      unsigned threads = worker_threads()) {
	return build_correspondence_graph(embeddings, corpus, partition_by_attribute(corpus), rho, threads);
}

// Graph file:
//   magic "TRGR" | version u32 | rho f64 | nodes u64
//   nodes x ( key (u16 len + bytes) | degree u32 | degree x u32 neighbor index )
inline constexpr std::string_view kGraphMagic = "TRGR";
inline constexpr std::uint32_t kGraphVersion = 1;

inline void write_graph(const CorrespondenceGraph& g, std::ostream& out) {
	io::write_magic(out, kGraphMagic);
	io::write_le(out, kGraphVersion);
	io::write_le(out, g.rho());
	io::write_le(out, static_cast<std::uint64_t>(g.num_nodes()));
	for (std::size_t i = 0; i < g.num_nodes(); ++i) {
		io::write_short_string(out, g.key(i));
		auto nb = g.neighbors(i);
		io::write_le(out, static_cast<std::uint32_t>(nb.size()));
		for (auto j : nb) io::write_le(out, j);
	}
}

inline void write_graph(const CorrespondenceGraph& g, const std::string& path) {
	std::ofstream out(path, std::ios::binary);
	if (!out) throw Error("cannot write graph file: " + path);
	write_graph(g, out);
}

inline CorrespondenceGraph read_graph(std::istream& in) {
	io::expect_magic(in, kGraphMagic);
	auto version = io::read_le<std::uint32_t>(in, "graph version");
	if (version != kGraphVersion) throw FormatError("unsupported graph file version " + std::to_string(version));
	double rho = io::read_f64(in, "graph rho");
	auto n = io::read_le<std::uint64_t>(in, "graph node count");
	std::vector<std::string> keys;
	std::vector<std::vector<std::uint32_t>> adjacency;
	keys.reserve(n);
	adjacency.reserve(n);
	for (std::uint64_t i = 0; i < n; ++i) {
		keys.push_back(io::read_short_string(in, "graph key"));
		auto deg = io::read_le<std::uint32_t>(in, "graph degree");
		std::vector<std::uint32_t> nb(deg);
		for (auto& j : nb) {
			j = io::read_le<std::uint32_t>(in, "graph neighbor");
			if (j >= n) throw FormatError("graph neighbor index out of range at node " + std::to_string(i));
		}
		adjacency.push_back(std::move(nb));
	}
	return CorrespondenceGraph(rho, std::move(keys), std::move(adjacency));
}

inline CorrespondenceGraph read_graph(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw FormatError("cannot open graph file: " + path);
	return read_graph(in);
}

/// Related words promoted alongside each observed word: related(v) lists
/// (v', weight) pairs. Stored directionally as computed per word.
class PromotionTable {
public:
	struct Entry {
		WordId word;
		double weight;
		double cosine;
	};

	PromotionTable() = default;
	explicit PromotionTable(std::size_t vocab_size) : related_(vocab_size) {}

	std::size_t vocab_size() const { return related_.size(); }
	std::span<const Entry> related(WordId v) const {
		if (v >= related_.size()) return {};
		return related_[v];
	}
	std::vector<Entry>& mutable_related(WordId v) { return related_.at(v); }

	std::size_t num_pairs() const {
		std::size_t n = 0;
		for (const auto& r : related_) n += r.size();
		return n;
	}

private:
	std::vector<std::vector<Entry>> related_;
};

struct PromotionOptions {
	double epsilon = 0.3;
	double threshold = 0.5;
	std::size_t top_k = 10;
};

/// For each embedded vocabulary word, keeps up to top_k other words with
/// cosine >= threshold (ranked by cosine, ties by vocab id), each weighted
/// epsilon. Words without embeddings get empty lists.
inline PromotionTable build_promotion_table(const EmbeddingTable& word_embeddings, const Vocabulary& vocabulary,
                                            const PromotionOptions& opt, unsigned threads = worker_threads()) {
	if (!(opt.epsilon > 0.0 && opt.epsilon <= 1.0)) throw ValidationError("promotion epsilon must lie in (0, 1]");
	if (!(opt.threshold >= -1.0 && opt.threshold <= 1.0)) throw ValidationError("promotion threshold must lie in [-1, 1]");
	if (opt.top_k < 1) throw ValidationError("promotion top_k must be >= 1");
	const std::size_t w_count = vocabulary.size();
	PromotionTable table(w_count);
	std::vector<WordId> embedded;
	std::vector<std::span<const float>> rows;
	for (WordId v = 0; v < w_count; ++v) {
		if (auto r = word_embeddings.lookup(vocabulary.term(v))) {
			embedded.push_back(v);
			rows.push_back(*r);
		}
	}
	parallel_for(
	    embedded.size(),
	    [&](std::size_t begin, std::size_t end) {
		    std::vector<std::pair<double, WordId>> cands;
		    for (std::size_t a = begin; a < end; ++a) {
			    cands.clear();
			    for (std::size_t b = 0; b < embedded.size(); ++b) {
				    if (a == b) continue;
				    double c = cosine_similarity(rows[a], rows[b]);
				    if (c >= opt.threshold) cands.emplace_back(c, embedded[b]);
			    }
			    std::sort(cands.begin(), cands.end(), [](const auto& x, const auto& y) {
				    return x.first != y.first ? x.first > y.first : x.second < y.second;
			    });
			    if (cands.size() > opt.top_k) cands.resize(opt.top_k);
			    auto& out = table.mutable_related(embedded[a]);
			    for (const auto& [c, w] : cands) out.push_back({w, opt.epsilon, c});
		    }
	    },
	    threads);
	return table;
}

} // namespace trait
