#pragma once

// Model checkpoints: everything needed to resume a chain bit-exactly or to
// compute estimates without the original inputs.
//
//   magic "TRCK" | version u32
//   S, T, A, D, W u32 | lambda, epsilon f64 | iterations, burn_in, seed, sweeps u64
//   corpus, graph, promotion fingerprints u64
//   beta S x f64 | gamma T x f64 | alpha S*W x f64
//   rng state (u32 length + text)
//   sentences u64 | sentences x (sentiment u16, aspect u16)
//   n_word, n_word_total f64 | n_aspect, n_aspect_total, n_sent, n_sent_total i64
//   W terms, A attribute values, D document ids (u16 length + bytes each)

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "trait/binary_io.hpp"
#include "trait/corpus.hpp"
#include "trait/error.hpp"
#include "trait/estimates.hpp"
#include "trait/graph.hpp"
#include "trait/model.hpp"
#include "trait/sampler.hpp"

namespace trait {

inline constexpr std::string_view kCheckpointMagic = "TRCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Content hash of the tokenized corpus (ids, attributes, word ids).
inline std::uint64_t corpus_fingerprint(const Corpus& corpus) {
	std::uint64_t h = io::fnv1a("");
	for (const auto& t : corpus.vocabulary.terms()) h = io::fnv1a(t + '\n', h);
	for (const auto& d : corpus.documents) {
		h = io::fnv1a(d.id + '\x1f' + corpus.attributes.value(d.attribute) + '\x1e', h);
		for (const auto& s : d.sentences) {
			std::string buf;
			for (auto w : s.words) buf += std::to_string(w) + ',';
			h = io::fnv1a(buf + ';', h);
		}
	}
	return h;
}

inline std::uint64_t graph_fingerprint(const CorrespondenceGraph& g) {
	std::ostringstream out;
	write_graph(g, out);
	return io::fnv1a(out.str());
}

inline std::uint64_t promotion_fingerprint(const PromotionTable* p) {
	if (p == nullptr) return 0;
	std::ostringstream out;
	for (WordId v = 0; v < p->vocab_size(); ++v) {
		for (const auto& e : p->related(v)) {
			io::write_le(out, v);
			io::write_le(out, e.word);
			io::write_le(out, e.weight);
		}
	}
	return io::fnv1a(out.str());
}

struct Checkpoint {
	Hyperparams hyper;
	Assignment assignment;
	CountTables counts;
	std::string rng_state;
	std::uint64_t sweeps_done = 0;
	std::uint64_t corpus_hash = 0;
	std::uint64_t graph_hash = 0;
	std::uint64_t promotion_hash = 0;
	std::vector<std::string> terms;
	std::vector<std::string> attributes;
	std::vector<std::string> doc_ids;
};

inline Checkpoint make_checkpoint(const ModelState& st, const Corpus& corpus, const CorrespondenceGraph& graph,
                                  const PromotionTable* promotion) {
	Checkpoint c;
	c.hyper = st.hyper;
	c.assignment = st.assignment;
	c.counts = st.counts;
	std::ostringstream rng;
	rng << st.rng;
	c.rng_state = rng.str();
	c.sweeps_done = st.sweeps_done;
	c.corpus_hash = corpus_fingerprint(corpus);
	c.graph_hash = graph_fingerprint(graph);
	c.promotion_hash = st.hyper.epsilon > 0.0 ? promotion_fingerprint(promotion) : 0;
	c.terms = corpus.vocabulary.terms();
	c.attributes = corpus.attributes.values();
	for (const auto& d : corpus.documents) c.doc_ids.push_back(d.id);
	return c;
}

inline void write_checkpoint(const Checkpoint& c, std::ostream& out) {
	const auto& h = c.hyper;
	const auto& n = c.counts;
	io::write_magic(out, kCheckpointMagic);
	io::write_le(out, kCheckpointVersion);
	for (auto x : {n.S, n.T, n.A, n.D, n.W}) io::write_le(out, static_cast<std::uint32_t>(x));
	io::write_le(out, h.lambda);
	io::write_le(out, h.epsilon);
	io::write_le(out, static_cast<std::uint64_t>(h.iterations));
	io::write_le(out, static_cast<std::uint64_t>(h.burn_in));
	io::write_le(out, h.seed);
	io::write_le(out, c.sweeps_done);
	io::write_le(out, c.corpus_hash);
	io::write_le(out, c.graph_hash);
	io::write_le(out, c.promotion_hash);
	for (double b : h.beta) io::write_le(out, b);
	for (double g : h.gamma) io::write_le(out, g);
	for (double a : h.alpha.values()) io::write_le(out, a);
	io::write_le(out, static_cast<std::uint32_t>(c.rng_state.size()));
	out.write(c.rng_state.data(), static_cast<std::streamsize>(c.rng_state.size()));
	io::write_le(out, static_cast<std::uint64_t>(c.assignment.size()));
	for (std::size_t i = 0; i < c.assignment.size(); ++i) {
		io::write_le(out, c.assignment.sentiment[i]);
		io::write_le(out, c.assignment.aspect[i]);
	}
	for (double x : n.n_word) io::write_le(out, x);
	for (double x : n.n_word_total) io::write_le(out, x);
	for (const auto* v : {&n.n_aspect, &n.n_aspect_total, &n.n_sent, &n.n_sent_total}) {
		for (auto x : *v) io::write_le(out, x);
	}
	for (const auto& t : c.terms) io::write_short_string(out, t);
	for (const auto& a : c.attributes) io::write_short_string(out, a);
	for (const auto& d : c.doc_ids) io::write_short_string(out, d);
	if (!out) throw Error("failed writing checkpoint");
}

inline void write_checkpoint(const Checkpoint& c, const std::string& path) {
	std::ofstream out(path, std::ios::binary);
	if (!out) throw Error("cannot write checkpoint: " + path);
	write_checkpoint(c, out);
}

inline Checkpoint read_checkpoint(std::istream& in) {
	io::expect_magic(in, kCheckpointMagic);
	auto version = io::read_le<std::uint32_t>(in, "checkpoint version");
	if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
	std::size_t dims[5];
	for (auto& d : dims) d = io::read_le<std::uint32_t>(in, "checkpoint dimensions");
	const auto [S, T, A, D, W] = dims;
	if (S == 0 || T == 0 || W == 0) throw FormatError("checkpoint has empty dimensions");
	Checkpoint c;
	auto& h = c.hyper;
	h.S = S;
	h.T = T;
	h.lambda = io::read_f64(in, "lambda");
	h.epsilon = io::read_f64(in, "epsilon");
	h.iterations = io::read_le<std::uint64_t>(in, "iterations");
	h.burn_in = io::read_le<std::uint64_t>(in, "burn_in");
	h.seed = io::read_le<std::uint64_t>(in, "seed");
	c.sweeps_done = io::read_le<std::uint64_t>(in, "sweep index");
	c.corpus_hash = io::read_le<std::uint64_t>(in, "corpus fingerprint");
	c.graph_hash = io::read_le<std::uint64_t>(in, "graph fingerprint");
	c.promotion_hash = io::read_le<std::uint64_t>(in, "promotion fingerprint");
	h.beta.resize(S);
	for (auto& b : h.beta) b = io::read_f64(in, "beta");
	h.gamma.resize(T);
	for (auto& g : h.gamma) g = io::read_f64(in, "gamma");
	std::vector<double> alpha(S * W);
	for (auto& a : alpha) a = io::read_f64(in, "alpha");
	h.alpha = AlphaPrior::from_values(S, W, std::move(alpha));
	auto rng_len = io::read_le<std::uint32_t>(in, "rng state length");
	if (rng_len > (1u << 20)) throw FormatError("implausible rng state length");
	c.rng_state.resize(rng_len);
	in.read(c.rng_state.data(), rng_len);
	if (!in) throw FormatError("truncated rng state");
	auto n = io::read_le<std::uint64_t>(in, "sentence count");
	if (n > (1ull << 34)) throw FormatError("implausible sentence count");
	c.assignment.sentiment.resize(n);
	c.assignment.aspect.resize(n);
	for (std::size_t i = 0; i < n; ++i) {
		c.assignment.sentiment[i] = io::read_le<std::uint16_t>(in, "assignment");
		c.assignment.aspect[i] = io::read_le<std::uint16_t>(in, "assignment");
		if (c.assignment.sentiment[i] >= S || c.assignment.aspect[i] >= T) throw FormatError("assignment out of range");
	}
	c.counts = CountTables(S, T, A, D, W);
	for (auto& x : c.counts.n_word) x = io::read_f64(in, "word counts");
	for (auto& x : c.counts.n_word_total) x = io::read_f64(in, "word totals");
	for (auto* v : {&c.counts.n_aspect, &c.counts.n_aspect_total, &c.counts.n_sent, &c.counts.n_sent_total}) {
		for (auto& x : *v) x = io::read_le<std::int64_t>(in, "sentence counts");
	}
	c.terms.resize(W);
	for (auto& t : c.terms) t = io::read_short_string(in, "term");
	c.attributes.resize(A);
	for (auto& a : c.attributes) a = io::read_short_string(in, "attribute");
	c.doc_ids.resize(D);
	for (auto& d : c.doc_ids) d = io::read_short_string(in, "document id");
	try {
		c.counts.check_invariants();
	} catch (const ConsistencyError& e) {
		throw FormatError(std::string("checkpoint counts: ") + e.what());
	}
	return c;
}

inline Checkpoint read_checkpoint(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw FormatError("cannot open checkpoint: " + path);
	return read_checkpoint(in);
}

/// Rebuilds a live chain from a checkpoint over the same inputs. The stored
/// counts are kept (so a resumed run continues bit-exactly) after checking
/// them against a full rebuild from the assignment.
inline ModelState restore_state(const Checkpoint& c, const Corpus& corpus, const CorrespondenceGraph& graph,
                                const PromotionTable* promotion) {
	if (corpus_fingerprint(corpus) != c.corpus_hash) throw ValidationError("checkpoint was written for a different corpus");
	if (graph_fingerprint(graph) != c.graph_hash) throw ValidationError("checkpoint was written for a different graph");
	if (c.hyper.epsilon > 0.0 && promotion_fingerprint(promotion) != c.promotion_hash) {
		throw ValidationError("checkpoint was written for a different promotion table");
	}
	ModelState st;
	st.layout = ModelLayout::build(corpus, graph, promotion, c.hyper.epsilon);
	st.hyper = c.hyper;
	st.hyper.validate(corpus.vocabulary.size());
	if (c.assignment.size() != st.layout->num_sentences()) throw ValidationError("checkpoint assignment size differs from corpus");
	st.assignment = c.assignment;
	auto rebuilt = rebuild_counts(corpus, promotion, c.hyper.epsilon, c.assignment, c.hyper.S, c.hyper.T);
	if (rebuilt.max_abs_diff(c.counts) > 1e-6) throw ValidationError("checkpoint counts disagree with its assignment");
	st.counts = c.counts;
	st.in_counts.assign(c.assignment.size(), 1);
	std::istringstream rng(c.rng_state);
	rng >> st.rng;
	if (!rng) throw FormatError("checkpoint rng state is unreadable");
	st.sweeps_done = c.sweeps_done;
	return st;
}

/// Estimates straight from a checkpoint, with names attached.
inline PosteriorEstimates estimate(const Checkpoint& c) {
	auto e = estimate(c.counts, c.hyper);
	e.terms = c.terms;
	e.attributes = c.attributes;
	e.doc_ids = c.doc_ids;
	return e;
}

} // namespace trait
