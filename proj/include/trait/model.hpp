#pragma once

// Model configuration, sufficient-statistic tables and the immutable sentence
// layout shared by every chain over one corpus.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trait/corpus.hpp"
#include "trait/error.hpp"
#include "trait/graph.hpp"
#include "trait/lexicon.hpp"

namespace trait {

struct Hyperparams {
	std::size_t S = 2;
	std::size_t T = 20;
	AlphaPrior alpha;
	std::vector<double> beta;  // per sentiment
	std::vector<double> gamma; // per aspect
	double lambda = 1.0;
	double epsilon = 0.3;
	std::size_t iterations = 1000;
	std::size_t burn_in = 500;
	std::uint64_t seed = 42;

	static std::vector<double> default_gamma(std::size_t T) { return std::vector<double>(T, 50.0 / static_cast<double>(T)); }
	static std::vector<double> default_beta(std::size_t S) { return std::vector<double>(S, 5.0); }

	double beta_sum() const {
		double acc = 0.0;
		for (double b : beta) acc += b;
		return acc;
	}
	double gamma_sum() const {
		double acc = 0.0;
		for (double g : gamma) acc += g;
		return acc;
	}

	/// Throws ValidationError naming the first violated constraint.
	void validate(std::size_t vocab_size) const {
		if (S < 1) throw ValidationError("S >= 1 required");
		if (T < 1) throw ValidationError("T >= 1 required");
		if (beta.size() != S) throw ValidationError("beta must have one entry per sentiment");
		if (gamma.size() != T) throw ValidationError("gamma must have one entry per aspect");
		for (double b : beta) {
			if (!(b > 0.0)) throw ValidationError("beta_s > 0 required");
		}
		for (double g : gamma) {
			if (!(g > 0.0)) throw ValidationError("gamma_t > 0 required");
		}
		if (alpha.sentiments() != S || alpha.vocab_size() != vocab_size) {
			throw ValidationError("alpha must be an S x W matrix");
		}
		for (double a : alpha.values()) {
			if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("alpha(s, v) >= 0 required");
		}
		for (std::size_t s = 0; s < S; ++s) {
			if (!(alpha.sum(s) > 0.0)) throw ValidationError("sum_v alpha(s, v) > 0 required for every sentiment");
		}
		if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda >= 0 required");
		if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon in [0, 1] required");
	}
};

/// Sufficient statistics. Word counts are fractional because urn promotions
/// add epsilon mass; sentence-level counts stay integral.
struct CountTables {
	std::size_t S = 0, T = 0, A = 0, D = 0, W = 0;
	std::vector<double> n_word;          // [s][t][v]
	std::vector<double> n_word_total;    // [s][t]
	std::vector<std::int64_t> n_aspect;  // [s][a][t]
	std::vector<std::int64_t> n_aspect_total; // [s][a]
	std::vector<std::int64_t> n_sent;    // [d][s]
	std::vector<std::int64_t> n_sent_total; // [d]

	CountTables() = default;
	CountTables(std::size_t s, std::size_t t, std::size_t a, std::size_t d, std::size_t w)
	    : S(s), T(t), A(a), D(d), W(w), n_word(s * t * w, 0.0), n_word_total(s * t, 0.0), n_aspect(s * a * t, 0),
	      n_aspect_total(s * a, 0), n_sent(d * s, 0), n_sent_total(d, 0) {}

	double& word(std::size_t s, std::size_t t, WordId v) { return n_word[(s * T + t) * W + v]; }
	double word(std::size_t s, std::size_t t, WordId v) const { return n_word[(s * T + t) * W + v]; }
	double& word_total(std::size_t s, std::size_t t) { return n_word_total[s * T + t]; }
	double word_total(std::size_t s, std::size_t t) const { return n_word_total[s * T + t]; }
	std::int64_t& aspect(std::size_t s, std::size_t a, std::size_t t) { return n_aspect[(s * A + a) * T + t]; }
	std::int64_t aspect(std::size_t s, std::size_t a, std::size_t t) const { return n_aspect[(s * A + a) * T + t]; }
	std::int64_t& aspect_total(std::size_t s, std::size_t a) { return n_aspect_total[s * A + a]; }
	std::int64_t aspect_total(std::size_t s, std::size_t a) const { return n_aspect_total[s * A + a]; }
	std::int64_t& sent(std::size_t d, std::size_t s) { return n_sent[d * S + s]; }
	std::int64_t sent(std::size_t d, std::size_t s) const { return n_sent[d * S + s]; }
	std::int64_t& sent_total(std::size_t d) { return n_sent_total[d]; }
	std::int64_t sent_total(std::size_t d) const { return n_sent_total[d]; }

	/// Largest absolute difference over every table; shapes must agree.
	double max_abs_diff(const CountTables& o) const {
		if (S != o.S || T != o.T || A != o.A || D != o.D || W != o.W) return INFINITY;
		double m = 0.0;
		for (std::size_t i = 0; i < n_word.size(); ++i) m = std::max(m, std::abs(n_word[i] - o.n_word[i]));
		for (std::size_t i = 0; i < n_word_total.size(); ++i) m = std::max(m, std::abs(n_word_total[i] - o.n_word_total[i]));
		auto cmp = [&m](const std::vector<std::int64_t>& x, const std::vector<std::int64_t>& y) {
			for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(static_cast<double>(x[i] - y[i])));
		};
		cmp(n_aspect, o.n_aspect);
		cmp(n_aspect_total, o.n_aspect_total);
		cmp(n_sent, o.n_sent);
		cmp(n_sent_total, o.n_sent_total);
		return m;
	}

	/// Non-negativity and marginal consistency; throws ConsistencyError.
	void check_invariants(double tol = 1e-6) const {
		for (double x : n_word) {
			if (x < -1e-9) throw ConsistencyError("negative word count");
		}
		for (std::size_t st = 0; st < S * T; ++st) {
			double acc = 0.0;
			for (std::size_t v = 0; v < W; ++v) acc += n_word[st * W + v];
			if (std::abs(acc - n_word_total[st]) > tol) throw ConsistencyError("n_word_total drifted from sum of n_word");
		}
		for (std::size_t sa = 0; sa < S * A; ++sa) {
			std::int64_t acc = 0;
			for (std::size_t t = 0; t < T; ++t) {
				if (n_aspect[sa * T + t] < 0) throw ConsistencyError("negative aspect count");
				acc += n_aspect[sa * T + t];
			}
			if (acc != n_aspect_total[sa]) throw ConsistencyError("n_aspect_total mismatch");
		}
		for (std::size_t d = 0; d < D; ++d) {
			std::int64_t acc = 0;
			for (std::size_t s = 0; s < S; ++s) {
				if (n_sent[d * S + s] < 0) throw ConsistencyError("negative sentiment count");
				acc += n_sent[d * S + s];
			}
			if (acc != n_sent_total[d]) throw ConsistencyError("n_sent_total mismatch");
		}
	}
};

/// Per-sentence sentiment/aspect labels.
struct Assignment {
	std::vector<std::uint16_t> sentiment;
	std::vector<std::uint16_t> aspect;

	std::size_t size() const { return sentiment.size(); }
	bool operator==(const Assignment&) const = default;
};

/// Immutable, chain-independent view of a corpus prepared for sampling:
/// per-sentence word multiplicities, aggregated urn increments and MRF
/// neighbor lists.
class ModelLayout {
public:
	struct WordCount {
		WordId word;
		std::uint32_t count;
	};
	struct UrnDelta {
		WordId word;
		double mass;
	};

	std::size_t num_sentences() const { return doc_.size(); }
	std::size_t num_docs() const { return doc_sizes_.size(); }
	std::size_t num_attributes() const { return num_attributes_; }
	std::size_t vocab_size() const { return vocab_size_; }

	std::uint32_t doc(std::size_t i) const { return doc_[i]; }
	std::uint32_t attribute(std::size_t i) const { return attr_[i]; }
	std::uint32_t length(std::size_t i) const { return length_[i]; }
	std::uint32_t doc_size(std::size_t d) const { return doc_sizes_[d]; }

	std::span<const WordCount> words(std::size_t i) const {
		return std::span<const WordCount>(words_).subspan(word_off_[i], word_off_[i + 1] - word_off_[i]);
	}
	std::span<const UrnDelta> deltas(std::size_t i) const {
		return std::span<const UrnDelta>(deltas_).subspan(delta_off_[i], delta_off_[i + 1] - delta_off_[i]);
	}
	double delta_total(std::size_t i) const { return delta_total_[i]; }
	std::span<const std::uint32_t> neighbors(std::size_t i) const {
		return std::span<const std::uint32_t>(nb_).subspan(nb_off_[i], nb_off_[i + 1] - nb_off_[i]);
	}
	bool urn_enabled() const { return urn_; }

	/// Builds the layout. The graph must cover the corpus sentences in order;
	/// `promotion` may be null (no urn), and is ignored when epsilon == 0.
	static std::shared_ptr<const ModelLayout> build(const Corpus& corpus, const CorrespondenceGraph& graph,
	                                                const PromotionTable* promotion, double epsilon) {
		graph.validate(corpus);
		auto L = std::make_shared<ModelLayout>();
		L->num_attributes_ = corpus.attributes.size();
		L->vocab_size_ = corpus.vocabulary.size();
		L->urn_ = promotion != nullptr && epsilon > 0.0;
		L->word_off_.push_back(0);
		L->delta_off_.push_back(0);
		L->nb_off_.push_back(0);
		std::size_t g = 0;
		for (const auto& doc : corpus.documents) {
			L->doc_sizes_.push_back(static_cast<std::uint32_t>(doc.sentences.size()));
			for (const auto& s : doc.sentences) {
				L->doc_.push_back(s.doc);
				L->attr_.push_back(doc.attribute);
				L->length_.push_back(static_cast<std::uint32_t>(s.words.size()));
				std::map<WordId, std::uint32_t> counts;
				for (auto w : s.words) ++counts[w];
				std::map<WordId, double> mass;
				for (const auto& [w, c] : counts) {
					L->words_.push_back({w, c});
					mass[w] += c;
					if (L->urn_) {
						for (const auto& e : promotion->related(w)) mass[e.word] += e.weight * c;
					}
				}
				double total = 0.0;
				for (const auto& [w, m] : mass) {
					L->deltas_.push_back({w, m});
					total += m;
				}
				L->delta_total_.push_back(total);
				L->word_off_.push_back(L->words_.size());
				L->delta_off_.push_back(L->deltas_.size());
				for (auto j : graph.neighbors(g)) L->nb_.push_back(j);
				L->nb_off_.push_back(L->nb_.size());
				++g;
			}
		}
		return L;
	}

private:
	std::size_t num_attributes_ = 0;
	std::size_t vocab_size_ = 0;
	bool urn_ = false;
	std::vector<std::uint32_t> doc_, attr_, length_, doc_sizes_;
	std::vector<WordCount> words_;
	std::vector<std::size_t> word_off_;
	std::vector<UrnDelta> deltas_;
	std::vector<std::size_t> delta_off_;
	std::vector<double> delta_total_;
	std::vector<std::uint32_t> nb_;
	std::vector<std::size_t> nb_off_;
};

/// One Markov chain: assignments, the count tables they induce, and the rng.
struct ModelState {
	std::shared_ptr<const ModelLayout> layout;
	Hyperparams hyper;
	Assignment assignment;
	CountTables counts;
	std::vector<std::uint8_t> in_counts; // 1 while sentence i contributes to counts
	std::mt19937_64 rng;
	std::uint64_t sweeps_done = 0;
};

} // namespace trait
