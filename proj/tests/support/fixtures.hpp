#pragma once

// Small corpora, hand-built states and brute-force oracles shared by the unit
// and acceptance suites. Nothing here calls the sampler's own formulas.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <trait.hpp>

namespace fixtures {

using namespace trait;

struct DocSpec {
	std::string id;
	std::string attribute;
	std::optional<int> rating;
	std::vector<std::vector<std::string>> sentences;
};

inline Corpus make_corpus(const std::vector<DocSpec>& docs) {
	CorpusBuilder b;
	for (const auto& d : docs) b.add({d.id, d.attribute, d.rating, d.sentences});
	return std::move(b).build();
}

/// A chain positioned at `x` with counts rebuilt from scratch.
inline ModelState state_at(const Corpus& corpus, const CorrespondenceGraph& graph, const PromotionTable* promotion,
                           const Hyperparams& hyper, const Assignment& x) {
	ModelState st;
	st.layout = ModelLayout::build(corpus, graph, promotion, hyper.epsilon);
	st.hyper = hyper;
	st.assignment = x;
	st.counts = rebuild_counts(corpus, promotion, hyper.epsilon, x, hyper.S, hyper.T);
	st.in_counts.assign(x.size(), 1);
	st.rng.seed(hyper.seed);
	return st;
}

inline Hyperparams symmetric_hyper(std::size_t S, std::size_t T, std::size_t W, double alpha, double beta, double gamma) {
	Hyperparams h;
	h.S = S;
	h.T = T;
	h.alpha = AlphaPrior(S, W, alpha);
	h.beta.assign(S, beta);
	h.gamma.assign(T, gamma);
	h.lambda = 0.0;
	h.epsilon = 0.0;
	return h;
}

// Oracle ---------------------------------------------------------------------

/// log Gamma(x + a) - log Gamma(a): the rising-factorial ratio in Gamma form;
/// -inf when a == 0 < x (a zero-prior word that was observed).
inline double log_gamma_ratio(double x, double a) {
	if (x == 0.0) return 0.0;
	if (a == 0.0) return -std::numeric_limits<double>::infinity();
	return std::lgamma(x + a) - std::lgamma(a);
}

/// Log of the collapsed joint, up to a constant, evaluated directly from
/// Gamma-function closed forms: Dirichlet-multinomial terms for words,
/// aspects and sentiments, and the edge potential exp(lambda * I(t_i = t_j) /
/// degree) once per undirected edge. Word counts include urn promotions of
/// every sentence except `focus` (pass SIZE_MAX to promote all).
inline double oracle_log_joint(const Corpus& corpus, const std::vector<std::vector<std::uint32_t>>& adjacency,
                               const PromotionTable* promotion, const Hyperparams& h, const Assignment& x,
                               std::size_t focus = std::numeric_limits<std::size_t>::max()) {
	const std::size_t S = h.S, T = h.T, W = corpus.vocabulary.size(), A = corpus.attributes.size();
	std::vector<double> nw(S * T * W, 0.0);
	std::vector<double> na(S * A * T, 0.0);
	std::vector<double> nd(corpus.documents.size() * S, 0.0);
	std::size_t i = 0;
	for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
		const auto& doc = corpus.documents[d];
		for (const auto& sent : doc.sentences) {
			const std::size_t s = x.sentiment[i], t = x.aspect[i];
			nd[d * S + s] += 1;
			na[(s * A + doc.attribute) * T + t] += 1;
			for (auto w : sent.words) {
				nw[(s * T + t) * W + w] += 1;
				if (promotion != nullptr && h.epsilon > 0.0 && i != focus) {
					for (const auto& e : promotion->related(w)) nw[(s * T + t) * W + e.word] += e.weight;
				}
			}
			++i;
		}
	}
	double lp = 0.0;
	for (std::size_t s = 0; s < S; ++s) {
		for (std::size_t t = 0; t < T; ++t) {
			double tot = 0.0;
			for (std::size_t v = 0; v < W; ++v) {
				lp += log_gamma_ratio(nw[(s * T + t) * W + v], h.alpha(s, static_cast<WordId>(v)));
				tot += nw[(s * T + t) * W + v];
			}
			lp -= log_gamma_ratio(tot, h.alpha.sum(s));
		}
	}
	double gsum = 0.0;
	for (double g : h.gamma) gsum += g;
	for (std::size_t s = 0; s < S; ++s) {
		for (std::size_t a = 0; a < A; ++a) {
			double tot = 0.0;
			for (std::size_t t = 0; t < T; ++t) {
				lp += log_gamma_ratio(na[(s * A + a) * T + t], h.gamma[t]);
				tot += na[(s * A + a) * T + t];
			}
			lp -= log_gamma_ratio(tot, gsum);
		}
	}
	double bsum = 0.0;
	for (double b : h.beta) bsum += b;
	for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
		double tot = 0.0;
		for (std::size_t s = 0; s < S; ++s) {
			lp += log_gamma_ratio(nd[d * S + s], h.beta[s]);
			tot += nd[d * S + s];
		}
		lp -= log_gamma_ratio(tot, bsum);
	}
	for (std::size_t a = 0; a < adjacency.size(); ++a) {
		for (auto b : adjacency[a]) {
			if (b <= a) continue;
			if (x.aspect[a] == x.aspect[b]) lp += h.lambda / static_cast<double>(adjacency[a].size());
		}
	}
	return lp;
}

/// Conditional of sentence i over the S x T cells by enumerating the joint at
/// every completion of x_{-i}. Returns an all-zero vector when every
/// completion has zero probability.
inline std::vector<double> oracle_conditional(const Corpus& corpus, const std::vector<std::vector<std::uint32_t>>& adjacency,
                                              const PromotionTable* promotion, const Hyperparams& h, Assignment x, std::size_t i) {
	std::vector<double> lj(h.S * h.T);
	double mx = -std::numeric_limits<double>::infinity();
	for (std::size_t s = 0; s < h.S; ++s) {
		for (std::size_t t = 0; t < h.T; ++t) {
			x.sentiment[i] = static_cast<std::uint16_t>(s);
			x.aspect[i] = static_cast<std::uint16_t>(t);
			lj[s * h.T + t] = oracle_log_joint(corpus, adjacency, promotion, h, x, i);
			mx = std::max(mx, lj[s * h.T + t]);
		}
	}
	std::vector<double> p(lj.size(), 0.0);
	if (!std::isfinite(mx)) return p;
	double z = 0.0;
	for (std::size_t k = 0; k < lj.size(); ++k) z += p[k] = std::exp(lj[k] - mx);
	for (auto& v : p) v /= z;
	return p;
}

// Random tiny problems ----------------------------------------------------------

struct TinyProblem {
	Corpus corpus;
	std::vector<std::vector<std::uint32_t>> adjacency;
	CorrespondenceGraph graph;
	PromotionTable promotion;
	Hyperparams hyper;
};

/// Random corpus of at most max_sentences sentences of 1..max_words words over
/// W terms, a graph whose non-isolated nodes share one degree (1 or 2) within
/// attribute partitions, a random directional promotion table and either a
/// symmetric or a lexicon-style asymmetric word prior.
template <typename Rng>
TinyProblem random_tiny_problem(Rng& rng, std::size_t W, std::size_t max_sentences, std::size_t max_words, double lambda,
                                double epsilon) {
	TinyProblem p;
	auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng() % (hi - lo + 1)); };
	const std::size_t n_sent = pick(2, max_sentences);
	const std::size_t n_docs = pick(1, std::min<std::size_t>(3, n_sent));
	const std::size_t n_attr = pick(1, 2);
	std::vector<DocSpec> docs(n_docs);
	for (std::size_t d = 0; d < n_docs; ++d) {
		docs[d].id = "doc" + std::to_string(d);
		docs[d].attribute = "attr" + std::to_string(d % n_attr);
	}
	// Seed every term once; a later seeding may overwrite an earlier one, so
	// W is re-read from the built vocabulary.
	std::vector<std::string> pool;
	for (std::size_t v = 0; v < W; ++v) pool.push_back("w" + std::to_string(v));
	std::vector<std::vector<std::string>> sentences(n_sent);
	for (auto& s : sentences) {
		std::size_t len = pick(1, max_words);
		for (std::size_t k = 0; k < len; ++k) s.push_back(pool[pick(0, W - 1)]);
	}
	for (std::size_t v = 0; v < W; ++v) sentences[pick(0, n_sent - 1)][0] = pool[v];
	for (std::size_t k = 0; k < n_sent; ++k) docs[k < n_docs ? k : pick(0, n_docs - 1)].sentences.push_back(sentences[k]);
	p.corpus = make_corpus(docs);
	W = p.corpus.vocabulary.size(); // an overwritten first token can drop a term

	// Graph: within each partition, pair sentences up (degree 1) or close a
	// cycle (degree 2) over a random subset.
	const std::size_t n = p.corpus.num_sentences();
	p.adjacency.assign(n, {});
	if (lambda > 0.0) {
		auto parts = partition_by_attribute(p.corpus);
		const bool cycle = rng() % 2 == 0;
		for (auto& part : parts) {
			std::shuffle(part.begin(), part.end(), rng);
			if (cycle && part.size() >= 3) {
				std::size_t m = pick(3, part.size());
				for (std::size_t k = 0; k < m; ++k) {
					auto a = static_cast<std::uint32_t>(part[k]), b = static_cast<std::uint32_t>(part[(k + 1) % m]);
					p.adjacency[a].push_back(b);
					p.adjacency[b].push_back(a);
				}
			} else if (!cycle) {
				for (std::size_t k = 0; k + 1 < part.size(); k += 2) {
					auto a = static_cast<std::uint32_t>(part[k]), b = static_cast<std::uint32_t>(part[k + 1]);
					p.adjacency[a].push_back(b);
					p.adjacency[b].push_back(a);
				}
			}
		}
	}
	std::vector<std::string> keys;
	for (const auto* s : p.corpus.sentences()) keys.push_back(p.corpus.sentence_key(*s));
	p.graph = CorrespondenceGraph(0.7, keys, p.adjacency);
	for (auto& a : p.adjacency) std::sort(a.begin(), a.end());

	p.promotion = PromotionTable(W);
	if (epsilon > 0.0) {
		for (WordId v = 0; v < W; ++v) {
			for (WordId u = 0; u < W; ++u) {
				if (u != v && rng() % 3 == 0) p.promotion.mutable_related(v).push_back({u, epsilon, 0.9});
			}
		}
	}

	std::uniform_real_distribution<double> unif(0.05, 1.5);
	p.hyper.S = 2;
	p.hyper.T = 2;
	if (rng() % 2 == 0) {
		p.hyper.alpha = AlphaPrior(2, W, unif(rng));
	} else {
		SentimentLexicon lex;
		lex.positive = {"w0"};
		lex.negative = {"w1"};
		p.hyper.alpha = build_alpha(lex, p.corpus.vocabulary, 2, AlphaOptions{5.0, 0.0, 0.05});
	}
	p.hyper.beta = {unif(rng), unif(rng)};
	p.hyper.gamma = {unif(rng), unif(rng)};
	p.hyper.lambda = lambda;
	p.hyper.epsilon = epsilon;
	return p;
}

template <typename Rng>
Assignment random_assignment(std::size_t n, std::size_t S, std::size_t T, Rng& rng) {
	Assignment x;
	for (std::size_t i = 0; i < n; ++i) {
		x.sentiment.push_back(static_cast<std::uint16_t>(rng() % S));
		x.aspect.push_back(static_cast<std::uint16_t>(rng() % T));
	}
	return x;
}

/// Largest relative error of `got` against the oracle, with zeros required to
/// match exactly.
inline double max_relative_error(const std::vector<double>& got, const std::vector<double>& want) {
	double worst = 0.0;
	for (std::size_t k = 0; k < want.size(); ++k) {
		if (want[k] == 0.0) {
			if (got[k] != 0.0) return std::numeric_limits<double>::infinity();
			continue;
		}
		worst = std::max(worst, std::abs(got[k] - want[k]) / want[k]);
	}
	return worst;
}

} // namespace fixtures
