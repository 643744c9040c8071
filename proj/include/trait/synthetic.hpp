#pragma once

// Synthetic corpora drawn from the model's own generative process, with the
// planted parameters returned alongside, plus planted embeddings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "trait/corpus.hpp"
#include "trait/embedding.hpp"
#include "trait/error.hpp"
#include "trait/lexicon.hpp"
#include "trait/sampler.hpp"
#include "trait/text.hpp"

namespace trait {

namespace detail {

/// Gamma(shape, 1) in log space: log G(a) = log G(a + 1) + log(U) / a keeps
/// small shapes from underflowing.
template <typename Rng>
double log_gamma_variate(double shape, Rng& rng) {
	std::gamma_distribution<double> g(shape + 1.0, 1.0);
	double u = uniform01(rng);
	while (u <= 0.0) u = uniform01(rng);
	return std::log(g(rng)) + std::log(u) / shape;
}

} // namespace detail

/// Dirichlet draw; zero concentrations yield exact zeros.
template <typename Rng>
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
	std::vector<double> logs(alpha.size(), -INFINITY);
	double mx = -INFINITY;
	for (std::size_t k = 0; k < alpha.size(); ++k) {
		if (alpha[k] < 0.0) throw ValidationError("Dirichlet concentration must be nonnegative");
		if (alpha[k] == 0.0) continue;
		logs[k] = detail::log_gamma_variate(alpha[k], rng);
		mx = std::max(mx, logs[k]);
	}
	if (mx == -INFINITY) throw ValidationError("Dirichlet needs a positive concentration");
	std::vector<double> out(alpha.size(), 0.0);
	double z = 0.0;
	for (std::size_t k = 0; k < alpha.size(); ++k) {
		if (logs[k] == -INFINITY) continue;
		out[k] = std::exp(logs[k] - mx);
		z += out[k];
	}
	for (double& x : out) x /= z;
	return out;
}

/// Lexicon words that survive normalization unchanged (stable under
/// stemming), in lexicon order; at most `limit` per polarity.
inline SentimentLexicon stable_lexicon(std::size_t limit) {
	auto lex = default_lexicon();
	NormalizationConfig rules;
	SentimentLexicon out;
	auto pick = [&](const std::set<std::string>& src, std::set<std::string>& dst) {
		for (const auto& w : src) {
			if (dst.size() >= limit) break;
			if (w.starts_with(kNegationPrefix) || porter_stem(w) != w || rules.stop_words.contains(w)) continue;
			dst.insert(w);
		}
	};
	pick(lex.positive, out.positive);
	pick(lex.negative, out.negative);
	return out;
}

/// n distinct pronounceable pseudo-words that pass through normalization
/// unchanged and collide with neither the lexicon nor the stop words.
inline std::vector<std::string> pseudo_words(std::size_t n) {
	static constexpr std::string_view consonants = "bdfgklmnprtvz";
	static constexpr std::string_view vowels = "aeiou";
	NormalizationConfig rules;
	auto lex = default_lexicon();
	std::vector<std::string> out;
	std::unordered_set<std::string> seen;
	for (std::size_t k = 0; out.size() < n; ++k) {
		// Enumerate consonant-vowel-consonant-vowel-consonant in mixed radix.
		std::size_t x = k;
		std::string w;
		for (int pos = 0; pos < 5; ++pos) {
			auto alphabet = pos % 2 == 0 ? consonants : vowels;
			w.push_back(alphabet[x % alphabet.size()]);
			x /= alphabet.size();
		}
		if (x > 0) throw ValidationError("pseudo_words: requested more words than the generator provides");
		if (porter_stem(w) != w || rules.stop_words.contains(w) || lex.positive.contains(w) || lex.negative.contains(w)) {
			continue;
		}
		if (seen.insert(w).second) out.push_back(w);
	}
	return out;
}

/// Vocabulary layout for a planted model: sentiment words first (positive,
/// then negative), then S*T disjoint blocks of aspect words.
struct PlantedVocabulary {
	std::vector<std::string> terms;
	SentimentLexicon lexicon;
	std::vector<WordId> positive_words;
	std::vector<WordId> negative_words;
	std::vector<std::vector<WordId>> blocks; // [s * T + t]
};

inline PlantedVocabulary planted_vocabulary(std::size_t S, std::size_t T, std::size_t W, std::size_t sentiment_words) {
	PlantedVocabulary pv;
	pv.lexicon = stable_lexicon(sentiment_words);
	for (const auto& w : pv.lexicon.positive) {
		pv.positive_words.push_back(static_cast<WordId>(pv.terms.size()));
		pv.terms.push_back(w);
	}
	for (const auto& w : pv.lexicon.negative) {
		pv.negative_words.push_back(static_cast<WordId>(pv.terms.size()));
		pv.terms.push_back(w);
	}
	if (W < pv.terms.size() + S * T) throw ValidationError("planted vocabulary too small for S*T word blocks");
	auto rest = pseudo_words(W - pv.terms.size());
	const std::size_t per_block = rest.size() / (S * T);
	pv.blocks.resize(S * T);
	for (std::size_t k = 0; k < rest.size(); ++k) {
		pv.blocks[std::min(k / per_block, S * T - 1)].push_back(static_cast<WordId>(pv.terms.size()));
		pv.terms.push_back(rest[k]);
	}
	return pv;
}

struct PhiPlan {
	double sentiment_mass = 0.2;  // share of each row on its polarity's lexicon words
	double shared_mass = 0.0;     // share spread over every aspect word (blurs blocks)
	double block_concentration = 1.0;
};

/// Well-separated planted word distributions: row (s, t) puts most mass on its
/// own block, sentiment_mass on lexicon words of polarity s and shared_mass on
/// all aspect words.
template <typename Rng>
std::vector<double> planted_phi(const PlantedVocabulary& pv, std::size_t S, std::size_t T, const PhiPlan& plan, Rng& rng) {
	const std::size_t W = pv.terms.size();
	std::vector<double> phi(S * T * W, 0.0);
	std::vector<WordId> aspect_words;
	for (const auto& b : pv.blocks) aspect_words.insert(aspect_words.end(), b.begin(), b.end());
	for (std::size_t s = 0; s < S; ++s) {
		const std::vector<WordId>* sent = s == kPositive ? &pv.positive_words : s == kNegative ? &pv.negative_words : nullptr;
		const double sent_mass = sent != nullptr && !sent->empty() ? plan.sentiment_mass : 0.0;
		for (std::size_t t = 0; t < T; ++t) {
			double* row = &phi[(s * T + t) * W];
			const auto& block = pv.blocks[s * T + t];
			auto draw = [&](const std::vector<WordId>& ids, double mass) {
				if (mass <= 0.0 || ids.empty()) return;
				std::vector<double> conc(ids.size(), plan.block_concentration);
				auto p = sample_dirichlet(std::span<const double>(conc), rng);
				for (std::size_t k = 0; k < ids.size(); ++k) row[ids[k]] += mass * p[k];
			};
			if (sent != nullptr) draw(*sent, sent_mass);
			draw(block, 1.0 - sent_mass - plan.shared_mass);
			for (auto v : aspect_words) row[v] += plan.shared_mass / static_cast<double>(aspect_words.size());
		}
	}
	return phi;
}

struct SyntheticSpec {
	std::size_t S = 2;
	std::size_t T = 4;
	std::size_t num_docs = 500;
	std::size_t num_attributes = 2;
	std::size_t min_sentences = 4, max_sentences = 10;
	std::size_t min_words = 4, max_words = 10;
	double theta_concentration = 0.3; // symmetric; below 1 polarizes documents
	double psi_concentration = 1.0;
	std::vector<std::string> terms;   // vocabulary, W = terms.size()
	std::vector<double> phi;          // [s][t][v], rows summing to 1
	std::uint64_t seed = 1;
};

struct SyntheticCorpus {
	Corpus corpus; // vocabulary ids equal planted term ids
	std::vector<double> phi;
	std::vector<double> psi;   // [s][a][t]
	std::vector<double> theta; // [d][s]
	Assignment labels;         // planted (s, t) per sentence in corpus order
};

/// Maps a planted positive-sentiment share to a 1..5 rating so that ratings
/// of three and above coincide with a positive majority.
inline int rating_for(double positive_share) {
	if (positive_share >= 0.8) return 5;
	if (positive_share >= 0.65) return 4;
	if (positive_share >= 0.5) return 3;
	if (positive_share >= 0.2) return 2;
	return 1;
}

/// Draws theta_d per document, then per sentence a sentiment from theta_d, an
/// aspect from psi(s, a_d) and words from phi(s, t).
inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
	const std::size_t S = spec.S, T = spec.T, A = spec.num_attributes, W = spec.terms.size();
	if (S < 1 || T < 1 || A < 1 || W < 1 || spec.num_docs < 1) throw ValidationError("synthetic spec has an empty dimension");
	if (spec.phi.size() != S * T * W) throw ValidationError("synthetic phi must be S x T x W");
	if (spec.min_sentences < 1 || spec.min_sentences > spec.max_sentences || spec.min_words < 1 ||
	    spec.min_words > spec.max_words) {
		throw ValidationError("synthetic length ranges are invalid");
	}
	std::mt19937_64 rng(spec.seed);
	SyntheticCorpus out;
	out.phi = spec.phi;
	for (const auto& t : spec.terms) out.corpus.vocabulary.intern(t);
	if (out.corpus.vocabulary.size() != W) throw ValidationError("synthetic terms must be distinct");
	for (std::size_t a = 0; a < A; ++a) out.corpus.attributes.intern("attr" + std::to_string(a));

	std::vector<double> psi_conc(T, spec.psi_concentration);
	for (std::size_t s = 0; s < S; ++s) {
		for (std::size_t a = 0; a < A; ++a) {
			auto row = sample_dirichlet(std::span<const double>(psi_conc), rng);
			out.psi.insert(out.psi.end(), row.begin(), row.end());
		}
	}
	std::vector<double> theta_conc(S, spec.theta_concentration);
	const int id_width = static_cast<int>(std::to_string(spec.num_docs).size());
	for (std::size_t d = 0; d < spec.num_docs; ++d) {
		auto theta = sample_dirichlet(std::span<const double>(theta_conc), rng);
		out.theta.insert(out.theta.end(), theta.begin(), theta.end());
		Document doc;
		std::string num = std::to_string(d);
		doc.id = "d" + std::string(static_cast<std::size_t>(id_width) - num.size(), '0') + num;
		doc.attribute = static_cast<AttributeId>(d % A);
		doc.rating = S >= 2 ? std::optional<int>(rating_for(theta[kPositive])) : std::nullopt;
		const std::size_t n_sent = spec.min_sentences + detail::uniform_below(rng, spec.max_sentences - spec.min_sentences + 1);
		for (std::size_t i = 0; i < n_sent; ++i) {
			auto s = sample_index(std::span<const double>(theta), rng);
			auto t = sample_index(std::span<const double>(out.psi).subspan((s * A + doc.attribute) * T, T), rng);
			auto phi_row = std::span<const double>(spec.phi).subspan((s * T + t) * W, W);
			Sentence sent;
			sent.doc = static_cast<std::uint32_t>(d);
			sent.index_in_doc = static_cast<std::uint32_t>(i);
			const std::size_t n_words = spec.min_words + detail::uniform_below(rng, spec.max_words - spec.min_words + 1);
			for (std::size_t k = 0; k < n_words; ++k) {
				auto v = static_cast<WordId>(sample_index(phi_row, rng));
				sent.words.push_back(v);
				out.corpus.vocabulary.count(v);
			}
			out.labels.sentiment.push_back(static_cast<std::uint16_t>(s));
			out.labels.aspect.push_back(static_cast<std::uint16_t>(t));
			doc.sentences.push_back(std::move(sent));
		}
		out.corpus.documents.push_back(std::move(doc));
	}
	return out;
}

namespace detail {

template <typename Rng>
std::vector<float> gaussian_vector(std::size_t dim, double scale, Rng& rng) {
	std::normal_distribution<double> n(0.0, 1.0);
	std::vector<float> v(dim);
	for (auto& x : v) x = static_cast<float>(scale * n(rng));
	return v;
}

} // namespace detail

/// Sentence embeddings that share one random direction per planted aspect,
/// perturbed by isotropic noise of the given scale.
inline EmbeddingTable planted_sentence_embeddings(const SyntheticCorpus& syn, std::size_t T, std::uint32_t dim, double noise,
                                                  std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	std::vector<std::vector<float>> bases;
	for (std::size_t t = 0; t < T; ++t) bases.push_back(detail::gaussian_vector(dim, 1.0 / std::sqrt(double(dim)), rng));
	EmbeddingTable table(dim);
	std::size_t i = 0;
	for (const auto& doc : syn.corpus.documents) {
		for (const auto& s : doc.sentences) {
			auto v = detail::gaussian_vector(dim, noise / std::sqrt(double(dim)), rng);
			const auto& b = bases[syn.labels.aspect[i]];
			for (std::size_t k = 0; k < dim; ++k) v[k] += b[k];
			table.add(syn.corpus.sentence_key(s), v);
			++i;
		}
	}
	return table;
}

/// Word embeddings that cluster the words of each planted block (and each
/// sentiment polarity) around a shared direction.
inline EmbeddingTable planted_word_embeddings(const PlantedVocabulary& pv, std::uint32_t dim, double noise, std::uint64_t seed) {
	std::mt19937_64 rng(seed);
	EmbeddingTable table(dim);
	std::vector<std::vector<float>> vecs(pv.terms.size());
	auto group = [&](const std::vector<WordId>& ids) {
		auto base = detail::gaussian_vector(dim, 1.0 / std::sqrt(double(dim)), rng);
		for (auto v : ids) {
			auto x = detail::gaussian_vector(dim, noise / std::sqrt(double(dim)), rng);
			for (std::size_t k = 0; k < dim; ++k) x[k] += base[k];
			vecs[v] = std::move(x);
		}
	};
	group(pv.positive_words);
	group(pv.negative_words);
	for (const auto& b : pv.blocks) group(b);
	for (std::size_t v = 0; v < pv.terms.size(); ++v) {
		if (!vecs[v].empty()) table.add(pv.terms[v], vecs[v]);
	}
	return table;
}

/// Renders a synthetic document as raw review text: sentences of space
/// separated words, each closed by a period.
inline std::string render_text(const Corpus& corpus, const Document& doc) {
	std::string text;
	for (const auto& s : doc.sentences) {
		if (!text.empty()) text.push_back(' ');
		for (std::size_t k = 0; k < s.words.size(); ++k) {
			if (k > 0) text.push_back(' ');
			text += corpus.vocabulary.term(s.words[k]);
		}
		text.push_back('.');
	}
	return text;
}

/// Greedy one-to-one matching of rows: repeatedly pairs the remaining
/// (recovered, planted) rows with the highest cosine. Returns, per planted
/// row, the matched recovered row and the cosine.
inline std::vector<std::pair<std::size_t, double>> greedy_match(const std::vector<std::vector<double>>& recovered,
                                                                const std::vector<std::vector<double>>& planted) {
	const std::size_t n = planted.size();
	if (recovered.size() != n) throw ValidationError("greedy_match: row counts differ");
	std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
	for (std::size_t r = 0; r < n; ++r) {
		for (std::size_t p = 0; p < n; ++p) pairs.emplace_back(cosine_similarity(recovered[r], planted[p]), r, p);
	}
	std::sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
		if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
		return std::make_pair(std::get<1>(x), std::get<2>(x)) < std::make_pair(std::get<1>(y), std::get<2>(y));
	});
	std::vector<std::pair<std::size_t, double>> match(n, {n, 0.0});
	std::vector<bool> used_r(n, false), used_p(n, false);
	for (const auto& [c, r, p] : pairs) {
		if (used_r[r] || used_p[p]) continue;
		used_r[r] = used_p[p] = true;
		match[p] = {r, c};
	}
	return match;
}

} // namespace trait
