#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "trait/corpus.hpp"
#include "trait/error.hpp"
#include "trait/text.hpp"

namespace trait {

/// Sentiment index conventions: 0 is positive, 1 is negative. Any further
/// sentiments receive the base prior for every word.
inline constexpr std::size_t kPositive = 0;
inline constexpr std::size_t kNegative = 1;

struct SentimentLexicon {
	std::set<std::string> positive;
	std::set<std::string> negative;

	void validate() const {
		for (const auto& w : positive) {
			if (negative.contains(w)) throw ValidationError("lexicon term '" + w + "' is both positive and negative");
		}
	}

	/// Applies the corpus normalization to every term so lexicon entries match
	/// the surface forms the sampler sees (`not_x` keeps its prefix and stems x).
	SentimentLexicon normalized(bool stemming) const {
		auto norm = [stemming](const std::string& term) {
			if (!stemming) return term;
			if (term.starts_with(kNegationPrefix)) {
				return std::string(kNegationPrefix) + porter_stem(term.substr(kNegationPrefix.size()));
			}
			return porter_stem(term);
		};
		SentimentLexicon out;
		for (const auto& w : positive) out.positive.insert(norm(w));
		for (const auto& w : negative) out.negative.insert(norm(w));
		out.validate();
		return out;
	}
};

/// The general-purpose hotel/restaurant sentiment word lists (unstemmed).
inline SentimentLexicon default_lexicon() {
	SentimentLexicon lex;
	lex.positive = {"amazing", "attractive", "awesome",  "best",      "comfortable", "correct",    "enjoy",
	                "excellent", "fantastic", "favorite", "fortunate", "free",        "fun",        "glad",
	                "good",    "great",      "happy",    "impressive", "love",        "nice",       "not_bad",
	                "perfect", "positive",   "recommend", "satisfied", "superior",    "thank",      "worth"};
	lex.negative = {"annoying", "bad",     "complain",  "disappointed", "hate",          "inferior",
	                "junk",     "mess",    "nasty",     "negative",     "not_good",      "not_like",
	                "not_recommend", "not_worth", "poor", "problem",    "regret",        "slow",
	                "small",    "sorry",   "terrible",  "trouble",      "unacceptable",  "unfortunate",
	                "upset",    "waste",   "worst",     "worthless",    "wrong"};
	return lex;
}

/// Reads a lexicon file: one term per line prefixed by '+' or '-'; blank lines
/// and lines starting with '#' are ignored.
inline SentimentLexicon load_lexicon(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw FormatError("cannot open lexicon file: " + path);
	SentimentLexicon lex;
	std::string line;
	std::size_t lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
		if (line.empty() || line[0] == '#') continue;
		if (line.size() < 2 || (line[0] != '+' && line[0] != '-')) {
			throw FormatError("lexicon line " + std::to_string(lineno) + ": expected '+term' or '-term'");
		}
		(line[0] == '+' ? lex.positive : lex.negative).insert(line.substr(1));
	}
	lex.validate();
	return lex;
}

struct AlphaOptions {
	double high = 5.0;
	double zero = 0.0;
	double base = 0.05;
};

/// Asymmetric Dirichlet prior over words, one row per sentiment.
class AlphaPrior {
public:
	AlphaPrior() = default;
	AlphaPrior(std::size_t sentiments, std::size_t vocab_size, double fill = 0.0)
	    : S_(sentiments), W_(vocab_size), values_(sentiments * vocab_size, fill), sums_(sentiments, fill * vocab_size) {}

	double operator()(std::size_t s, WordId v) const { return values_[s * W_ + v]; }
	double sum(std::size_t s) const { return sums_[s]; }
	std::size_t sentiments() const { return S_; }
	std::size_t vocab_size() const { return W_; }
	const std::vector<double>& values() const { return values_; }

	void set(std::size_t s, WordId v, double a) {
		values_.at(s * W_ + v) = a;
		recompute_sum(s);
	}

	void recompute_sums() {
		for (std::size_t s = 0; s < S_; ++s) recompute_sum(s);
	}

	static AlphaPrior from_values(std::size_t sentiments, std::size_t vocab_size, std::vector<double> values) {
		if (values.size() != sentiments * vocab_size) throw ValidationError("alpha matrix has wrong size");
		AlphaPrior p(sentiments, vocab_size);
		p.values_ = std::move(values);
		p.recompute_sums();
		return p;
	}

private:
	void recompute_sum(std::size_t s) {
		double acc = 0.0;
		for (std::size_t v = 0; v < W_; ++v) acc += values_[s * W_ + v];
		sums_[s] = acc;
	}

	std::size_t S_ = 0;
	std::size_t W_ = 0;
	std::vector<double> values_;
	std::vector<double> sums_;
};

/// Positive-lexicon words: `high` under the positive sentiment and `zero`
/// under the negative one; negative-lexicon words mirrored; all other
/// (word, sentiment) pairs get `base`.
inline AlphaPrior build_alpha(const SentimentLexicon& lexicon, const Vocabulary& vocabulary, std::size_t sentiments,
                              const AlphaOptions& opt = {}) {
	if (!(opt.high > opt.base && opt.base > opt.zero && opt.zero >= 0.0)) {
		throw ValidationError("alpha options must satisfy high > base > zero >= 0");
	}
	lexicon.validate();
	AlphaPrior alpha(sentiments, vocabulary.size(), opt.base);
	if (sentiments < 2) return alpha;
	for (WordId v = 0; v < vocabulary.size(); ++v) {
		const auto& term = vocabulary.term(v);
		if (lexicon.positive.contains(term)) {
			alpha.set(kPositive, v, opt.high);
			alpha.set(kNegative, v, opt.zero);
		} else if (lexicon.negative.contains(term)) {
			alpha.set(kPositive, v, opt.zero);
			alpha.set(kNegative, v, opt.high);
		}
	}
	return alpha;
}

} // namespace trait
