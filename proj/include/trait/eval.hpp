#pragma once

// Topic coherence, document sentiment classification and profile similarity.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "trait/corpus.hpp"
#include "trait/embedding.hpp"
#include "trait/error.hpp"
#include "trait/estimates.hpp"
#include "trait/graph.hpp"
#include "trait/lexicon.hpp"

namespace trait {

inline constexpr double kProbabilitySmoothing = 1e-12;

// Coherence ------------------------------------------------------------------

/// Co-occurrence statistics of a reference corpus. With window == 0 each
/// document is one context; otherwise every run of `window` consecutive
/// tokens of a document (sentences concatenated) is a context.
class CooccurrenceIndex {
public:
	CooccurrenceIndex(const Corpus& reference, std::size_t window = 0) : W_(reference.vocabulary.size()) {
		contexts_of_.resize(W_);
		std::vector<WordId> tokens;
		for (const auto& doc : reference.documents) {
			tokens.clear();
			for (const auto& s : doc.sentences) tokens.insert(tokens.end(), s.words.begin(), s.words.end());
			if (window == 0 || tokens.size() <= window) {
				add_context(tokens);
			} else {
				for (std::size_t b = 0; b + window <= tokens.size(); ++b) {
					add_context(std::span<const WordId>(tokens).subspan(b, window));
				}
			}
		}
	}

	std::size_t num_contexts() const { return n_; }
	std::size_t count(WordId v) const { return v < W_ ? contexts_of_[v].size() : 0; }

	std::size_t joint_count(WordId a, WordId b) const {
		if (a >= W_ || b >= W_) return 0;
		const auto& x = contexts_of_[a];
		const auto& y = contexts_of_[b];
		std::size_t i = 0, j = 0, n = 0;
		while (i < x.size() && j < y.size()) {
			if (x[i] < y[j]) {
				++i;
			} else if (y[j] < x[i]) {
				++j;
			} else {
				++n;
				++i;
				++j;
			}
		}
		return n;
	}

private:
	void add_context(std::span<const WordId> tokens) {
		std::vector<WordId> uniq(tokens.begin(), tokens.end());
		std::sort(uniq.begin(), uniq.end());
		uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
		for (auto w : uniq) contexts_of_[w].push_back(n_);
		++n_;
	}

	std::size_t W_ = 0;
	std::size_t n_ = 0;
	std::vector<std::vector<std::size_t>> contexts_of_;
};

/// NPMI of one word pair; nullopt when either word never occurs.
inline std::optional<double> npmi_pair(const CooccurrenceIndex& ref, WordId a, WordId b) {
	const double n = static_cast<double>(ref.num_contexts());
	const auto ca = ref.count(a);
	const auto cb = ref.count(b);
	if (ca == 0 || cb == 0 || n == 0.0) return std::nullopt;
	const double pa = static_cast<double>(ca) / n;
	const double pb = static_cast<double>(cb) / n;
	const double pab = static_cast<double>(ref.joint_count(a, b)) / n + kProbabilitySmoothing;
	const double denom = -std::log(pab);
	// Both words occur in every context: perfectly associated.
	if (denom <= 0.0) return 1.0;
	return std::clamp(std::log(pab / (pa * pb)) / denom, -1.0, 1.0);
}

/// Mean pairwise NPMI of one topic's words, times 100. Pairs with a word
/// absent from the reference are skipped; nullopt when nothing remains.
inline std::optional<double> npmi_coherence(std::span<const WordId> words, const CooccurrenceIndex& ref) {
	double acc = 0.0;
	std::size_t n = 0;
	for (std::size_t i = 0; i < words.size(); ++i) {
		for (std::size_t j = i + 1; j < words.size(); ++j) {
			if (auto v = npmi_pair(ref, words[i], words[j])) {
				acc += *v;
				++n;
			}
		}
	}
	if (n == 0) return std::nullopt;
	return 100.0 * acc / static_cast<double>(n);
}

/// Mean pairwise cosine over the embedded words of one topic; nullopt with
/// fewer than two embedded words.
inline std::optional<double> w2v_coherence(std::span<const std::string> words, const EmbeddingTable& embeddings) {
	std::vector<std::span<const float>> rows;
	for (const auto& w : words) {
		if (auto r = embeddings.lookup(w)) rows.push_back(*r);
	}
	if (rows.size() < 2) return std::nullopt;
	double acc = 0.0;
	std::size_t n = 0;
	for (std::size_t i = 0; i < rows.size(); ++i) {
		for (std::size_t j = i + 1; j < rows.size(); ++j) {
			acc += cosine_similarity(rows[i], rows[j]);
			++n;
		}
	}
	return acc / static_cast<double>(n);
}

struct TopicCoherence {
	std::size_t sentiment = 0;
	std::size_t aspect = 0;
	std::vector<std::string> words;
	std::optional<double> npmi;
	std::optional<double> w2v;
};

struct CoherenceReport {
	std::vector<TopicCoherence> topics;
	std::optional<double> mean_npmi;
	std::optional<double> mean_w2v;
};

/// Scores the top-n words of every (sentiment, aspect) pair. Word embeddings
/// are optional.
inline CoherenceReport coherence_report(const PosteriorEstimates& e, const Corpus& reference, std::size_t top_n,
                                        const EmbeddingTable* word_embeddings = nullptr, std::size_t window = 0) {
	CooccurrenceIndex ref(reference, window);
	CoherenceReport rep;
	double sum_n = 0.0, sum_w = 0.0;
	std::size_t cnt_n = 0, cnt_w = 0;
	for (std::size_t s = 0; s < e.S; ++s) {
		for (std::size_t t = 0; t < e.T; ++t) {
			TopicCoherence tc{s, t, {}, std::nullopt, std::nullopt};
			std::vector<WordId> ids;
			for (const auto& rw : top_words(e, s, t, top_n)) {
				tc.words.push_back(rw.term);
				if (auto id = reference.vocabulary.find(rw.term)) ids.push_back(*id);
			}
			tc.npmi = npmi_coherence(ids, ref);
			if (word_embeddings != nullptr) tc.w2v = w2v_coherence(tc.words, *word_embeddings);
			if (tc.npmi) {
				sum_n += *tc.npmi;
				++cnt_n;
			}
			if (tc.w2v) {
				sum_w += *tc.w2v;
				++cnt_w;
			}
			rep.topics.push_back(std::move(tc));
		}
	}
	if (cnt_n > 0) rep.mean_npmi = sum_n / static_cast<double>(cnt_n);
	if (cnt_w > 0) rep.mean_w2v = sum_w / static_cast<double>(cnt_w);
	return rep;
}

inline nlohmann::ordered_json to_json(const CoherenceReport& r) {
	auto opt = [](const std::optional<double>& x) { return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(); };
	nlohmann::ordered_json topics = nlohmann::ordered_json::array();
	for (const auto& t : r.topics) {
		topics.push_back({{"sentiment", t.sentiment}, {"aspect", t.aspect}, {"words", t.words}, {"npmi", opt(t.npmi)}, {"w2v", opt(t.w2v)}});
	}
	return {{"mean_npmi", opt(r.mean_npmi)}, {"mean_w2v", opt(r.mean_w2v)}, {"topics", std::move(topics)}};
}

// Classification ---------------------------------------------------------------

struct Prediction {
	bool positive = false;
	double score = 0.0; // theta[d][positive]
};

/// Argmax over a theta row, ties resolved toward the positive sentiment.
inline std::vector<Prediction> classify_documents(std::span<const double> theta, std::size_t S) {
	if (S < 2) throw ValidationError("classification needs at least two sentiments");
	if (theta.size() % S != 0) throw ValidationError("theta size is not a multiple of S");
	std::vector<Prediction> out;
	for (std::size_t d = 0; d * S < theta.size(); ++d) {
		auto row = theta.subspan(d * S, S);
		std::size_t best = 0;
		for (std::size_t s = 1; s < S; ++s) {
			if (row[s] > row[best]) best = s;
		}
		out.push_back({best == kPositive, row[kPositive]});
	}
	return out;
}

struct GroundTruth {
	std::vector<std::optional<bool>> positive; // per document; nullopt when unrated
	std::size_t excluded = 0;
};

inline constexpr int kPositiveRatingThreshold = 3;

inline GroundTruth ground_truth_labels(const Corpus& corpus) {
	GroundTruth g;
	for (const auto& d : corpus.documents) {
		if (d.rating) {
			g.positive.emplace_back(*d.rating >= kPositiveRatingThreshold);
		} else {
			g.positive.emplace_back(std::nullopt);
			++g.excluded;
		}
	}
	return g;
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half, via the rank-sum statistic with midranks.
inline double auc_roc(std::span<const double> scores, const std::vector<bool>& labels) {
	if (scores.size() != labels.size()) throw ValidationError("auc_roc: scores and labels differ in length");
	std::size_t n_pos = 0;
	for (bool l : labels) n_pos += l ? 1 : 0;
	const std::size_t n_neg = labels.size() - n_pos;
	if (n_pos == 0 || n_neg == 0) throw ValidationError("auc_roc: need at least one positive and one negative label");
	std::vector<std::size_t> idx(scores.size());
	for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
	std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
	double rank_sum = 0.0;
	for (std::size_t i = 0; i < idx.size();) {
		std::size_t j = i;
		while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
		const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
		for (std::size_t k = i; k < j; ++k) {
			if (labels[idx[k]]) rank_sum += midrank;
		}
		i = j;
	}
	const double np = static_cast<double>(n_pos);
	return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

struct ClassificationReport {
	double accuracy = 0.0;
	std::optional<double> auc;
	std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
	std::size_t excluded = 0;
};

inline ClassificationReport evaluate_classification(std::span<const Prediction> predictions, const GroundTruth& truth) {
	if (predictions.size() != truth.positive.size()) throw ValidationError("prediction count differs from document count");
	ClassificationReport r;
	r.excluded = truth.excluded;
	std::vector<double> scores;
	std::vector<bool> labels;
	for (std::size_t d = 0; d < predictions.size(); ++d) {
		if (!truth.positive[d]) continue;
		bool y = *truth.positive[d];
		bool p = predictions[d].positive;
		if (y && p) ++r.tp;
		if (!y && !p) ++r.tn;
		if (!y && p) ++r.fp;
		if (y && !p) ++r.fn;
		scores.push_back(predictions[d].score);
		labels.push_back(y);
	}
	const std::size_t total = r.tp + r.tn + r.fp + r.fn;
	if (total == 0) throw ValidationError("no rated documents to evaluate");
	r.accuracy = static_cast<double>(r.tp + r.tn) / static_cast<double>(total);
	if (r.tp + r.fn > 0 && r.tn + r.fp > 0) r.auc = auc_roc(scores, labels);
	return r;
}

inline nlohmann::ordered_json to_json(const ClassificationReport& r) {
	return {{"accuracy", r.accuracy},
	        {"auc", r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json()},
	        {"confusion", {{"tp", r.tp}, {"tn", r.tn}, {"fp", r.fp}, {"fn", r.fn}}},
	        {"evaluated", r.tp + r.tn + r.fp + r.fn},
	        {"excluded_unrated", r.excluded}};
}

// Distribution distances -------------------------------------------------------

namespace detail {

inline std::vector<double> smoothed(std::span<const double> p) {
	std::vector<double> out(p.size());
	double z = 0.0;
	for (std::size_t i = 0; i < p.size(); ++i) {
		if (p[i] < 0.0 || !std::isfinite(p[i])) throw ValidationError("distribution entries must be finite and nonnegative");
		out[i] = p[i] + kProbabilitySmoothing;
		z += out[i];
	}
	for (double& x : out) x /= z;
	return out;
}

inline double kl_raw(std::span<const double> p, std::span<const double> q) {
	double acc = 0.0;
	for (std::size_t i = 0; i < p.size(); ++i) {
		if (p[i] > 0.0) acc += p[i] * std::log2(p[i] / q[i]);
	}
	return std::max(acc, 0.0);
}

} // namespace detail

/// KL(P || Q) in bits after 1e-12 smoothing and renormalization.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
	if (p.size() != q.size()) throw ValidationError("kl_divergence: length mismatch");
	if (p.empty()) throw ValidationError("kl_divergence: empty distributions");
	auto ps = detail::smoothed(p);
	auto qs = detail::smoothed(q);
	return detail::kl_raw(ps, qs);
}

/// Square root of the base-2 Jensen-Shannon divergence; lies in [0, 1].
inline double js_distance(std::span<const double> p, std::span<const double> q) {
	if (p.size() != q.size()) throw ValidationError("js_distance: length mismatch");
	if (p.empty()) throw ValidationError("js_distance: empty distributions");
	auto ps = detail::smoothed(p);
	auto qs = detail::smoothed(q);
	std::vector<double> m(ps.size());
	for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (ps[i] + qs[i]);
	double js = 0.5 * detail::kl_raw(ps, m) + 0.5 * detail::kl_raw(qs, m);
	return std::sqrt(std::clamp(js, 0.0, 1.0));
}

/// One distribution per profile: the positive and negative aspect rows, each
/// weighted one half, concatenated.
inline std::vector<double> combined_profile(const AttributeProfile& p) {
	if (p.psi.size() < 2) throw ValidationError("profile for " + p.attribute + " lacks two sentiments");
	std::vector<double> out;
	for (std::size_t s : {kPositive, kNegative}) {
		for (double x : p.psi[s]) out.push_back(0.5 * x);
	}
	return out;
}

struct SimilarityMatrix {
	std::vector<std::string> labels;
	std::vector<double> raw;        // n x n js distances
	std::vector<double> distances;  // raw divided by its largest off-diagonal entry

	std::size_t size() const { return labels.size(); }
	double at(std::size_t i, std::size_t j) const { return distances[i * labels.size() + j]; }
};

inline SimilarityMatrix profile_distance_matrix(std::span<const AttributeProfile> profiles) {
	SimilarityMatrix m;
	const std::size_t n = profiles.size();
	std::vector<std::vector<double>> vecs;
	for (const auto& p : profiles) {
		m.labels.push_back(p.attribute);
		vecs.push_back(combined_profile(p));
		if (vecs.back().size() != vecs.front().size()) throw ValidationError("profiles differ in shape");
	}
	m.raw.assign(n * n, 0.0);
	double max_off = 0.0;
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = i + 1; j < n; ++j) {
			double d = js_distance(vecs[i], vecs[j]);
			m.raw[i * n + j] = m.raw[j * n + i] = d;
			max_off = std::max(max_off, d);
		}
	}
	m.distances = m.raw;
	if (max_off > 0.0) {
		for (double& x : m.distances) x /= max_off;
	}
	return m;
}

inline nlohmann::ordered_json to_json(const SimilarityMatrix& m) {
	const std::size_t n = m.size();
	nlohmann::ordered_json raw = nlohmann::ordered_json::array(), norm = nlohmann::ordered_json::array();
	for (std::size_t i = 0; i < n; ++i) {
		raw.push_back(std::vector<double>(m.raw.begin() + static_cast<std::ptrdiff_t>(i * n),
		                                  m.raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
		norm.push_back(std::vector<double>(m.distances.begin() + static_cast<std::ptrdiff_t>(i * n),
		                                   m.distances.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
	}
	return {{"labels", m.labels}, {"distances", std::move(norm)}, {"raw_js_distance", std::move(raw)}};
}

inline void write_tsv(const SimilarityMatrix& m, std::ostream& out) {
	out << "attribute";
	for (const auto& l : m.labels) out << '\t' << l;
	out << '\n';
	char buf[32];
	for (std::size_t i = 0; i < m.size(); ++i) {
		out << m.labels[i];
		for (std::size_t j = 0; j < m.size(); ++j) {
			std::snprintf(buf, sizeof buf, "%.6f", m.at(i, j));
			out << '\t' << buf;
		}
		out << '\n';
	}
}

// Embedding baseline -------------------------------------------------------------

/// S = (1 / (m + n)) * sum_i sum_j cos(d_i, r_j) over review embeddings.
inline double baseline_similarity(std::span<const std::vector<double>> d, std::span<const std::vector<double>> r) {
	if (d.empty() || r.empty()) throw ValidationError("baseline_similarity: empty review set");
	double acc = 0.0;
	for (const auto& x : d) {
		for (const auto& y : r) acc += cosine_similarity(x, y);
	}
	return acc / static_cast<double>(d.size() + r.size());
}

/// Mean sentence embedding of every document, in corpus order.
inline std::vector<std::vector<double>> review_embeddings(const Corpus& corpus, const EmbeddingTable& sentence_embeddings) {
	std::vector<std::vector<double>> out;
	const std::size_t dim = sentence_embeddings.dimension();
	for (const auto& doc : corpus.documents) {
		std::vector<double> mean(dim, 0.0);
		for (const auto& s : doc.sentences) {
			auto key = corpus.sentence_key(s);
			auto row = sentence_embeddings.lookup(key);
			if (!row) throw ValidationError("missing sentence embedding for " + key);
			for (std::size_t k = 0; k < dim; ++k) mean[k] += (*row)[k];
		}
		for (double& x : mean) x /= static_cast<double>(doc.sentences.size());
		out.push_back(std::move(mean));
	}
	return out;
}

/// Pairwise baseline similarity between the review sets of every attribute
/// value (diagonal included).
inline SimilarityMatrix baseline_similarity_matrix(const Corpus& corpus, const EmbeddingTable& sentence_embeddings) {
	auto reviews = review_embeddings(corpus, sentence_embeddings);
	const std::size_t n = corpus.attributes.size();
	std::vector<std::vector<std::vector<double>>> groups(n);
	for (std::size_t d = 0; d < corpus.documents.size(); ++d) groups[corpus.documents[d].attribute].push_back(reviews[d]);
	SimilarityMatrix m;
	m.labels = corpus.attributes.values();
	m.raw.assign(n * n, 0.0);
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = i; j < n; ++j) {
			if (groups[i].empty() || groups[j].empty()) continue;
			m.raw[i * n + j] = m.raw[j * n + i] = baseline_similarity(groups[i], groups[j]);
		}
	}
	m.distances = m.raw;
	return m;
}

inline nlohmann::ordered_json baseline_to_json(const SimilarityMatrix& m) {
	const std::size_t n = m.size();
	nlohmann::ordered_json rows = nlohmann::ordered_json::array();
	for (std::size_t i = 0; i < n; ++i) {
		rows.push_back(std::vector<double>(m.raw.begin() + static_cast<std::ptrdiff_t>(i * n),
		                                   m.raw.begin() + static_cast<std::ptrdiff_t>((i + 1) * n)));
	}
	return {{"group_by", "attribute"}, {"labels", m.labels}, {"similarity", std::move(rows)}};
}

} // namespace trait
