#pragma once

// Collapsed Gibbs sampling over sentence-level (sentiment, aspect) pairs with
// an MRF correspondence bonus and generalized Polya urn count updates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "trait/corpus.hpp"
#include "trait/error.hpp"
#include "trait/graph.hpp"
#include "trait/model.hpp"

namespace trait {

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
template <typename Rng>
double uniform01(Rng& rng) {
	return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, n) by rejection on raw 64-bit draws.
template <typename Rng>
std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
	const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
	std::uint64_t x;
	do {
		x = rng();
	} while (x >= limit);
	return x % n;
}

// Values this close to zero after a removal are float residue of an urn
// increment and are snapped to zero.
inline constexpr double kResidue = 1e-9;

} // namespace detail

enum class CountUpdate { Add, Remove };

/// Adds or removes sentence i's contribution under label (s, t): one sentence
/// in n_sent and n_aspect, and per token occurrence one unit of the word plus
/// the promoted mass of its related words in n_word. Remove inverts Add.
inline void update_counts(ModelState& st, std::size_t i, std::size_t s, std::size_t t, CountUpdate dir) {
	const auto& L = *st.layout;
	auto& c = st.counts;
	const bool add = dir == CountUpdate::Add;
	if (add == static_cast<bool>(st.in_counts[i])) {
		throw ConsistencyError("sentence " + std::to_string(i) + (add ? " already counted" : " not counted"));
	}
	const std::int64_t step = add ? 1 : -1;
	const auto d = L.doc(i);
	const auto a = L.attribute(i);
	c.sent(d, s) += step;
	c.sent_total(d) += step;
	c.aspect(s, a, t) += step;
	c.aspect_total(s, a) += step;
	if (c.sent(d, s) < 0 || c.aspect(s, a, t) < 0) {
		throw ConsistencyError("negative sentence count after removing sentence " + std::to_string(i));
	}
	const double sign = add ? 1.0 : -1.0;
	for (const auto& delta : L.deltas(i)) {
		double& n = c.word(s, t, delta.word);
		n += sign * delta.mass;
		if (!add && std::abs(n) < detail::kResidue) n = 0.0;
		if (n < -detail::kResidue) throw ConsistencyError("word count would go negative for sentence " + std::to_string(i));
	}
	double& total = c.word_total(s, t);
	total += sign * L.delta_total(i);
	if (!add && std::abs(total) < detail::kResidue) total = 0.0;
	if (total < -detail::kResidue) throw ConsistencyError("word total would go negative for sentence " + std::to_string(i));
	st.in_counts[i] = add ? 1 : 0;
	if (add) {
		st.assignment.sentiment[i] = static_cast<std::uint16_t>(s);
		st.assignment.aspect[i] = static_cast<std::uint16_t>(t);
	}
}

/// Assigns every sentence a uniform random (s, t) from the seeded rng and
/// builds counts incrementally.
inline ModelState init_state(std::shared_ptr<const ModelLayout> layout, Hyperparams hyper) {
	if (!layout) throw ValidationError("init_state: null layout");
	if (hyper.S == 0 || hyper.T == 0) throw ValidationError("init_state: S and T must be positive");
	if (hyper.S > 0xFFFF || hyper.T > 0xFFFF) throw ValidationError("init_state: S and T must fit in 16 bits");
	hyper.validate(layout->vocab_size());
	ModelState st;
	st.layout = std::move(layout);
	st.hyper = std::move(hyper);
	const auto& L = *st.layout;
	const std::size_t n = L.num_sentences();
	st.counts = CountTables(st.hyper.S, st.hyper.T, L.num_attributes(), L.num_docs(), L.vocab_size());
	st.assignment.sentiment.assign(n, 0);
	st.assignment.aspect.assign(n, 0);
	st.in_counts.assign(n, 0);
	st.rng.seed(st.hyper.seed);
	for (std::size_t i = 0; i < n; ++i) {
		auto s = detail::uniform_below(st.rng, st.hyper.S);
		auto t = detail::uniform_below(st.rng, st.hyper.T);
		update_counts(st, i, s, t, CountUpdate::Add);
	}
	return st;
}

/// exp(lambda * |{j in L_i : t_j = t}| / |L_i|), and exactly 1 when L_i is
/// empty. Neighbor labels are read from the current assignment.
inline double mrf_bonus(const ModelState& st, std::size_t i, std::size_t t) {
	auto nb = st.layout->neighbors(i);
	if (nb.empty() || st.hyper.lambda == 0.0) return 1.0;
	std::size_t agree = 0;
	for (auto j : nb) agree += st.assignment.aspect[j] == t ? 1 : 0;
	return std::exp(st.hyper.lambda * static_cast<double>(agree) / static_cast<double>(nb.size()));
}

/// Unnormalized S x T conditional for one sentence. Entries are exact products
/// of the four factors for sentences of at most kLogSpaceThreshold tokens;
/// longer sentences are evaluated in log space and rescaled so the largest
/// entry is 1 (same distribution after normalization).
///
/// A cell whose word factor contains a zero factor (zero prior and zero
/// count) has weight 0. zero_order records how many such factors each cell
/// has and residual_log the log of the remaining factors, so that
/// limit_weights() can supply the zero-prior limit when every cell is 0.
struct Conditional {
	std::size_t S = 0;
	std::size_t T = 0;
	std::vector<double> weights;
	std::vector<std::uint32_t> zero_order;
	std::vector<double> residual_log;

	double at(std::size_t s, std::size_t t) const { return weights[s * T + t]; }

	double total() const {
		double acc = 0.0;
		for (double w : weights) acc += w;
		return acc;
	}

	std::vector<double> normalized() const {
		double z = total();
		if (!(z > 0.0)) throw ValidationError("conditional has no mass");
		std::vector<double> out(weights.size());
		for (std::size_t k = 0; k < weights.size(); ++k) out[k] = weights[k] / z;
		return out;
	}

	/// Cells with the fewest zero factors, weighted by their remaining factors.
	std::vector<double> limit_weights() const {
		auto min_order = *std::min_element(zero_order.begin(), zero_order.end());
		double max_log = -INFINITY;
		for (std::size_t k = 0; k < weights.size(); ++k) {
			if (zero_order[k] == min_order) max_log = std::max(max_log, residual_log[k]);
		}
		std::vector<double> out(weights.size(), 0.0);
		for (std::size_t k = 0; k < weights.size(); ++k) {
			if (zero_order[k] == min_order) out[k] = std::exp(residual_log[k] - max_log);
		}
		return out;
	}
};

inline constexpr std::uint32_t kLogSpaceThreshold = 20;

/// Evaluates the collapsed conditional for sentence i, which must currently be
/// removed from the counts.
inline Conditional gibbs_conditional(const ModelState& st, std::size_t i) {
	if (st.in_counts.at(i)) {
		throw ConsistencyError("gibbs_conditional: sentence " + std::to_string(i) + " must be removed from the counts first");
	}
	const auto& L = *st.layout;
	const auto& h = st.hyper;
	const auto& c = st.counts;
	const std::size_t S = h.S;
	const std::size_t T = h.T;
	const auto d = L.doc(i);
	const auto a = L.attribute(i);
	const auto words = L.words(i);
	const auto len = L.length(i);
	const bool log_space = len > kLogSpaceThreshold;

	Conditional out;
	out.S = S;
	out.T = T;
	out.weights.assign(S * T, 0.0);
	out.zero_order.assign(S * T, 0);
	out.residual_log.assign(S * T, 0.0);

	// MRF bonus depends on t only.
	std::vector<double> bonus(T, 1.0);
	auto nb = L.neighbors(i);
	if (!nb.empty() && h.lambda != 0.0) {
		std::vector<std::size_t> agree(T, 0);
		for (auto j : nb) ++agree[st.assignment.aspect[j]];
		for (std::size_t t = 0; t < T; ++t) {
			bonus[t] = std::exp(h.lambda * static_cast<double>(agree[t]) / static_cast<double>(nb.size()));
		}
	}

	const double gamma_sum = h.gamma_sum();
	const double beta_sum = h.beta_sum();
	const double sent_den = static_cast<double>(c.sent_total(d)) + beta_sum;

	for (std::size_t s = 0; s < S; ++s) {
		const double sent_factor = (static_cast<double>(c.sent(d, s)) + h.beta[s]) / sent_den;
		const double aspect_den = static_cast<double>(c.aspect_total(s, a)) + gamma_sum;
		const double alpha_sum = h.alpha.sum(s);
		for (std::size_t t = 0; t < T; ++t) {
			const std::size_t k = s * T + t;
			const double aspect_factor = (static_cast<double>(c.aspect(s, a, t)) + h.gamma[t]) / aspect_den;
			std::uint32_t zeros = 0;
			double log_w = 0.0;
			double w = 1.0;
			for (const auto& wc : words) {
				const double base = c.word(s, t, wc.word) + h.alpha(s, wc.word);
				for (std::uint32_t r = 0; r < wc.count; ++r) {
					const double f = base + r;
					if (f <= 0.0) {
						++zeros;
						continue;
					}
					if (log_space) {
						log_w += std::log(f);
					} else {
						w *= f;
					}
				}
			}
			const double den_base = c.word_total(s, t) + alpha_sum;
			for (std::uint32_t r = 0; r < len; ++r) {
				if (log_space) {
					log_w -= std::log(den_base + r);
				} else {
					w /= den_base + r;
				}
			}
			const double rest = aspect_factor * sent_factor * bonus[t];
			if (log_space) {
				log_w += std::log(rest);
			} else {
				w *= rest;
				log_w = std::log(w);
			}
			out.zero_order[k] = zeros;
			out.residual_log[k] = log_w;
			out.weights[k] = zeros > 0 ? 0.0 : (log_space ? log_w : w);
		}
	}
	if (log_space) {
		double max_log = -INFINITY;
		for (std::size_t k = 0; k < S * T; ++k) {
			if (out.zero_order[k] == 0) max_log = std::max(max_log, out.weights[k]);
		}
		for (std::size_t k = 0; k < S * T; ++k) {
			out.weights[k] = out.zero_order[k] == 0 ? std::exp(out.weights[k] - max_log) : 0.0;
		}
	}
	return out;
}

/// Draws an index with probability proportional to its weight, consuming
/// exactly one uniform variate.
template <typename Rng>
std::size_t sample_index(std::span<const double> weights, Rng& rng) {
	double total = 0.0;
	for (double w : weights) {
		if (w < 0.0 || !std::isfinite(w)) throw ValidationError("sample: weights must be finite and nonnegative");
		total += w;
	}
	if (!(total > 0.0)) throw ValidationError("sample: all weights are zero");
	const double target = detail::uniform01(rng) * total;
	double acc = 0.0;
	std::size_t last_positive = 0;
	for (std::size_t k = 0; k < weights.size(); ++k) {
		if (weights[k] <= 0.0) continue;
		acc += weights[k];
		last_positive = k;
		if (target < acc) return k;
	}
	return last_positive;
}

/// Samples a (sentiment, aspect) cell from an S x T weight matrix.
template <typename Rng>
std::pair<std::size_t, std::size_t> sample_assignment(const Conditional& cond, Rng& rng) {
	auto k = sample_index(std::span<const double>(cond.weights), rng);
	return {k / cond.T, k % cond.T};
}

/// One sequential-scan sweep in corpus order: remove, evaluate, sample, add.
inline void gibbs_sweep(ModelState& st) {
	const std::size_t n = st.layout->num_sentences();
	for (std::size_t i = 0; i < n; ++i) {
		update_counts(st, i, st.assignment.sentiment[i], st.assignment.aspect[i], CountUpdate::Remove);
		auto cond = gibbs_conditional(st, i);
		std::size_t k;
		if (cond.total() > 0.0) {
			k = sample_index(std::span<const double>(cond.weights), st.rng);
		} else {
			auto lw = cond.limit_weights();
			k = sample_index(std::span<const double>(lw), st.rng);
		}
		update_counts(st, i, k / st.hyper.T, k % st.hyper.T, CountUpdate::Add);
	}
	++st.sweeps_done;
}

/// Log of the collapsed joint: Dirichlet-multinomial word, aspect and
/// sentiment terms plus the MRF potential, lambda * I(t_i = t_j) / |L_i| per
/// undirected edge (half the per-sentence sum, so that on graphs whose
/// non-isolated nodes share one degree the sampler's bonus is exactly its
/// conditional). Zero alpha entries are floored at 1e-12 inside the Gamma
/// functions.
inline double log_joint(const ModelState& st) {
	const auto& L = *st.layout;
	const auto& h = st.hyper;
	const auto& c = st.counts;
	constexpr double kFloor = 1e-12;
	double lp = 0.0;
	for (std::size_t s = 0; s < h.S; ++s) {
		double a_sum = 0.0;
		double lg_a = 0.0;
		for (WordId v = 0; v < c.W; ++v) {
			double av = std::max(h.alpha(s, v), kFloor);
			a_sum += av;
			lg_a += std::lgamma(av);
		}
		for (std::size_t t = 0; t < h.T; ++t) {
			lp += std::lgamma(a_sum) - lg_a;
			double tot = 0.0;
			for (WordId v = 0; v < c.W; ++v) {
				double x = c.word(s, t, v) + std::max(h.alpha(s, v), kFloor);
				lp += std::lgamma(x);
				tot += x;
			}
			lp -= std::lgamma(tot);
		}
	}
	double g_sum = h.gamma_sum();
	double lg_g = 0.0;
	for (double g : h.gamma) lg_g += std::lgamma(g);
	for (std::size_t s = 0; s < h.S; ++s) {
		for (std::size_t a = 0; a < c.A; ++a) {
			lp += std::lgamma(g_sum) - lg_g;
			for (std::size_t t = 0; t < h.T; ++t) lp += std::lgamma(static_cast<double>(c.aspect(s, a, t)) + h.gamma[t]);
			lp -= std::lgamma(static_cast<double>(c.aspect_total(s, a)) + g_sum);
		}
	}
	double b_sum = h.beta_sum();
	double lg_b = 0.0;
	for (double b : h.beta) lg_b += std::lgamma(b);
	for (std::size_t d = 0; d < c.D; ++d) {
		lp += std::lgamma(b_sum) - lg_b;
		for (std::size_t s = 0; s < h.S; ++s) lp += std::lgamma(static_cast<double>(c.sent(d, s)) + h.beta[s]);
		lp -= std::lgamma(static_cast<double>(c.sent_total(d)) + b_sum);
	}
	if (h.lambda != 0.0) {
		for (std::size_t i = 0; i < L.num_sentences(); ++i) {
			auto nb = L.neighbors(i);
			if (nb.empty()) continue;
			std::size_t agree = 0;
			for (auto j : nb) agree += st.assignment.aspect[j] == st.assignment.aspect[i] ? 1 : 0;
			lp += 0.5 * h.lambda * static_cast<double>(agree) / static_cast<double>(nb.size());
		}
	}
	return lp;
}

/// Recomputes every table from scratch, one token occurrence at a time, from
/// the corpus, the promotion table and an assignment.
inline CountTables rebuild_counts(const Corpus& corpus, const PromotionTable* promotion, double epsilon,
                                  const Assignment& assignment, std::size_t S, std::size_t T) {
	CountTables c(S, T, corpus.attributes.size(), corpus.documents.size(), corpus.vocabulary.size());
	const bool urn = promotion != nullptr && epsilon > 0.0;
	std::size_t i = 0;
	for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
		const auto& doc = corpus.documents[d];
		for (const auto& sent : doc.sentences) {
			if (i >= assignment.size()) throw ValidationError("assignment shorter than corpus");
			const std::size_t s = assignment.sentiment[i];
			const std::size_t t = assignment.aspect[i];
			c.sent(d, s) += 1;
			c.sent_total(d) += 1;
			c.aspect(s, doc.attribute, t) += 1;
			c.aspect_total(s, doc.attribute) += 1;
			for (auto w : sent.words) {
				c.word(s, t, w) += 1.0;
				c.word_total(s, t) += 1.0;
				if (urn) {
					for (const auto& e : promotion->related(w)) {
						c.word(s, t, e.word) += e.weight;
						c.word_total(s, t) += e.weight;
					}
				}
			}
			++i;
		}
	}
	if (i != assignment.size()) throw ValidationError("assignment longer than corpus");
	return c;
}

struct TrainOptions {
	/// Rebuild-and-compare cadence in sweeps (0 disables).
	std::size_t rebuild_interval = 100;
	double rebuild_tolerance = 1e-6;
	/// Called after every sweep with (sweep index, log joint).
	std::function<void(std::uint64_t, double)> on_sweep;
};

struct TrainResult {
	ModelState state;
	std::vector<double> log_joint_trace;
};

/// Inputs a chain needs beyond its state; all referenced objects must outlive
/// the call.
struct TrainingInputs {
	const Corpus* corpus = nullptr;
	const CorrespondenceGraph* graph = nullptr;
	const PromotionTable* promotion = nullptr;
};

/// Continues a chain until burn_in + iterations sweeps have been performed.
inline std::vector<double> continue_training(ModelState& st, const TrainingInputs& in, const TrainOptions& opt = {}) {
	const std::uint64_t target = st.hyper.burn_in + st.hyper.iterations;
	std::vector<double> trace;
	while (st.sweeps_done < target) {
		gibbs_sweep(st);
		if (opt.rebuild_interval > 0 && in.corpus != nullptr && st.sweeps_done % opt.rebuild_interval == 0) {
			auto rebuilt = rebuild_counts(*in.corpus, in.promotion, st.hyper.epsilon, st.assignment, st.hyper.S, st.hyper.T);
			double diff = st.counts.max_abs_diff(rebuilt);
			if (diff > opt.rebuild_tolerance) {
				throw ConsistencyError("count tables drifted from rebuild by " + std::to_string(diff));
			}
			// Resync fractional urn counts to bound accumulated rounding.
			if (st.layout->urn_enabled()) st.counts = std::move(rebuilt);
		}
		double lj = log_joint(st);
		trace.push_back(lj);
		if (opt.on_sweep) opt.on_sweep(st.sweeps_done, lj);
	}
	return trace;
}

/// Initializes a chain and runs burn_in + iterations sweeps. The returned
/// state is the final sample.
inline TrainResult train(const Corpus& corpus, const CorrespondenceGraph& graph, const PromotionTable* promotion,
                         const Hyperparams& hyper, const TrainOptions& opt = {}) {
	auto layout = ModelLayout::build(corpus, graph, promotion, hyper.epsilon);
	TrainResult result{init_state(std::move(layout), hyper), {}};
	result.log_joint_trace = continue_training(result.state, TrainingInputs{&corpus, &graph, promotion}, opt);
	return result;
}

/// Infers sentiment proportions for held-out documents by Gibbs sampling their
/// sentences against the trained word and aspect counts, which stay frozen.
/// Returns theta as a D_test x S row-major matrix (final sample).
inline std::vector<double> fold_in(const CountTables& global, const Hyperparams& h, const Corpus& test,
                                   const CorrespondenceGraph* test_graph, std::size_t sweeps, std::uint64_t seed) {
	if (test.vocabulary.size() != global.W) throw ValidationError("fold_in: test corpus must share the training vocabulary");
	if (test.attributes.size() != global.A) throw ValidationError("fold_in: test corpus must share the attribute index");
	CorrespondenceGraph empty;
	if (test_graph == nullptr) {
		empty = CorrespondenceGraph::empty(test);
		test_graph = &empty;
	}
	auto layout = ModelLayout::build(test, *test_graph, nullptr, 0.0);
	const auto& L = *layout;
	const std::size_t S = h.S;
	const std::size_t T = h.T;
	const std::size_t n = L.num_sentences();
	std::vector<std::int64_t> n_sent(L.num_docs() * S, 0);
	std::vector<std::uint16_t> sent(n), asp(n);
	std::mt19937_64 rng(seed);
	for (std::size_t i = 0; i < n; ++i) {
		sent[i] = static_cast<std::uint16_t>(detail::uniform_below(rng, S));
		asp[i] = static_cast<std::uint16_t>(detail::uniform_below(rng, T));
		++n_sent[L.doc(i) * S + sent[i]];
	}
	const double beta_sum = h.beta_sum();
	const double gamma_sum = h.gamma_sum();
	std::vector<double> w(S * T);
	std::vector<std::uint32_t> zeros(S * T);
	std::vector<double> logs(S * T);
	for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
		for (std::size_t i = 0; i < n; ++i) {
			const auto d = L.doc(i);
			const auto a = L.attribute(i);
			--n_sent[d * S + sent[i]];
			auto nb = L.neighbors(i);
			std::vector<std::size_t> agree(T, 0);
			for (auto j : nb) ++agree[asp[j]];
			for (std::size_t s = 0; s < S; ++s) {
				double sf = (static_cast<double>(n_sent[d * S + s]) + h.beta[s]) /
				            (static_cast<double>(L.doc_size(d) - 1) + beta_sum);
				for (std::size_t t = 0; t < T; ++t) {
					double af = (static_cast<double>(global.aspect(s, a, t)) + h.gamma[t]) /
					            (static_cast<double>(global.aspect_total(s, a)) + gamma_sum);
					double lw = std::log(sf) + std::log(af);
					std::uint32_t z = 0;
					for (const auto& wc : L.words(i)) {
						double base = global.word(s, t, wc.word) + h.alpha(s, wc.word);
						for (std::uint32_t r = 0; r < wc.count; ++r) {
							if (base + r <= 0.0) {
								++z;
							} else {
								lw += std::log(base + r);
							}
						}
					}
					double den = global.word_total(s, t) + h.alpha.sum(s);
					for (std::uint32_t r = 0; r < L.length(i); ++r) lw -= std::log(den + r);
					if (!nb.empty()) lw += h.lambda * static_cast<double>(agree[t]) / static_cast<double>(nb.size());
					zeros[s * T + t] = z;
					logs[s * T + t] = lw;
				}
			}
			auto min_zero = *std::min_element(zeros.begin(), zeros.end());
			double max_log = -INFINITY;
			for (std::size_t k = 0; k < S * T; ++k) {
				if (zeros[k] == min_zero) max_log = std::max(max_log, logs[k]);
			}
			for (std::size_t k = 0; k < S * T; ++k) w[k] = zeros[k] == min_zero ? std::exp(logs[k] - max_log) : 0.0;
			auto k = sample_index(std::span<const double>(w), rng);
			sent[i] = static_cast<std::uint16_t>(k / T);
			asp[i] = static_cast<std::uint16_t>(k % T);
			++n_sent[d * S + sent[i]];
		}
	}
	std::vector<double> theta(L.num_docs() * S);
	for (std::size_t d = 0; d < L.num_docs(); ++d) {
		double den = static_cast<double>(L.doc_size(d)) + beta_sum;
		for (std::size_t s = 0; s < S; ++s) theta[d * S + s] = (static_cast<double>(n_sent[d * S + s]) + h.beta[s]) / den;
	}
	return theta;
}

inline std::vector<double> fold_in(const ModelState& trained, const Corpus& test, const CorrespondenceGraph* test_graph,
                                   std::size_t sweeps, std::uint64_t seed) {
	return fold_in(trained.counts, trained.hyper, test, test_graph, sweeps, seed);
}

} // namespace trait
