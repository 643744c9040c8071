#pragma once

// Posterior point estimates from a finished chain, ranked word lists and
// attribute profiles, with their JSON forms.

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trait/corpus.hpp"
#include "trait/error.hpp"
#include "trait/model.hpp"

namespace trait {

struct PosteriorEstimates {
	std::size_t S = 0, T = 0, A = 0, D = 0, W = 0;
	std::vector<double> phi;   // [s][t][v]
	std::vector<double> psi;   // [s][a][t]
	std::vector<double> theta; // [d][s]
	std::vector<std::string> terms;
	std::vector<std::string> attributes;
	std::vector<std::string> doc_ids;

	double phi_at(std::size_t s, std::size_t t, WordId v) const { return phi[(s * T + t) * W + v]; }
	double psi_at(std::size_t s, std::size_t a, std::size_t t) const { return psi[(s * A + a) * T + t]; }
	double theta_at(std::size_t d, std::size_t s) const { return theta[d * S + s]; }

	std::span<const double> phi_row(std::size_t s, std::size_t t) const {
		return std::span<const double>(phi).subspan((s * T + t) * W, W);
	}
	std::span<const double> psi_row(std::size_t s, std::size_t a) const {
		return std::span<const double>(psi).subspan((s * A + a) * T, T);
	}
	std::span<const double> theta_row(std::size_t d) const { return std::span<const double>(theta).subspan(d * S, S); }
};

namespace detail {

inline void normalize_row(std::span<double> row, const char* what) {
	double z = 0.0;
	for (double x : row) z += x;
	if (!(z > 0.0)) throw ValidationError(std::string(what) + ": zero denominator");
	for (double& x : row) x /= z;
}

} // namespace detail

/// phi[s][t][v] = (n_word + alpha) / sum over the vocabulary.
inline std::vector<double> estimate_phi(const CountTables& c, const Hyperparams& h) {
	std::vector<double> phi(c.S * c.T * c.W);
	for (std::size_t s = 0; s < c.S; ++s) {
		for (std::size_t t = 0; t < c.T; ++t) {
			auto row = std::span<double>(phi).subspan((s * c.T + t) * c.W, c.W);
			for (WordId v = 0; v < c.W; ++v) row[v] = c.word(s, t, v) + h.alpha(s, v);
			detail::normalize_row(row, "estimate_phi");
		}
	}
	return phi;
}

/// psi[s][a][t] = (n_aspect + gamma_t) / sum over aspects.
inline std::vector<double> estimate_psi(const CountTables& c, const Hyperparams& h) {
	std::vector<double> psi(c.S * c.A * c.T);
	for (std::size_t s = 0; s < c.S; ++s) {
		for (std::size_t a = 0; a < c.A; ++a) {
			auto row = std::span<double>(psi).subspan((s * c.A + a) * c.T, c.T);
			for (std::size_t t = 0; t < c.T; ++t) row[t] = static_cast<double>(c.aspect(s, a, t)) + h.gamma[t];
			detail::normalize_row(row, "estimate_psi");
		}
	}
	return psi;
}

/// theta[d][s] = (n_sent + beta_s) / sum over sentiments. Empty documents
/// are rejected.
inline std::vector<double> estimate_theta(const CountTables& c, const Hyperparams& h) {
	std::vector<double> theta(c.D * c.S);
	for (std::size_t d = 0; d < c.D; ++d) {
		if (c.sent_total(d) == 0) throw ValidationError("estimate_theta: document " + std::to_string(d) + " has no sentences");
		auto row = std::span<double>(theta).subspan(d * c.S, c.S);
		for (std::size_t s = 0; s < c.S; ++s) row[s] = static_cast<double>(c.sent(d, s)) + h.beta[s];
		detail::normalize_row(row, "estimate_theta");
	}
	return theta;
}

/// Point estimates from count tables and the priors they were sampled under.
inline PosteriorEstimates estimate(const CountTables& c, const Hyperparams& h) {
	PosteriorEstimates e;
	e.S = c.S;
	e.T = c.T;
	e.A = c.A;
	e.D = c.D;
	e.W = c.W;
	e.phi = estimate_phi(c, h);
	e.psi = estimate_psi(c, h);
	e.theta = estimate_theta(c, h);
	return e;
}

/// Point estimates from the chain's current sample. Names are filled from
/// the corpus when given.
inline PosteriorEstimates estimate(const ModelState& st, const Corpus* corpus = nullptr) {
	auto e = estimate(st.counts, st.hyper);
	if (corpus != nullptr) {
		e.terms = corpus->vocabulary.terms();
		e.attributes = corpus->attributes.values();
		for (const auto& d : corpus->documents) e.doc_ids.push_back(d.id);
	}
	return e;
}

struct RankedEntry {
	std::size_t id;
	double probability;
};

/// Indices of the n largest entries, descending, ties by lower index.
inline std::vector<RankedEntry> rank_top(std::span<const double> row, std::size_t n) {
	std::vector<std::size_t> idx(row.size());
	std::iota(idx.begin(), idx.end(), 0);
	n = std::min(n, idx.size());
	std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
	                  [&](std::size_t x, std::size_t y) { return row[x] != row[y] ? row[x] > row[y] : x < y; });
	std::vector<RankedEntry> out;
	out.reserve(n);
	for (std::size_t k = 0; k < n; ++k) out.push_back({idx[k], row[idx[k]]});
	return out;
}

struct RankedWord {
	std::string term;
	WordId id;
	double probability;
};

/// The n most probable words of phi(s, t, .); n larger than W yields W words.
inline std::vector<RankedWord> top_words(const PosteriorEstimates& e, std::size_t s, std::size_t t, std::size_t n = 20) {
	if (n < 1) throw ValidationError("top_words: N >= 1 required");
	if (s >= e.S || t >= e.T) throw ValidationError("top_words: sentiment or aspect out of range");
	std::vector<RankedWord> out;
	for (const auto& r : rank_top(e.phi_row(s, t), n)) {
		auto id = static_cast<WordId>(r.id);
		out.push_back({id < e.terms.size() ? e.terms[id] : std::to_string(id), id, r.probability});
	}
	return out;
}

struct AttributeProfile {
	std::string attribute;
	std::vector<std::vector<double>> psi;               // [s][t], full rows
	std::vector<std::vector<RankedEntry>> ranked;       // [s], truncated
};

inline std::vector<AttributeProfile> build_profiles(const PosteriorEstimates& e, std::size_t top_k = 30) {
	if (top_k < 1) throw ValidationError("build_profiles: top_k >= 1 required");
	std::vector<AttributeProfile> out;
	for (std::size_t a = 0; a < e.A; ++a) {
		AttributeProfile p;
		p.attribute = a < e.attributes.size() ? e.attributes[a] : std::to_string(a);
		for (std::size_t s = 0; s < e.S; ++s) {
			auto row = e.psi_row(s, a);
			p.psi.emplace_back(row.begin(), row.end());
			p.ranked.push_back(rank_top(row, top_k));
		}
		out.push_back(std::move(p));
	}
	return out;
}

// JSON forms ----------------------------------------------------------------

inline nlohmann::ordered_json estimates_to_json(const PosteriorEstimates& e) {
	nlohmann::ordered_json j;
	j["meta"] = {{"S", e.S},
	             {"T", e.T},
	             {"A", e.A},
	             {"D", e.D},
	             {"W", e.W},
	             {"phi_index", "phi[s][t][v]"},
	             {"psi_index", "psi[s][a][t]"},
	             {"theta_index", "theta[d][s]"},
	             {"terms", e.terms},
	             {"attributes", e.attributes},
	             {"doc_ids", e.doc_ids}};
	auto nest = [](const std::vector<double>& flat, std::size_t outer, std::size_t mid, std::size_t inner) {
		nlohmann::ordered_json arr = nlohmann::ordered_json::array();
		for (std::size_t x = 0; x < outer; ++x) {
			nlohmann::ordered_json m = nlohmann::ordered_json::array();
			for (std::size_t y = 0; y < mid; ++y) {
				auto b = flat.begin() + static_cast<std::ptrdiff_t>((x * mid + y) * inner);
				m.push_back(std::vector<double>(b, b + static_cast<std::ptrdiff_t>(inner)));
			}
			arr.push_back(std::move(m));
		}
		return arr;
	};
	j["phi"] = nest(e.phi, e.S, e.T, e.W);
	j["psi"] = nest(e.psi, e.S, e.A, e.T);
	nlohmann::ordered_json th = nlohmann::ordered_json::array();
	for (std::size_t d = 0; d < e.D; ++d) {
		auto b = e.theta.begin() + static_cast<std::ptrdiff_t>(d * e.S);
		th.push_back(std::vector<double>(b, b + static_cast<std::ptrdiff_t>(e.S)));
	}
	j["theta"] = std::move(th);
	return j;
}

inline PosteriorEstimates estimates_from_json(const nlohmann::json& j) {
	try {
		PosteriorEstimates e;
		const auto& m = j.at("meta");
		e.S = m.at("S").get<std::size_t>();
		e.T = m.at("T").get<std::size_t>();
		e.A = m.at("A").get<std::size_t>();
		e.D = m.at("D").get<std::size_t>();
		e.W = m.at("W").get<std::size_t>();
		e.terms = m.value("terms", std::vector<std::string>{});
		e.attributes = m.value("attributes", std::vector<std::string>{});
		e.doc_ids = m.value("doc_ids", std::vector<std::string>{});
		auto flatten = [](const nlohmann::json& arr, std::size_t outer, std::size_t mid, std::size_t inner, const char* what) {
			std::vector<double> flat;
			flat.reserve(outer * mid * inner);
			if (arr.size() != outer) throw FormatError(std::string(what) + ": wrong outer dimension");
			for (const auto& x : arr) {
				if (x.size() != mid) throw FormatError(std::string(what) + ": wrong middle dimension");
				for (const auto& y : x) {
					if (y.size() != inner) throw FormatError(std::string(what) + ": wrong inner dimension");
					for (const auto& v : y) flat.push_back(v.get<double>());
				}
			}
			return flat;
		};
		e.phi = flatten(j.at("phi"), e.S, e.T, e.W, "phi");
		e.psi = flatten(j.at("psi"), e.S, e.A, e.T, "psi");
		nlohmann::json th = nlohmann::json::array({j.at("theta")});
		e.theta = flatten(th, 1, e.D, e.S, "theta");
		return e;
	} catch (const nlohmann::json::exception& ex) {
		throw FormatError(std::string("estimates file: ") + ex.what());
	}
}

inline void write_estimates(const PosteriorEstimates& e, const std::string& path) {
	std::ofstream out(path);
	if (!out) throw Error("cannot write estimates file: " + path);
	out << estimates_to_json(e).dump(1) << '\n';
}

inline PosteriorEstimates read_estimates(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw FormatError("cannot open estimates file: " + path);
	nlohmann::json j;
	try {
		in >> j;
	} catch (const nlohmann::json::exception& ex) {
		throw FormatError("estimates file " + path + ": " + ex.what());
	}
	return estimates_from_json(j);
}

/// Optional aspect names: a JSON object mapping aspect id (as a string) to a
/// label.
using AspectLabels = std::map<std::size_t, std::string>;

inline AspectLabels read_aspect_labels(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw FormatError("cannot open label map: " + path);
	AspectLabels labels;
	try {
		nlohmann::json j;
		in >> j;
		for (const auto& [k, v] : j.items()) labels[std::stoul(k)] = v.get<std::string>();
	} catch (const std::exception& ex) {
		throw FormatError("label map " + path + ": " + ex.what());
	}
	return labels;
}

inline nlohmann::ordered_json profiles_to_json(const std::vector<AttributeProfile>& profiles, const AspectLabels& labels = {}) {
	nlohmann::ordered_json arr = nlohmann::ordered_json::array();
	for (const auto& p : profiles) {
		nlohmann::ordered_json jp;
		jp["attribute"] = p.attribute;
		jp["psi"] = p.psi;
		nlohmann::ordered_json ranked = nlohmann::ordered_json::array();
		for (const auto& row : p.ranked) {
			nlohmann::ordered_json r = nlohmann::ordered_json::array();
			for (const auto& e : row) {
				nlohmann::ordered_json item{{"aspect", e.id}, {"probability", e.probability}};
				if (auto it = labels.find(e.id); it != labels.end()) item["label"] = it->second;
				r.push_back(std::move(item));
			}
			ranked.push_back(std::move(r));
		}
		jp["ranked"] = std::move(ranked);
		arr.push_back(std::move(jp));
	}
	return nlohmann::ordered_json{{"profiles", std::move(arr)}};
}

inline std::vector<AttributeProfile> profiles_from_json(const nlohmann::json& j) {
	try {
		std::vector<AttributeProfile> out;
		for (const auto& jp : j.at("profiles")) {
			AttributeProfile p;
			p.attribute = jp.at("attribute").get<std::string>();
			p.psi = jp.at("psi").get<std::vector<std::vector<double>>>();
			for (const auto& row : jp.at("ranked")) {
				std::vector<RankedEntry> r;
				for (const auto& e : row) r.push_back({e.at("aspect").get<std::size_t>(), e.at("probability").get<double>()});
				p.ranked.push_back(std::move(r));
			}
			out.push_back(std::move(p));
		}
		return out;
	} catch (const nlohmann::json::exception& ex) {
		throw FormatError(std::string("profiles file: ") + ex.what());
	}
}

inline std::vector<AttributeProfile> read_profiles(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw FormatError("cannot open profiles file: " + path);
	nlohmann::json j;
	try {
		in >> j;
	} catch (const nlohmann::json::exception& ex) {
		throw FormatError("profiles file " + path + ": " + ex.what());
	}
	return profiles_from_json(j);
}

} // namespace trait
