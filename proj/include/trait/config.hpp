#pragma once

// Run configuration (TOML) and its validation.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "trait/error.hpp"
#include "trait/lexicon.hpp"
#include "trait/model.hpp"
#include "trait/text.hpp"

namespace trait {

inline const std::vector<std::string>& pipeline_stages() {
	static const std::vector<std::string> stages = {"preprocess", "graph",    "train",      "estimate", "profile",
	                                                "coherence",  "classify", "similarity", "baseline"};
	return stages;
}

struct PathsConfig {
	std::string raw;                 // raw JSONL input for the preprocess stage
	std::string corpus;              // tokenized corpus input when not preprocessing
	std::string sentence_embeddings;
	std::string word_embeddings;
	std::string lexicon;             // empty: built-in lexicon
	std::string label_map;           // optional aspect names for profiles
	std::string output_dir = "out";
};

// Integers are kept signed so that out-of-range input can be reported rather
// than wrapped.
struct ModelConfig {
	std::int64_t S = 2;
	std::int64_t T = 20;
	double alpha_high = 5.0;
	double alpha_zero = 0.0;
	double alpha_base = 0.05;
	double beta = 5.0;
	std::optional<double> gamma; // default 50 / T
	double lambda = 1.0;
	double epsilon = 0.3;
	std::int64_t iterations = 1000;
	std::int64_t burn_in = 500;
	double rho = 0.7;
	double promotion_threshold = 0.5;
	std::int64_t promotion_top_k = 10;
	std::int64_t chains = 1;
	std::int64_t check_interval = 100;
	std::int64_t log_interval = 50;
};

struct EvalConfig {
	std::int64_t top_words = 20;
	std::int64_t profile_top = 30;
	std::int64_t npmi_window = 0; // 0: document co-occurrence
};

struct RunConfig {
	std::uint64_t seed = 42;
	std::vector<std::string> stages = pipeline_stages();
	PathsConfig paths;
	NormalizationConfig normalization;
	ModelConfig model;
	EvalConfig eval;
	std::filesystem::path base_dir = "."; // relative paths resolve against this

	std::string resolve(const std::string& p) const {
		if (p.empty()) return p;
		std::filesystem::path path(p);
		return path.is_absolute() ? path.string() : (base_dir / path).lexically_normal().string();
	}
	std::string output(const std::string& name) const { return (std::filesystem::path(resolve(paths.output_dir)) / name).string(); }
	bool runs(const std::string& stage) const {
		for (const auto& s : stages) {
			if (s == stage) return true;
		}
		return false;
	}
	double gamma_value() const { return model.gamma ? *model.gamma : 50.0 / static_cast<double>(model.T); }
};

namespace detail {

template <typename T>
void read_value(const toml::table& tbl, std::string_view key, T& dst, const std::string& where, std::vector<std::string>& errors) {
	const auto* node = tbl.get(key);
	if (node == nullptr) return;
	if constexpr (std::is_same_v<T, double>) {
		if (auto v = node->value<double>()) {
			dst = *v;
			return;
		}
	} else if constexpr (std::is_same_v<T, std::optional<double>>) {
		if (auto v = node->value<double>()) {
			dst = *v;
			return;
		}
	} else if constexpr (std::is_same_v<T, std::int64_t>) {
		if (auto v = node->value_exact<std::int64_t>()) {
			dst = *v;
			return;
		}
	} else if constexpr (std::is_same_v<T, bool>) {
		if (auto v = node->value_exact<bool>()) {
			dst = *v;
			return;
		}
	} else if constexpr (std::is_same_v<T, std::string>) {
		if (auto v = node->value_exact<std::string>()) {
			dst = *v;
			return;
		}
	} else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
		if (const auto* arr = node->as_array()) {
			std::vector<std::string> out;
			for (const auto& el : *arr) {
				auto v = el.value_exact<std::string>();
				if (!v) {
					errors.push_back(where + std::string(key) + ": expected an array of strings");
					return;
				}
				out.push_back(*v);
			}
			dst = std::move(out);
			return;
		}
	}
	errors.push_back(where + std::string(key) + ": wrong type");
}

inline void reject_unknown(const toml::table& tbl, const std::set<std::string>& known, const std::string& where,
                           std::vector<std::string>& errors) {
	for (const auto& [k, v] : tbl) {
		if (!known.contains(std::string(k.str()))) errors.push_back(where + std::string(k.str()) + ": unknown key");
	}
}

} // namespace detail

/// Parses a TOML run configuration. Syntax errors, type errors and unknown
/// keys raise ValidationError listing every problem found.
inline RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = ".") {
	toml::table root;
	try {
		root = toml::parse(text);
	} catch (const toml::parse_error& e) {
		std::ostringstream msg;
		msg << "config: " << e.description() << " (line " << e.source().begin.line << ")";
		throw ValidationError(msg.str());
	}
	RunConfig cfg;
	cfg.base_dir = base_dir;
	std::vector<std::string> errors;
	detail::reject_unknown(root, {"seed", "stages", "paths", "normalization", "model", "eval"}, "", errors);
	if (const auto* seed = root.get("seed")) {
		auto v = seed->value_exact<std::int64_t>();
		if (!v || *v < 0) {
			errors.push_back("seed: expected a nonnegative integer");
		} else {
			cfg.seed = static_cast<std::uint64_t>(*v);
		}
	}
	detail::read_value(root, "stages", cfg.stages, "", errors);

	if (const auto* t = root["paths"].as_table()) {
		auto& p = cfg.paths;
		detail::reject_unknown(*t, {"raw", "corpus", "sentence_embeddings", "word_embeddings", "lexicon", "label_map", "output_dir"},
		                       "paths.", errors);
		detail::read_value(*t, "raw", p.raw, "paths.", errors);
		detail::read_value(*t, "corpus", p.corpus, "paths.", errors);
		detail::read_value(*t, "sentence_embeddings", p.sentence_embeddings, "paths.", errors);
		detail::read_value(*t, "word_embeddings", p.word_embeddings, "paths.", errors);
		detail::read_value(*t, "lexicon", p.lexicon, "paths.", errors);
		detail::read_value(*t, "label_map", p.label_map, "paths.", errors);
		detail::read_value(*t, "output_dir", p.output_dir, "paths.", errors);
	}
	if (const auto* t = root["normalization"].as_table()) {
		auto& n = cfg.normalization;
		detail::reject_unknown(*t, {"stemming", "number_placeholders", "min_frequency", "stop_words", "extra_stop_words", "negators"},
		                       "normalization.", errors);
		detail::read_value(*t, "stemming", n.stemming, "normalization.", errors);
		detail::read_value(*t, "number_placeholders", n.number_placeholders, "normalization.", errors);
		std::int64_t min_freq = static_cast<std::int64_t>(n.min_frequency);
		detail::read_value(*t, "min_frequency", min_freq, "normalization.", errors);
		if (min_freq < 1) {
			errors.push_back("normalization.min_frequency: min_frequency ≥ 1 required");
		} else {
			n.min_frequency = static_cast<std::size_t>(min_freq);
		}
		std::vector<std::string> words;
		if (t->contains("stop_words")) {
			detail::read_value(*t, "stop_words", words, "normalization.", errors);
			n.stop_words = {words.begin(), words.end()};
		}
		words.clear();
		detail::read_value(*t, "extra_stop_words", words, "normalization.", errors);
		n.stop_words.insert(words.begin(), words.end());
		if (t->contains("negators")) {
			words.clear();
			detail::read_value(*t, "negators", words, "normalization.", errors);
			n.negators = {words.begin(), words.end()};
		}
	}
	if (const auto* t = root["model"].as_table()) {
		auto& m = cfg.model;
		detail::reject_unknown(*t, {"S", "T", "alpha_high", "alpha_zero", "alpha_base", "beta", "gamma", "lambda", "epsilon",
		                            "iterations", "burn_in", "rho", "promotion_threshold", "promotion_top_k", "chains",
		                            "check_interval", "log_interval"},
		                       "model.", errors);
		detail::read_value(*t, "S", m.S, "model.", errors);
		detail::read_value(*t, "T", m.T, "model.", errors);
		detail::read_value(*t, "alpha_high", m.alpha_high, "model.", errors);
		detail::read_value(*t, "alpha_zero", m.alpha_zero, "model.", errors);
		detail::read_value(*t, "alpha_base", m.alpha_base, "model.", errors);
		detail::read_value(*t, "beta", m.beta, "model.", errors);
		detail::read_value(*t, "gamma", m.gamma, "model.", errors);
		detail::read_value(*t, "lambda", m.lambda, "model.", errors);
		detail::read_value(*t, "epsilon", m.epsilon, "model.", errors);
		detail::read_value(*t, "iterations", m.iterations, "model.", errors);
		detail::read_value(*t, "burn_in", m.burn_in, "model.", errors);
		detail::read_value(*t, "rho", m.rho, "model.", errors);
		detail::read_value(*t, "promotion_threshold", m.promotion_threshold, "model.", errors);
		detail::read_value(*t, "promotion_top_k", m.promotion_top_k, "model.", errors);
		detail::read_value(*t, "chains", m.chains, "model.", errors);
		detail::read_value(*t, "check_interval", m.check_interval, "model.", errors);
		detail::read_value(*t, "log_interval", m.log_interval, "model.", errors);
	}
	if (const auto* t = root["eval"].as_table()) {
		auto& e = cfg.eval;
		detail::reject_unknown(*t, {"top_words", "profile_top", "npmi_window"}, "eval.", errors);
		detail::read_value(*t, "top_words", e.top_words, "eval.", errors);
		detail::read_value(*t, "profile_top", e.profile_top, "eval.", errors);
		detail::read_value(*t, "npmi_window", e.npmi_window, "eval.", errors);
	}
	if (!errors.empty()) {
		std::string msg = "invalid config:";
		for (const auto& e : errors) msg += "\n  " + e;
		throw ValidationError(msg);
	}
	return cfg;
}

inline RunConfig load_config(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw ValidationError("cannot open config file: " + path);
	std::stringstream buf;
	buf << in.rdbuf();
	return parse_config(buf.str(), std::filesystem::path(path).parent_path());
}

/// Every violated constraint, each naming its field; empty when the config is
/// usable. With check_paths, referenced inputs must exist.
inline std::vector<std::string> validate_config(const RunConfig& cfg, bool check_paths = true) {
	std::vector<std::string> v;
	const auto& m = cfg.model;
	auto need = [&v](bool ok, const std::string& msg) {
		if (!ok) v.push_back(msg);
	};
	need(m.S >= 2, "model.S: S ≥ 2 required");
	need(m.T >= 2, "model.T: T ≥ 2 required");
	need(m.S <= 0xFFFF && m.T <= 0xFFFF, "model.S/T: S, T ≤ 65535 required");
	need(m.alpha_high > m.alpha_base && m.alpha_base > m.alpha_zero && m.alpha_zero >= 0.0,
	     "model.alpha_*: alpha_high > alpha_base > alpha_zero ≥ 0 required");
	need(m.beta > 0.0, "model.beta: beta > 0 required");
	need(!m.gamma || *m.gamma > 0.0, "model.gamma: gamma > 0 required");
	need(m.lambda >= 0.0 && std::isfinite(m.lambda), "model.lambda: lambda ≥ 0 required");
	need(m.epsilon >= 0.0 && m.epsilon <= 1.0, "model.epsilon: 0 ≤ epsilon ≤ 1 required");
	need(m.iterations >= 0, "model.iterations: iterations ≥ 0 required");
	need(m.burn_in >= 0, "model.burn_in: burn_in ≥ 0 required");
	need(m.rho >= -1.0 && m.rho <= 1.0, "model.rho: -1 ≤ rho ≤ 1 required");
	need(m.promotion_threshold >= -1.0 && m.promotion_threshold <= 1.0,
	     "model.promotion_threshold: -1 ≤ promotion_threshold ≤ 1 required");
	need(m.promotion_top_k >= 1, "model.promotion_top_k: promotion_top_k ≥ 1 required");
	need(m.chains >= 1, "model.chains: chains ≥ 1 required");
	need(m.check_interval >= 0, "model.check_interval: check_interval ≥ 0 required");
	need(m.log_interval >= 0, "model.log_interval: log_interval ≥ 0 required");
	need(cfg.eval.top_words >= 1, "eval.top_words: top_words ≥ 1 required");
	need(cfg.eval.profile_top >= 1, "eval.profile_top: profile_top ≥ 1 required");
	need(cfg.eval.npmi_window >= 0, "eval.npmi_window: npmi_window ≥ 0 required");
	for (const auto& s : cfg.stages) {
		bool known = false;
		for (const auto& k : pipeline_stages()) known = known || k == s;
		need(known, "stages: unknown stage '" + s + "'");
	}
	need(!cfg.paths.output_dir.empty(), "paths.output_dir: must be set");
	need(m.epsilon == 0.0 || !cfg.paths.word_embeddings.empty(),
	     "paths.word_embeddings: required when epsilon > 0");
	need(m.lambda == 0.0 || !cfg.paths.sentence_embeddings.empty(),
	     "paths.sentence_embeddings: required when lambda > 0");
	if (cfg.runs("preprocess")) {
		need(!cfg.paths.raw.empty(), "paths.raw: required by the preprocess stage");
	} else {
		need(!cfg.paths.corpus.empty(), "paths.corpus: required when the preprocess stage is skipped");
	}
	if (check_paths) {
		auto exists = [&](const std::string& field, const std::string& p) {
			if (!p.empty() && !std::filesystem::exists(cfg.resolve(p))) {
				v.push_back(field + ": file not found: " + cfg.resolve(p));
			}
		};
		if (cfg.runs("preprocess")) {
			exists("paths.raw", cfg.paths.raw);
		} else {
			exists("paths.corpus", cfg.paths.corpus);
		}
		exists("paths.sentence_embeddings", cfg.paths.sentence_embeddings);
		if (m.epsilon > 0.0) exists("paths.word_embeddings", cfg.paths.word_embeddings);
		exists("paths.lexicon", cfg.paths.lexicon);
		exists("paths.label_map", cfg.paths.label_map);
	}
	return v;
}

/// Sampler settings for a corpus vocabulary; the config must validate.
inline Hyperparams make_hyperparams(const RunConfig& cfg, const Vocabulary& vocabulary) {
	const auto& m = cfg.model;
	Hyperparams h;
	h.S = static_cast<std::size_t>(m.S);
	h.T = static_cast<std::size_t>(m.T);
	auto lexicon = cfg.paths.lexicon.empty() ? default_lexicon() : load_lexicon(cfg.resolve(cfg.paths.lexicon));
	h.alpha = build_alpha(lexicon.normalized(cfg.normalization.stemming), vocabulary, h.S,
	                      AlphaOptions{m.alpha_high, m.alpha_zero, m.alpha_base});
	h.beta.assign(h.S, m.beta);
	h.gamma.assign(h.T, cfg.gamma_value());
	h.lambda = m.lambda;
	h.epsilon = m.epsilon;
	h.iterations = static_cast<std::size_t>(m.iterations);
	h.burn_in = static_cast<std::size_t>(m.burn_in);
	h.seed = cfg.seed;
	return h;
}

} // namespace trait
