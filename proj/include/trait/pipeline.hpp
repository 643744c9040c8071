#pragma once

// Stage implementations shared by the CLI subcommands, and the file-based
// pipeline runner that chains them with a cache manifest.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trait/checkpoint.hpp"
#include "trait/config.hpp"
#include "trait/corpus.hpp"
#include "trait/embedding.hpp"
#include "trait/estimates.hpp"
#include "trait/eval.hpp"
#include "trait/graph.hpp"
#include "trait/parallel.hpp"
#include "trait/sampler.hpp"

namespace trait {

inline constexpr std::string_view kVersion = "1.0.0";

using LogFn = std::function<void(const std::string&)>;

/// Writes through a temporary sibling and renames, so a crash never leaves a
/// truncated artifact under the final name.
inline void write_atomic(const std::string& path, const std::function<void(std::ostream&)>& body) {
	const std::string tmp = path + ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary);
		if (!out) throw Error("cannot write " + tmp);
		body(out);
		out.flush();
		if (!out) throw Error("failed writing " + tmp);
	}
	std::filesystem::rename(tmp, path);
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
	write_atomic(path, [&](std::ostream& out) { out << j.dump(1) << '\n'; });
}

inline std::uint64_t file_hash(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw FormatError("cannot read " + path);
	std::uint64_t h = io::fnv1a("");
	std::vector<char> buf(1 << 16);
	while (in) {
		in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
		h = io::fnv1a(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
	}
	return h;
}

inline std::string hex64(std::uint64_t x) {
	char buf[17];
	std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
	return buf;
}

// Stages -----------------------------------------------------------------------

inline CorrespondenceGraph graph_for(const Corpus& corpus, const std::string& sentence_embeddings, double rho) {
	if (sentence_embeddings.empty()) return CorrespondenceGraph::empty(corpus, rho);
	return build_correspondence_graph(read_embeddings(sentence_embeddings), corpus, rho);
}

/// Promotion table for the corpus vocabulary, or nullopt when the urn is off.
inline std::optional<PromotionTable> promotion_for(const Vocabulary& vocabulary, const std::string& word_embeddings,
                                                   const PromotionOptions& opt) {
	if (opt.epsilon == 0.0) return std::nullopt;
	if (word_embeddings.empty()) throw ValidationError("epsilon > 0 requires word embeddings");
	return build_promotion_table(read_embeddings(word_embeddings), vocabulary, opt);
}

struct ChainRun {
	std::uint64_t seed = 0;
	std::vector<double> trace;
	double final_log_joint() const { return trace.empty() ? 0.0 : trace.back(); }
};

struct MultiChainResult {
	std::vector<ChainRun> chains;
	std::size_t best = 0; // highest final log joint, first on ties
	ModelState state;      // the best chain's final sample
};

/// Runs independent chains with seeds seed, seed+1, ... on shared inputs.
/// progress(chain, sweep, log_joint) is called from the chain's thread.
inline MultiChainResult train_chains(const Corpus& corpus, const CorrespondenceGraph& graph, const PromotionTable* promotion,
                                     const Hyperparams& hyper, std::size_t chains, std::size_t check_interval,
                                     const std::function<void(std::size_t, std::uint64_t, double)>& progress = {}) {
	if (chains == 0) throw ValidationError("chains must be >= 1");
	auto layout = ModelLayout::build(corpus, graph, promotion, hyper.epsilon);
	std::vector<ModelState> states(chains);
	MultiChainResult r;
	r.chains.resize(chains);
	parallel_for(
	    chains,
	    [&](std::size_t begin, std::size_t end) {
		    for (std::size_t c = begin; c < end; ++c) {
			    Hyperparams h = hyper;
			    h.seed = hyper.seed + c;
			    states[c] = init_state(layout, h);
			    TrainOptions opt;
			    opt.rebuild_interval = check_interval;
			    if (progress) opt.on_sweep = [&, c](std::uint64_t sweep, double lj) { progress(c, sweep, lj); };
			    r.chains[c].seed = h.seed;
			    r.chains[c].trace = continue_training(states[c], TrainingInputs{&corpus, &graph, promotion}, opt);
		    }
	    },
	    static_cast<unsigned>(std::min<std::size_t>(chains, worker_threads())));
	for (std::size_t c = 1; c < chains; ++c) {
		if (r.chains[c].final_log_joint() > r.chains[r.best].final_log_joint()) r.best = c;
	}
	r.state = std::move(states[r.best]);
	return r;
}

/// One row per sweep: sweep index then the log joint of every chain.
inline void write_trace(const std::vector<ChainRun>& chains, std::uint64_t first_sweep, std::ostream& out) {
	out << "sweep";
	for (std::size_t c = 0; c < chains.size(); ++c) out << "\tchain" << c;
	out << '\n';
	std::size_t rows = 0;
	for (const auto& c : chains) rows = std::max(rows, c.trace.size());
	char buf[40];
	for (std::size_t k = 0; k < rows; ++k) {
		out << first_sweep + k + 1;
		for (const auto& c : chains) {
			if (k < c.trace.size()) {
				std::snprintf(buf, sizeof buf, "%.17g", c.trace[k]);
				out << '\t' << buf;
			} else {
				out << '\t';
			}
		}
		out << '\n';
	}
}

/// Theta for `corpus`: read from the estimates when the documents match the
/// trained ones, otherwise folded in against the checkpoint (if given).
inline std::vector<double> theta_for(const PosteriorEstimates& e, const Corpus& corpus, const Checkpoint* model,
                                     std::size_t fold_in_sweeps, std::uint64_t seed, std::size_t* dropped = nullptr) {
	bool same = corpus.documents.size() == e.D;
	for (std::size_t d = 0; same && d < e.D; ++d) same = corpus.documents[d].id == e.doc_ids[d];
	if (same) return e.theta;
	if (model == nullptr) throw ValidationError("corpus documents differ from the trained ones; a model checkpoint is needed to fold them in");
	Corpus test = reindex_corpus(corpus, model->terms, model->attributes, dropped);
	return fold_in(model->counts, model->hyper, test, nullptr, fold_in_sweeps, seed);
}

inline nlohmann::ordered_json classification_json(const std::vector<double>& theta, std::size_t S, const Corpus& corpus) {
	auto predictions = classify_documents(theta, S);
	auto report = evaluate_classification(predictions, ground_truth_labels(corpus));
	auto j = to_json(report);
	auto docs = nlohmann::ordered_json::array();
	for (std::size_t d = 0; d < predictions.size(); ++d) {
		docs.push_back({{"id", corpus.documents[d].id},
		                {"predicted", predictions[d].positive ? "positive" : "negative"},
		                {"score", predictions[d].score}});
	}
	j["documents"] = std::move(docs);
	return j;
}

// Pipeline ---------------------------------------------------------------------

struct PipelineOptions {
	bool force = false;
	LogFn log;
};

struct PipelineResult {
	bool ok = true;
	nlohmann::ordered_json manifest;
};

namespace detail {

struct StagePlan {
	std::string name;
	std::vector<std::string> inputs;  // files whose content keys the cache
	std::vector<std::string> outputs;
	std::string settings;             // config values the stage reads
	std::function<void()> run;
};

inline std::string fmt_settings(std::initializer_list<std::pair<const char*, std::string>> kv) {
	std::string s;
	for (const auto& [k, v] : kv) s += std::string(k) + "=" + v + ";";
	return s;
}

inline std::string num(double x) {
	char buf[40];
	std::snprintf(buf, sizeof buf, "%.17g", x);
	return buf;
}

inline std::string short_num(double x) {
	char buf[40];
	std::snprintf(buf, sizeof buf, "%.6g", x);
	return buf;
}

} // namespace detail

/// Runs the configured stages in dependency order. A stage whose key (its
/// settings plus the hashes of its input files) matches the previous manifest
/// and whose outputs exist is skipped unless forced. The manifest is written
/// after every stage so a failure leaves the partial state recorded.
inline PipelineResult run_pipeline(const RunConfig& cfg, const PipelineOptions& options = {}) {
	auto violations = validate_config(cfg);
	if (!violations.empty()) {
		std::string msg = "invalid config:";
		for (const auto& v : violations) msg += "\n  " + v;
		throw ValidationError(msg);
	}
	auto log = [&](const std::string& m) {
		if (options.log) options.log(m);
	};
	const auto out_dir = cfg.resolve(cfg.paths.output_dir);
	std::filesystem::create_directories(out_dir);
	const auto manifest_path = cfg.output("manifest.json");

	nlohmann::json previous;
	if (std::filesystem::exists(manifest_path)) {
		try {
			std::ifstream in(manifest_path);
			in >> previous;
		} catch (const nlohmann::json::exception&) {
			previous = nlohmann::json();
		}
	}

	const auto& m = cfg.model;
	const std::string corpus_out = cfg.output("corpus.jsonl");
	const std::string corpus_in = cfg.runs("preprocess") ? corpus_out : cfg.resolve(cfg.paths.corpus);
	const std::string sent_emb = cfg.resolve(cfg.paths.sentence_embeddings);
	const std::string word_emb = m.epsilon > 0.0 ? cfg.resolve(cfg.paths.word_embeddings) : std::string();
	const std::string graph_out = cfg.output("graph.bin");
	const std::string model_out = cfg.output("model.bin");
	const std::string trace_out = cfg.output("trace.tsv");
	const std::string est_out = cfg.output("estimates.json");
	const std::string profiles_out = cfg.output("profiles.json");

	auto load_training_corpus = [&] { return load_corpus(corpus_in, CorpusFormat::Tokenized, cfg.normalization); };

	std::vector<detail::StagePlan> plan;
	if (cfg.runs("preprocess")) {
		const auto& n = cfg.normalization;
		std::vector<std::string> stops(n.stop_words.begin(), n.stop_words.end());
		std::sort(stops.begin(), stops.end());
		std::string stop_list;
		for (const auto& s : stops) stop_list += s + ",";
		plan.push_back({"preprocess",
		                {cfg.resolve(cfg.paths.raw)},
		                {corpus_out},
		                detail::fmt_settings({{"stemming", n.stemming ? "1" : "0"},
		                                      {"numbers", n.number_placeholders ? "1" : "0"},
		                                      {"min_frequency", std::to_string(n.min_frequency)},
		                                      {"stop_words", stop_list}}),
		                [&] {
			                auto corpus = load_corpus(cfg.resolve(cfg.paths.raw), CorpusFormat::Raw, cfg.normalization);
			                write_atomic(corpus_out, [&](std::ostream& out) { save_corpus(corpus, out); });
			                log("preprocess: " + std::to_string(corpus.documents.size()) + " documents, " +
			                    std::to_string(corpus.num_sentences()) + " sentences, " +
			                    std::to_string(corpus.vocabulary.size()) + " terms");
		                }});
	}
	if (cfg.runs("graph")) {
		std::vector<std::string> inputs{corpus_in};
		if (!sent_emb.empty()) inputs.push_back(sent_emb);
		plan.push_back({"graph", inputs, {graph_out}, detail::fmt_settings({{"rho", detail::num(m.rho)}}), [&] {
			                auto corpus = load_training_corpus();
			                auto g = graph_for(corpus, sent_emb, m.rho);
			                write_atomic(graph_out, [&](std::ostream& out) { write_graph(g, out); });
			                log("graph: " + std::to_string(g.num_nodes()) + " sentences, " + std::to_string(g.num_edges()) +
			                    " edges at rho " + detail::short_num(m.rho));
		                }});
	}
	if (cfg.runs("train")) {
		std::vector<std::string> inputs{corpus_in, graph_out};
		if (!word_emb.empty()) inputs.push_back(word_emb);
		if (!cfg.paths.lexicon.empty()) inputs.push_back(cfg.resolve(cfg.paths.lexicon));
		plan.push_back(
		    {"train", inputs, {model_out, trace_out},
		     detail::fmt_settings({{"S", std::to_string(m.S)},
		                           {"T", std::to_string(m.T)},
		                           {"alpha", detail::num(m.alpha_high) + "," + detail::num(m.alpha_zero) + "," + detail::num(m.alpha_base)},
		                           {"beta", detail::num(m.beta)},
		                           {"gamma", detail::num(cfg.gamma_value())},
		                           {"lambda", detail::num(m.lambda)},
		                           {"epsilon", detail::num(m.epsilon)},
		                           {"promotion", detail::num(m.promotion_threshold) + "," + std::to_string(m.promotion_top_k)},
		                           {"sweeps", std::to_string(m.burn_in) + "+" + std::to_string(m.iterations)},
		                           {"chains", std::to_string(m.chains)},
		                           {"seed", std::to_string(cfg.seed)},
		                           {"stemming", cfg.normalization.stemming ? "1" : "0"}}),
		     [&] {
			     auto corpus = load_training_corpus();
			     auto graph = read_graph(graph_out);
			     auto promotion = promotion_for(corpus.vocabulary, word_emb,
			                                    PromotionOptions{m.epsilon, m.promotion_threshold, static_cast<std::size_t>(m.promotion_top_k)});
			     auto hyper = make_hyperparams(cfg, corpus.vocabulary);
			     const PromotionTable* pt = promotion ? &*promotion : nullptr;
			     const auto interval = static_cast<std::uint64_t>(m.log_interval);
			     auto result = train_chains(corpus, graph, pt, hyper, static_cast<std::size_t>(m.chains),
			                                static_cast<std::size_t>(m.check_interval), [&](std::size_t c, std::uint64_t sweep, double lj) {
				                                if (interval > 0 && sweep % interval == 0) {
					                                log("train: chain " + std::to_string(c) + " sweep " + std::to_string(sweep) +
					                                    " log joint " + detail::short_num(lj));
				                                }
			                                });
			     for (std::size_t c = 0; c < result.chains.size(); ++c) {
				     log("train: chain " + std::to_string(c) + " (seed " + std::to_string(result.chains[c].seed) +
				         ") final log joint " + detail::short_num(result.chains[c].final_log_joint()) + (c == result.best ? " [kept]" : ""));
			     }
			     auto ck = make_checkpoint(result.state, corpus, graph, pt);
			     write_atomic(model_out, [&](std::ostream& out) { write_checkpoint(ck, out); });
			     write_atomic(trace_out, [&](std::ostream& out) { write_trace(result.chains, 0, out); });
		     }});
	}
	if (cfg.runs("estimate")) {
		plan.push_back({"estimate", {model_out}, {est_out}, "", [&] {
			                auto e = estimate(read_checkpoint(model_out));
			                write_json(est_out, estimates_to_json(e));
		                }});
	}
	if (cfg.runs("profile")) {
		std::vector<std::string> inputs{est_out};
		if (!cfg.paths.label_map.empty()) inputs.push_back(cfg.resolve(cfg.paths.label_map));
		plan.push_back({"profile", inputs, {profiles_out}, detail::fmt_settings({{"top", std::to_string(cfg.eval.profile_top)}}), [&] {
			                auto e = read_estimates(est_out);
			                AspectLabels labels;
			                if (!cfg.paths.label_map.empty()) labels = read_aspect_labels(cfg.resolve(cfg.paths.label_map));
			                write_json(profiles_out, profiles_to_json(build_profiles(e, static_cast<std::size_t>(cfg.eval.profile_top)), labels));
		                }});
	}
	if (cfg.runs("coherence")) {
		const std::string wv = cfg.resolve(cfg.paths.word_embeddings);
		std::vector<std::string> inputs{est_out, corpus_in};
		if (!wv.empty()) inputs.push_back(wv);
		const std::string out = cfg.output("coherence.json");
		plan.push_back({"coherence", inputs, {out},
		                detail::fmt_settings({{"top", std::to_string(cfg.eval.top_words)}, {"window", std::to_string(cfg.eval.npmi_window)}}),
		                [&, wv, out] {
			                auto e = read_estimates(est_out);
			                auto corpus = load_training_corpus();
			                std::optional<EmbeddingTable> emb;
			                if (!wv.empty()) emb = read_embeddings(wv);
			                auto rep = coherence_report(e, corpus, static_cast<std::size_t>(cfg.eval.top_words), emb ? &*emb : nullptr,
			                                            static_cast<std::size_t>(cfg.eval.npmi_window));
			                write_json(out, to_json(rep));
			                if (rep.mean_npmi) log("coherence: mean NPMI " + detail::short_num(*rep.mean_npmi));
		                }});
	}
	if (cfg.runs("classify")) {
		const std::string out = cfg.output("classification.json");
		plan.push_back({"classify", {est_out, corpus_in}, {out}, "", [&, out] {
			                auto e = read_estimates(est_out);
			                auto corpus = load_training_corpus();
			                auto j = classification_json(theta_for(e, corpus, nullptr, 0, cfg.seed), e.S, corpus);
			                log("classify: accuracy " + detail::short_num(j["accuracy"].get<double>()));
			                write_json(out, j);
		                }});
	}
	if (cfg.runs("similarity")) {
		const std::string json_out = cfg.output("similarity.json"), tsv_out = cfg.output("similarity.tsv");
		plan.push_back({"similarity", {profiles_out}, {json_out, tsv_out}, "", [&, json_out, tsv_out] {
			                auto profiles = read_profiles(profiles_out);
			                auto mat = profile_distance_matrix(profiles);
			                write_json(json_out, to_json(mat));
			                write_atomic(tsv_out, [&](std::ostream& o) { write_tsv(mat, o); });
		                }});
	}
	if (cfg.runs("baseline") && !sent_emb.empty()) {
		const std::string out = cfg.output("baseline.json");
		plan.push_back({"baseline", {corpus_in, sent_emb}, {out}, "", [&, out] {
			                auto corpus = load_training_corpus();
			                write_json(out, baseline_to_json(baseline_similarity_matrix(corpus, read_embeddings(sent_emb))));
		                }});
	}

	PipelineResult result;
	auto& man = result.manifest;
	man["tool"] = "trait";
	man["version"] = kVersion;
	man["seed"] = cfg.seed;
	man["threads"] = worker_threads();
	auto inputs = nlohmann::ordered_json::object();
	for (const auto& [field, p] : {std::pair<std::string, std::string>{"raw", cfg.paths.raw},
	                               {"corpus", cfg.paths.corpus},
	                               {"sentence_embeddings", cfg.paths.sentence_embeddings},
	                               {"word_embeddings", cfg.paths.word_embeddings},
	                               {"lexicon", cfg.paths.lexicon},
	                               {"label_map", cfg.paths.label_map}}) {
		if (p.empty()) continue;
		inputs[field] = {{"path", cfg.resolve(p)}, {"fnv1a64", hex64(file_hash(cfg.resolve(p)))}};
	}
	man["inputs"] = std::move(inputs);
	man["stages"] = nlohmann::ordered_json::array();

	auto previous_key = [&](const std::string& stage) -> std::string {
		if (!previous.contains("stages") || !previous["stages"].is_array()) return {};
		for (const auto& s : previous["stages"]) {
			if (s.value("name", "") == stage && (s.value("status", "") == "ran" || s.value("status", "") == "cached")) {
				return s.value("key", "");
			}
		}
		return {};
	};

	for (const auto& stage : plan) {
		nlohmann::ordered_json entry;
		entry["name"] = stage.name;
		auto started = std::chrono::steady_clock::now();
		try {
			std::uint64_t key = io::fnv1a(stage.name + "|" + stage.settings + "|" + std::string(kVersion));
			for (const auto& in : stage.inputs) key = io::fnv1a(hex64(file_hash(in)), key);
			entry["key"] = hex64(key);
			bool outputs_exist = true;
			for (const auto& o : stage.outputs) outputs_exist = outputs_exist && std::filesystem::exists(o);
			if (!options.force && outputs_exist && previous_key(stage.name) == hex64(key)) {
				entry["status"] = "cached";
				log(stage.name + ": cache hit");
			} else {
				log(stage.name + ": running");
				stage.run();
				entry["status"] = "ran";
			}
		} catch (const std::exception& ex) {
			entry["status"] = "failed";
			entry["error"] = ex.what();
			result.ok = false;
		}
		entry["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
		auto outs = nlohmann::ordered_json::array();
		for (const auto& o : stage.outputs) {
			outs.push_back({{"path", std::filesystem::path(o).filename().string()}, {"exists", std::filesystem::exists(o)}});
		}
		entry["outputs"] = std::move(outs);
		const bool failed = entry["status"] == "failed";
		man["stages"].push_back(std::move(entry));
		write_json(manifest_path, man);
		if (failed) {
			log(stage.name + ": failed: " + man["stages"].back()["error"].get<std::string>());
			break;
		}
	}
	man["ok"] = result.ok;
	write_json(manifest_path, man);
	return result;
}

} // namespace trait
