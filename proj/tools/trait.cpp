// trait: command-line front end for the attribute-conditioned sentiment/aspect
// model. Exit codes: 0 success, 2 validation failure, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <trait.hpp>

namespace {

using namespace trait;

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Options shared by every subcommand: an optional config file whose values
// the explicit flags override.
struct Common {
	std::string config_path;
	RunConfig cfg;
	void load() {
		if (!config_path.empty()) cfg = load_config(config_path);
	}
};

// Flags bound to optionals so that only the ones actually given override the
// config.
struct ModelFlags {
	std::optional<std::int64_t> S, T, iterations, burn_in, chains, top_k;
	std::optional<double> lambda, epsilon, beta, gamma, rho, threshold, alpha_high, alpha_zero, alpha_base;
	std::optional<std::uint64_t> seed;

	void add(CLI::App* app) {
		app->add_option("--S", S, "number of sentiments");
		app->add_option("--T", T, "number of aspects");
		app->add_option("--iters", iterations, "sampling sweeps after burn-in");
		app->add_option("--burn", burn_in, "burn-in sweeps");
		app->add_option("--chains", chains, "independent chains (best final log joint is kept)");
		app->add_option("--lambda", lambda, "MRF strength");
		app->add_option("--epsilon", epsilon, "urn promotion mass");
		app->add_option("--beta", beta, "sentiment prior");
		app->add_option("--gamma", gamma, "aspect prior (default 50/T)");
		app->add_option("--rho", rho, "graph similarity threshold");
		app->add_option("--promotion-threshold", threshold, "word cosine needed for promotion");
		app->add_option("--promotion-top-k", top_k, "related words kept per word");
		app->add_option("--alpha-high", alpha_high, "prior on matching lexicon words");
		app->add_option("--alpha-zero", alpha_zero, "prior on opposite lexicon words");
		app->add_option("--alpha-base", alpha_base, "prior on other words");
		app->add_option("--seed", seed, "random seed");
	}
	void apply(RunConfig& c) const {
		auto& m = c.model;
		if (S) m.S = *S;
		if (T) m.T = *T;
		if (iterations) m.iterations = *iterations;
		if (burn_in) m.burn_in = *burn_in;
		if (chains) m.chains = *chains;
		if (top_k) m.promotion_top_k = *top_k;
		if (lambda) m.lambda = *lambda;
		if (epsilon) m.epsilon = *epsilon;
		if (beta) m.beta = *beta;
		if (gamma) m.gamma = *gamma;
		if (rho) m.rho = *rho;
		if (threshold) m.promotion_threshold = *threshold;
		if (alpha_high) m.alpha_high = *alpha_high;
		if (alpha_zero) m.alpha_zero = *alpha_zero;
		if (alpha_base) m.alpha_base = *alpha_base;
		if (seed) c.seed = *seed;
	}
};

// Model ranges only; path checks are done by each subcommand for its own flags.
void require_valid_model(RunConfig c) {
	c.stages = {"train"};
	c.paths.corpus = "-";
	if (c.paths.sentence_embeddings.empty()) c.paths.sentence_embeddings = "-";
	if (c.paths.word_embeddings.empty()) c.paths.word_embeddings = "-";
	auto v = validate_config(c, false);
	if (!v.empty()) {
		std::string msg = "invalid settings:";
		for (const auto& x : v) msg += "\n  " + x;
		throw ValidationError(msg);
	}
}

void emit_json(const nlohmann::ordered_json& j, const std::string& out) {
	if (out.empty() || out == "-") {
		std::cout << j.dump(1) << '\n';
	} else {
		write_json(out, j);
		spdlog::info("wrote {}", out);
	}
}

void write_text(const std::string& path, const std::string& text) {
	write_atomic(path, [&](std::ostream& o) { o << text; });
}

} // namespace

int main(int argc, char** argv) {
	spdlog::set_default_logger(spdlog::stderr_color_mt("trait"));
	spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

	CLI::App app{"Attribute-conditioned sentiment and aspect modelling of reviews"};
	app.require_subcommand(1);
	app.fallthrough();
	bool quiet = false;
	app.add_flag("-q,--quiet", quiet, "only log warnings and errors");
	Common common;
	auto add_config = [&](CLI::App* sub) { sub->add_option("--config", common.config_path, "TOML run configuration")->check(CLI::ExistingFile); };

	// preprocess
	auto* pre = app.add_subcommand("preprocess", "normalize raw JSONL reviews into a tokenized corpus");
	std::string pre_in, pre_out;
	pre->add_option("--in", pre_in, "raw JSONL corpus")->required()->check(CLI::ExistingFile);
	pre->add_option("--out", pre_out, "tokenized JSONL output")->required();
	add_config(pre);

	// graph
	auto* gr = app.add_subcommand("graph", "build the sentence correspondence graph");
	std::string gr_corpus, gr_emb, gr_out;
	std::optional<double> gr_rho;
	gr->add_option("--corpus", gr_corpus, "tokenized corpus")->required()->check(CLI::ExistingFile);
	gr->add_option("--sent-emb", gr_emb, "sentence embeddings (TREM); omit for an empty graph")->check(CLI::ExistingFile);
	gr->add_option("--rho", gr_rho, "cosine threshold (strict)");
	gr->add_option("--out", gr_out, "graph file")->required();
	add_config(gr);

	// train
	auto* tr = app.add_subcommand("train", "run the Gibbs sampler and write a checkpoint");
	std::string tr_corpus, tr_graph, tr_wemb, tr_lex, tr_out, tr_resume, tr_trace;
	ModelFlags tr_flags;
	tr->add_option("--corpus", tr_corpus, "tokenized corpus")->required()->check(CLI::ExistingFile);
	tr->add_option("--graph", tr_graph, "graph file; omit for no correspondence")->check(CLI::ExistingFile);
	tr->add_option("--word-emb", tr_wemb, "word embeddings (TREM), needed when epsilon > 0")->check(CLI::ExistingFile);
	tr->add_option("--lexicon", tr_lex, "sentiment lexicon file (default: built-in)")->check(CLI::ExistingFile);
	tr->add_option("--resume", tr_resume, "continue from this checkpoint")->check(CLI::ExistingFile);
	tr->add_option("--trace", tr_trace, "per-sweep log joint TSV");
	tr->add_option("--out", tr_out, "checkpoint output")->required();
	tr_flags.add(tr);
	add_config(tr);

	// estimate
	auto* es = app.add_subcommand("estimate", "compute phi, psi and theta from a checkpoint");
	std::string es_model, es_out;
	es->add_option("--model", es_model, "checkpoint")->required()->check(CLI::ExistingFile);
	es->add_option("--out", es_out, "estimates JSON (default stdout)");

	// profile
	auto* pr = app.add_subcommand("profile", "rank aspects per attribute value and sentiment");
	std::string pr_est, pr_out, pr_labels;
	std::size_t pr_top = 30;
	pr->add_option("--est", pr_est, "estimates JSON")->required()->check(CLI::ExistingFile);
	pr->add_option("--top", pr_top, "aspects listed per sentiment")->check(CLI::PositiveNumber);
	pr->add_option("--labels", pr_labels, "JSON map from aspect id to name")->check(CLI::ExistingFile);
	pr->add_option("--out", pr_out, "profiles JSON (default stdout)");

	// coherence
	auto* co = app.add_subcommand("coherence", "NPMI and embedding coherence of top words");
	std::string co_est, co_corpus, co_wemb, co_out;
	std::size_t co_top = 20, co_window = 0;
	co->add_option("--est", co_est, "estimates JSON")->required()->check(CLI::ExistingFile);
	co->add_option("--corpus", co_corpus, "reference corpus")->required()->check(CLI::ExistingFile);
	co->add_option("--word-emb", co_wemb, "word embeddings for the embedding score")->check(CLI::ExistingFile);
	co->add_option("--topn", co_top, "top words per topic")->check(CLI::PositiveNumber);
	co->add_option("--window", co_window, "sliding window in sentences (0: whole document)");
	co->add_option("--out", co_out, "report JSON (default stdout)");

	// classify
	auto* cl = app.add_subcommand("classify", "document polarity from theta against rating labels");
	std::string cl_est, cl_corpus, cl_model, cl_out;
	std::size_t cl_sweeps = 100;
	std::uint64_t cl_seed = 42;
	cl->add_option("--est", cl_est, "estimates JSON")->required()->check(CLI::ExistingFile);
	cl->add_option("--corpus", cl_corpus, "corpus with ratings")->required()->check(CLI::ExistingFile);
	cl->add_option("--model", cl_model, "checkpoint, used to fold in documents not seen in training")->check(CLI::ExistingFile);
	cl->add_option("--sweeps", cl_sweeps, "fold-in sweeps");
	cl->add_option("--seed", cl_seed, "fold-in seed");
	cl->add_option("--out", cl_out, "report JSON (default stdout)");

	// similarity
	auto* si = app.add_subcommand("similarity", "Jensen-Shannon distances between attribute profiles");
	std::string si_prof, si_out, si_tsv;
	si->add_option("--profiles", si_prof, "profiles JSON")->required()->check(CLI::ExistingFile);
	si->add_option("--out", si_out, "matrix JSON (default stdout)");
	si->add_option("--tsv", si_tsv, "matrix TSV");

	// baseline-sim
	auto* bs = app.add_subcommand("baseline-sim", "embedding-average similarity between attribute groups");
	std::string bs_emb, bs_corpus, bs_out, bs_group = "attribute";
	bs->add_option("--sent-emb", bs_emb, "sentence embeddings (TREM)")->required()->check(CLI::ExistingFile);
	bs->add_option("--corpus", bs_corpus, "tokenized corpus")->required()->check(CLI::ExistingFile);
	bs->add_option("--group-by", bs_group, "grouping key")->check(CLI::IsMember({"attribute"}));
	bs->add_option("--out", bs_out, "matrix JSON (default stdout)");

	// synth
	auto* sy = app.add_subcommand("synth", "generate a synthetic review corpus with planted structure");
	std::string sy_dir;
	std::size_t sy_docs = 50, sy_S = 2, sy_T = 4, sy_W = 120, sy_attrs = 2, sy_lex = 8, sy_dim = 16;
	std::size_t sy_iters = 100, sy_burn = 100;
	double sy_noise = 0.3, sy_theta = 0.3, sy_shared = 0.3;
	std::uint64_t sy_seed = 1;
	sy->add_option("--out-dir", sy_dir, "directory for the generated files")->required();
	sy->add_option("--docs", sy_docs, "documents")->check(CLI::PositiveNumber);
	sy->add_option("--S", sy_S, "sentiments");
	sy->add_option("--T", sy_T, "aspects")->check(CLI::PositiveNumber);
	sy->add_option("--W", sy_W, "vocabulary size")->check(CLI::PositiveNumber);
	sy->add_option("--attributes", sy_attrs, "attribute values")->check(CLI::PositiveNumber);
	sy->add_option("--lexicon-words", sy_lex, "lexicon words per polarity")->check(CLI::PositiveNumber);
	sy->add_option("--dim", sy_dim, "embedding dimension")->check(CLI::PositiveNumber);
	sy->add_option("--noise", sy_noise, "embedding noise scale");
	sy->add_option("--theta-concentration", sy_theta, "document sentiment concentration");
	sy->add_option("--shared-mass", sy_shared, "word mass shared across aspects");
	sy->add_option("--iters", sy_iters, "sweeps written into the generated config");
	sy->add_option("--burn", sy_burn, "burn-in written into the generated config");
	sy->add_option("--seed", sy_seed, "generator seed");

	// pipeline
	auto* pl = app.add_subcommand("pipeline", "run the configured stages end to end");
	bool pl_force = false;
	std::string pl_out_dir;
	std::vector<std::string> pl_stages;
	ModelFlags pl_flags;
	pl->add_option("--config", common.config_path, "TOML run configuration")->required()->check(CLI::ExistingFile);
	pl->add_flag("--force", pl_force, "rerun stages even when cached");
	pl->add_option("--out-dir", pl_out_dir, "override paths.output_dir");
	pl->add_option("--stages", pl_stages, "override the stage list");
	pl_flags.add(pl);

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		int code = app.exit(e);
		return code == 0 ? 0 : kExitValidation;
	}
	if (quiet) spdlog::set_level(spdlog::level::warn);

	try {
		common.load();
		auto& cfg = common.cfg;

		if (*pre) {
			auto corpus = load_corpus(pre_in, CorpusFormat::Raw, cfg.normalization);
			write_atomic(pre_out, [&](std::ostream& o) { save_corpus(corpus, o); });
			spdlog::info("{} documents, {} sentences, {} terms -> {}", corpus.documents.size(), corpus.num_sentences(),
			             corpus.vocabulary.size(), pre_out);
		} else if (*gr) {
			double rho = gr_rho ? *gr_rho : cfg.model.rho;
			if (!(rho >= -1.0 && rho <= 1.0)) throw ValidationError("--rho: -1 ≤ rho ≤ 1 required");
			auto corpus = load_corpus(gr_corpus, CorpusFormat::Tokenized, cfg.normalization);
			auto g = graph_for(corpus, gr_emb, rho);
			write_atomic(gr_out, [&](std::ostream& o) { write_graph(g, o); });
			spdlog::info("{} nodes, {} edges -> {}", g.num_nodes(), g.num_edges(), gr_out);
		} else if (*tr) {
			tr_flags.apply(cfg);
			if (!tr_wemb.empty()) cfg.paths.word_embeddings = std::filesystem::absolute(tr_wemb).string();
			if (!tr_lex.empty()) cfg.paths.lexicon = std::filesystem::absolute(tr_lex).string();
			auto corpus = load_corpus(tr_corpus, CorpusFormat::Tokenized, cfg.normalization);
			auto graph = tr_graph.empty() ? CorrespondenceGraph::empty(corpus, cfg.model.rho) : read_graph(tr_graph);
			if (tr_graph.empty() && cfg.model.lambda > 0.0) spdlog::warn("no graph given: the MRF term has no edges");
			RunConfig check = cfg;
			if (tr_graph.empty()) check.model.lambda = 0.0;
			require_valid_model(check);
			const auto& m = cfg.model;
			auto promotion = promotion_for(corpus.vocabulary, cfg.resolve(cfg.paths.word_embeddings),
			                               PromotionOptions{m.epsilon, m.promotion_threshold, static_cast<std::size_t>(m.promotion_top_k)});
			const PromotionTable* pt = promotion ? &*promotion : nullptr;
			if (pt != nullptr) spdlog::info("promotion table: {} related pairs", pt->num_pairs());
			const auto interval = static_cast<std::uint64_t>(m.log_interval);
			auto progress = [&](std::size_t c, std::uint64_t sweep, double lj) {
				if (interval > 0 && sweep % interval == 0) spdlog::info("chain {} sweep {} log joint {:.6f}", c, sweep, lj);
			};
			std::vector<ChainRun> runs;
			ModelState state;
			std::uint64_t first_sweep = 0;
			if (!tr_resume.empty()) {
				auto ck = read_checkpoint(tr_resume);
				state = restore_state(ck, corpus, graph, pt);
				// Only the sweep budget may change on resume.
				if (tr_flags.iterations) state.hyper.iterations = static_cast<std::size_t>(*tr_flags.iterations);
				if (tr_flags.burn_in) state.hyper.burn_in = static_cast<std::size_t>(*tr_flags.burn_in);
				first_sweep = state.sweeps_done;
				spdlog::info("resuming at sweep {} of {}", first_sweep, state.hyper.burn_in + state.hyper.iterations);
				TrainOptions opt;
				opt.rebuild_interval = static_cast<std::size_t>(m.check_interval);
				opt.on_sweep = [&](std::uint64_t sweep, double lj) { progress(0, sweep, lj); };
				ChainRun run;
				run.seed = state.hyper.seed;
				run.trace = continue_training(state, TrainingInputs{&corpus, &graph, pt}, opt);
				runs.push_back(std::move(run));
			} else {
				auto hyper = make_hyperparams(cfg, corpus.vocabulary);
				auto result = train_chains(corpus, graph, pt, hyper, static_cast<std::size_t>(m.chains),
				                           static_cast<std::size_t>(m.check_interval), progress);
				for (std::size_t c = 0; c < result.chains.size(); ++c) {
					spdlog::info("chain {} seed {} final log joint {:.6f}{}", c, result.chains[c].seed, result.chains[c].final_log_joint(),
					             c == result.best ? " (kept)" : "");
				}
				runs = std::move(result.chains);
				state = std::move(result.state);
			}
			write_atomic(tr_out, [&](std::ostream& o) { write_checkpoint(make_checkpoint(state, corpus, graph, pt), o); });
			if (!tr_trace.empty()) write_atomic(tr_trace, [&](std::ostream& o) { write_trace(runs, first_sweep, o); });
			spdlog::info("checkpoint at sweep {} -> {}", state.sweeps_done, tr_out);
		} else if (*es) {
			emit_json(estimates_to_json(estimate(read_checkpoint(es_model))), es_out);
		} else if (*pr) {
			auto e = read_estimates(pr_est);
			AspectLabels labels;
			if (!pr_labels.empty()) labels = read_aspect_labels(pr_labels);
			emit_json(profiles_to_json(build_profiles(e, pr_top), labels), pr_out);
		} else if (*co) {
			auto e = read_estimates(co_est);
			auto corpus = load_corpus(co_corpus, CorpusFormat::Tokenized, cfg.normalization);
			std::optional<EmbeddingTable> emb;
			if (!co_wemb.empty()) emb = read_embeddings(co_wemb);
			emit_json(to_json(coherence_report(e, corpus, co_top, emb ? &*emb : nullptr, co_window)), co_out);
		} else if (*cl) {
			auto e = read_estimates(cl_est);
			auto corpus = load_corpus(cl_corpus, CorpusFormat::Auto, cfg.normalization);
			std::optional<Checkpoint> model;
			if (!cl_model.empty()) model = read_checkpoint(cl_model);
			std::size_t dropped = 0;
			auto theta = theta_for(e, corpus, model ? &*model : nullptr, cl_sweeps, cl_seed, &dropped);
			if (dropped > 0) {
				spdlog::warn("{} documents had no in-vocabulary words and were dropped", dropped);
				corpus = reindex_corpus(corpus, model->terms, model->attributes);
			}
			auto j = classification_json(theta, e.S, corpus);
			spdlog::info("accuracy {:.4f}", j["accuracy"].get<double>());
			emit_json(j, cl_out);
		} else if (*si) {
			auto mat = profile_distance_matrix(read_profiles(si_prof));
			emit_json(to_json(mat), si_out);
			if (!si_tsv.empty()) write_atomic(si_tsv, [&](std::ostream& o) { write_tsv(mat, o); });
		} else if (*bs) {
			auto corpus = load_corpus(bs_corpus, CorpusFormat::Tokenized, cfg.normalization);
			emit_json(baseline_to_json(baseline_similarity_matrix(corpus, read_embeddings(bs_emb))), bs_out);
		} else if (*sy) {
			std::filesystem::create_directories(sy_dir);
			auto pv = planted_vocabulary(sy_S, sy_T, sy_W, sy_lex);
			std::mt19937_64 rng(sy_seed * 7 + 1);
			SyntheticSpec spec;
			spec.S = sy_S;
			spec.T = sy_T;
			spec.num_docs = sy_docs;
			spec.num_attributes = sy_attrs;
			spec.min_words = 3;
			spec.max_words = 6;
			spec.theta_concentration = sy_theta;
			spec.terms = pv.terms;
			spec.phi = planted_phi(pv, sy_S, sy_T, PhiPlan{0.2, sy_shared, 1.0}, rng);
			spec.seed = sy_seed;
			auto syn = generate_synthetic(spec);
			const auto dir = std::filesystem::path(sy_dir);
			write_atomic((dir / "reviews.jsonl").string(), [&](std::ostream& o) {
				for (const auto& d : syn.corpus.documents) {
					nlohmann::ordered_json j{{"id", d.id},
					                         {"attribute", syn.corpus.attributes.value(d.attribute)},
					                         {"rating", d.rating ? nlohmann::ordered_json(*d.rating) : nlohmann::ordered_json()},
					                         {"text", render_text(syn.corpus, d)}};
					o << j.dump() << '\n';
				}
			});
			write_atomic((dir / "sent.trem").string(), [&](std::ostream& o) {
				write_embeddings(planted_sentence_embeddings(syn, sy_T, static_cast<std::uint32_t>(sy_dim), sy_noise, sy_seed + 5), o);
			});
			write_atomic((dir / "word.trem").string(), [&](std::ostream& o) {
				write_embeddings(planted_word_embeddings(pv, static_cast<std::uint32_t>(sy_dim), sy_noise, sy_seed + 6), o);
			});
			nlohmann::ordered_json truth{{"S", sy_S}, {"T", sy_T}, {"terms", pv.terms}, {"phi", syn.phi}, {"psi", syn.psi},
			                             {"theta", syn.theta}, {"sentiment", syn.labels.sentiment}, {"aspect", syn.labels.aspect}};
			write_json((dir / "truth.json").string(), truth);
			std::ostringstream toml;
			toml << "seed = 42\n\n[paths]\nraw = \"reviews.jsonl\"\nsentence_embeddings = \"sent.trem\"\n"
			     << "word_embeddings = \"word.trem\"\noutput_dir = \"out\"\n\n[model]\nS = " << sy_S << "\nT = " << sy_T
			     << "\niterations = " << sy_iters << "\nburn_in = " << sy_burn << "\nlambda = 1.0\nepsilon = 0.3\nrho = 0.7\n\n"
			     << "[eval]\ntop_words = 10\nprofile_top = " << sy_T << "\n";
			write_text((dir / "pipeline.toml").string(), toml.str());
			spdlog::info("{} documents, {} sentences, {} terms -> {}", syn.corpus.documents.size(), syn.corpus.num_sentences(),
			             pv.terms.size(), sy_dir);
		} else if (*pl) {
			pl_flags.apply(cfg);
			if (!pl_out_dir.empty()) cfg.paths.output_dir = std::filesystem::absolute(pl_out_dir).string();
			if (!pl_stages.empty()) cfg.stages = pl_stages;
			auto result = run_pipeline(cfg, PipelineOptions{pl_force, [](const std::string& m) { spdlog::info("{}", m); }});
			if (!result.ok) {
				spdlog::error("pipeline failed; see {}", cfg.output("manifest.json"));
				return kExitRuntime;
			}
		}
	} catch (const ValidationError& e) {
		spdlog::error("{}", e.what());
		return kExitValidation;
	} catch (const FormatError& e) {
		spdlog::error("{}", e.what());
		return kExitValidation;
	} catch (const std::exception& e) {
		spdlog::error("{}", e.what());
		return kExitRuntime;
	}
	return 0;
}
