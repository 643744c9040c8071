#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "trait/error.hpp"
#include "trait/text.hpp"

namespace trait {

using WordId = std::uint32_t;
using AttributeId = std::uint32_t;

/// A token as stored in a sentence: an index into the corpus vocabulary.
/// The surface form is recovered through Vocabulary::term.
struct Token {
	std::string_view surface;
	WordId vocab_id = 0;
};

struct Sentence {
	std::vector<WordId> words; // C_i = words.size() >= 1
	std::uint32_t doc = 0;
	std::uint32_t index_in_doc = 0;
};

struct Document {
	std::string id;
	AttributeId attribute = 0;
	std::optional<int> rating;
	std::vector<Sentence> sentences;
};

class Vocabulary {
public:
	/// Returns the id of term, inserting it if needed.
	WordId intern(std::string_view term) {
		if (auto it = index_.find(std::string(term)); it != index_.end()) {
			return it->second;
		}
		auto id = static_cast<WordId>(terms_.size());
		terms_.emplace_back(term);
		frequencies_.push_back(0);
		index_.emplace(terms_.back(), id);
		return id;
	}

	std::optional<WordId> find(std::string_view term) const {
		if (auto it = index_.find(std::string(term)); it != index_.end()) return it->second;
		return std::nullopt;
	}

	const std::string& term(WordId id) const { return terms_.at(id); }
	const std::vector<std::string>& terms() const { return terms_; }
	std::size_t size() const { return terms_.size(); }
	std::uint64_t frequency(WordId id) const { return frequencies_.at(id); }
	void count(WordId id, std::uint64_t n = 1) { frequencies_.at(id) += n; }

private:
	std::vector<std::string> terms_;
	std::vector<std::uint64_t> frequencies_;
	std::unordered_map<std::string, WordId> index_;
};

/// Ordered bijection between attribute values and [0, |A|).
class AttributeIndex {
public:
	AttributeId intern(std::string_view value) {
		if (auto it = index_.find(std::string(value)); it != index_.end()) return it->second;
		auto id = static_cast<AttributeId>(values_.size());
		values_.emplace_back(value);
		index_.emplace(values_.back(), id);
		return id;
	}
	std::optional<AttributeId> find(std::string_view value) const {
		if (auto it = index_.find(std::string(value)); it != index_.end()) return it->second;
		return std::nullopt;
	}
	const std::string& value(AttributeId id) const { return values_.at(id); }
	const std::vector<std::string>& values() const { return values_; }
	std::size_t size() const { return values_.size(); }

private:
	std::vector<std::string> values_;
	std::unordered_map<std::string, AttributeId> index_;
};

/// Global sentence index in corpus order (documents in order, sentences in
/// document order).
using SentenceIndex = std::size_t;

class Corpus {
public:
	std::vector<Document> documents;
	Vocabulary vocabulary;
	AttributeIndex attributes;

	std::size_t num_sentences() const {
		std::size_t n = 0;
		for (const auto& d : documents) n += d.sentences.size();
		return n;
	}

	/// Flattened view: pointers into documents in corpus order.
	std::vector<const Sentence*> sentences() const {
		std::vector<const Sentence*> out;
		out.reserve(num_sentences());
		for (const auto& d : documents) {
			for (const auto& s : d.sentences) out.push_back(&s);
		}
		return out;
	}

	/// Key used by sentence-embedding files: `<doc_id>#<sentence_index>`.
	std::string sentence_key(const Sentence& s) const {
		return documents.at(s.doc).id + "#" + std::to_string(s.index_in_doc);
	}

	Token token(WordId id) const { return Token{vocabulary.term(id), id}; }

	/// Checks every documented invariant; throws ValidationError on violation.
	void validate() const {
		if (vocabulary.size() == 0) throw ValidationError("corpus has an empty vocabulary");
		for (std::size_t d = 0; d < documents.size(); ++d) {
			const auto& doc = documents[d];
			if (doc.sentences.empty()) throw ValidationError("document " + doc.id + " has no sentences");
			if (doc.attribute >= attributes.size()) throw ValidationError("document " + doc.id + " has unregistered attribute");
			for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
				const auto& s = doc.sentences[i];
				if (s.words.empty()) throw ValidationError("empty sentence in document " + doc.id);
				if (s.doc != d || s.index_in_doc != i) throw ValidationError("sentence back-reference mismatch in " + doc.id);
				for (auto w : s.words) {
					if (w >= vocabulary.size()) throw ValidationError("vocab id out of range in " + doc.id);
				}
			}
		}
	}
};

/// Accumulates documents of surface tokens and assigns ids in first-occurrence
/// order, so that a serialized corpus reloads with identical indices.
class CorpusBuilder {
public:
	struct RawDocument {
		std::string id;
		std::string attribute;
		std::optional<int> rating;
		std::vector<std::vector<std::string>> sentences;
	};

	void add(RawDocument doc) { docs_.push_back(std::move(doc)); }

	/// Terms with corpus frequency below min_frequency are dropped; sentences
	/// and documents left empty are dropped with them.
	Corpus build(std::size_t min_frequency = 1) && {
		std::unordered_map<std::string, std::uint64_t> freq;
		if (min_frequency > 1) {
			for (const auto& d : docs_) {
				for (const auto& s : d.sentences) {
					for (const auto& t : s) ++freq[t];
				}
			}
		}
		Corpus corpus;
		for (auto& raw : docs_) {
			Document doc;
			doc.id = std::move(raw.id);
			doc.rating = raw.rating;
			for (auto& s : raw.sentences) {
				Sentence sent;
				for (auto& t : s) {
					if (min_frequency > 1 && freq[t] < min_frequency) continue;
					WordId id = corpus.vocabulary.intern(t);
					corpus.vocabulary.count(id);
					sent.words.push_back(id);
				}
				if (sent.words.empty()) continue;
				sent.doc = static_cast<std::uint32_t>(corpus.documents.size());
				sent.index_in_doc = static_cast<std::uint32_t>(doc.sentences.size());
				doc.sentences.push_back(std::move(sent));
			}
			if (doc.sentences.empty()) {
				++dropped_documents_;
				continue;
			}
			doc.attribute = corpus.attributes.intern(raw.attribute);
			corpus.documents.push_back(std::move(doc));
		}
		return corpus;
	}

	std::size_t dropped_documents() const { return dropped_documents_; }

private:
	std::vector<RawDocument> docs_;
	std::size_t dropped_documents_ = 0;
};

enum class CorpusFormat { Auto, Raw, Tokenized };

namespace detail {

inline CorpusBuilder::RawDocument parse_corpus_record(const nlohmann::json& j, std::size_t line, CorpusFormat format,
                                                      const NormalizationConfig& rules) {
	auto fail = [line](const std::string& msg) { return FormatError("line " + std::to_string(line) + ": " + msg); };
	if (!j.is_object()) throw fail("record is not a JSON object");
	CorpusBuilder::RawDocument doc;
	if (!j.contains("id")) throw fail("missing field 'id'");
	if (j["id"].is_string()) {
		doc.id = j["id"].get<std::string>();
	} else if (j["id"].is_number_integer()) {
		doc.id = std::to_string(j["id"].get<long long>());
	} else {
		throw fail("field 'id' must be a string");
	}
	if (!j.contains("attribute")) throw fail("missing field 'attribute'");
	if (!j["attribute"].is_string()) throw fail("field 'attribute' must be a string");
	doc.attribute = j["attribute"].get<std::string>();
	if (doc.attribute.empty()) throw fail("field 'attribute' is empty");
	if (j.contains("rating") && !j["rating"].is_null()) {
		if (!j["rating"].is_number_integer()) throw fail("field 'rating' must be an integer or null");
		int r = j["rating"].get<int>();
		if (r < 1 || r > 5) throw fail("field 'rating' must lie in 1..5");
		doc.rating = r;
	}
	bool has_sentences = j.contains("sentences");
	bool has_text = j.contains("text");
	bool tokenized = format == CorpusFormat::Tokenized || (format == CorpusFormat::Auto && has_sentences);
	if (tokenized) {
		if (!has_sentences || !j["sentences"].is_array()) throw fail("field 'sentences' must be an array of token arrays");
		for (const auto& s : j["sentences"]) {
			if (!s.is_array()) throw fail("each sentence must be an array of tokens");
			std::vector<std::string> toks;
			for (const auto& t : s) {
				if (!t.is_string()) throw fail("tokens must be strings");
				auto tok = t.get<std::string>();
				if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos) {
					throw fail("token must be non-empty and contain no whitespace");
				}
				toks.push_back(std::move(tok));
			}
			if (!toks.empty()) doc.sentences.push_back(std::move(toks));
		}
	} else {
		if (!has_text || !j["text"].is_string()) throw fail("field 'text' must be a string");
		doc.sentences = normalize_text(j["text"].get<std::string>(), rules);
	}
	return doc;
}

} // namespace detail

/// Reads a JSONL corpus. Raw records are normalized with `rules`; pre-tokenized
/// records are taken as-is.
inline Corpus load_corpus(std::istream& in, CorpusFormat format = CorpusFormat::Auto,
                          const NormalizationConfig& rules = {}) {
	CorpusBuilder builder;
	std::string line;
	std::size_t lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
		nlohmann::json j;
		try {
			j = nlohmann::json::parse(line);
		} catch (const nlohmann::json::parse_error& e) {
			throw FormatError("line " + std::to_string(lineno) + ": malformed JSON (" + e.what() + ")");
		}
		builder.add(detail::parse_corpus_record(j, lineno, format, rules));
	}
	Corpus corpus = std::move(builder).build(rules.min_frequency);
	if (corpus.documents.empty()) throw FormatError("corpus contains no non-empty documents");
	return corpus;
}

inline Corpus load_corpus(const std::string& path, CorpusFormat format = CorpusFormat::Auto,
                          const NormalizationConfig& rules = {}) {
	std::ifstream in(path);
	if (!in) throw FormatError("cannot open corpus file: " + path);
	return load_corpus(in, format, rules);
}

/// Writes the pre-tokenized JSONL form.
inline void save_corpus(const Corpus& corpus, std::ostream& out) {
	for (const auto& doc : corpus.documents) {
		nlohmann::ordered_json j;
		j["id"] = doc.id;
		j["attribute"] = corpus.attributes.value(doc.attribute);
		j["rating"] = doc.rating ? nlohmann::ordered_json(*doc.rating) : nlohmann::ordered_json(nullptr);
		auto sentences = nlohmann::ordered_json::array();
		for (const auto& s : doc.sentences) {
			auto toks = nlohmann::ordered_json::array();
			for (auto w : s.words) toks.push_back(corpus.vocabulary.term(w));
			sentences.push_back(std::move(toks));
		}
		j["sentences"] = std::move(sentences);
		out << j.dump() << '\n';
	}
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
	std::ofstream out(path, std::ios::binary);
	if (!out) throw Error("cannot write corpus file: " + path);
	save_corpus(corpus, out);
}

/// Sentences grouped by their document's attribute value; entry a lists the
/// global sentence indices of attribute a in corpus order.
using AttributePartition = std::vector<std::vector<SentenceIndex>>;

inline AttributePartition partition_by_attribute(const Corpus& corpus) {
	AttributePartition parts(corpus.attributes.size());
	SentenceIndex g = 0;
	for (const auto& doc : corpus.documents) {
		for (std::size_t i = 0; i < doc.sentences.size(); ++i) parts.at(doc.attribute).push_back(g++);
	}
	return parts;
}

/// Splits documents into train/test corpora sharing one vocabulary and
/// attribute index. Within every attribute value, the last ceil(fraction * n)
/// documents of a seeded shuffle go to the test side.
template <typename Rng>
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_fraction, Rng& rng) {
	if (test_fraction < 0.0 || test_fraction >= 1.0) throw ValidationError("test fraction must lie in [0, 1)");
	std::vector<std::vector<std::size_t>> by_attr(corpus.attributes.size());
	for (std::size_t d = 0; d < corpus.documents.size(); ++d) by_attr[corpus.documents[d].attribute].push_back(d);
	std::vector<bool> is_test(corpus.documents.size(), false);
	for (auto& docs : by_attr) {
		// Fisher-Yates with raw 64-bit draws keeps the split independent of
		// the standard library's distribution implementations.
		for (std::size_t i = docs.size(); i > 1; --i) {
			std::size_t j = static_cast<std::size_t>(rng() % i);
			std::swap(docs[i - 1], docs[j]);
		}
		auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(docs.size())));
		if (n_test >= docs.size() && !docs.empty()) n_test = docs.size() - 1;
		for (std::size_t k = docs.size() - n_test; k < docs.size(); ++k) is_test[docs[k]] = true;
	}
	Corpus train;
	Corpus test;
	train.vocabulary = corpus.vocabulary;
	test.vocabulary = corpus.vocabulary;
	train.attributes = corpus.attributes;
	test.attributes = corpus.attributes;
	for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
		Corpus& dst = is_test[d] ? test : train;
		Document doc = corpus.documents[d];
		auto new_index = static_cast<std::uint32_t>(dst.documents.size());
		for (auto& s : doc.sentences) s.doc = new_index;
		dst.documents.push_back(std::move(doc));
	}
	return {std::move(train), std::move(test)};
}

/// Re-expresses a corpus over a fixed vocabulary and attribute list (those of
/// a trained model). Unknown words are dropped, then sentences and documents
/// left empty; an unknown attribute value is an error. `dropped_documents`
/// receives the number of documents removed.
inline Corpus reindex_corpus(const Corpus& src, const std::vector<std::string>& terms,
                             const std::vector<std::string>& attributes, std::size_t* dropped_documents = nullptr) {
	Corpus out;
	for (const auto& t : terms) out.vocabulary.intern(t);
	for (const auto& a : attributes) out.attributes.intern(a);
	std::size_t dropped = 0;
	for (const auto& doc : src.documents) {
		const auto& value = src.attributes.value(doc.attribute);
		auto attr = out.attributes.find(value);
		if (!attr) throw ValidationError("document " + doc.id + " has attribute '" + value + "' unknown to the model");
		Document d{doc.id, *attr, doc.rating, {}};
		for (const auto& s : doc.sentences) {
			Sentence ns;
			for (auto w : s.words) {
				if (auto id = out.vocabulary.find(src.vocabulary.term(w))) {
					ns.words.push_back(*id);
					out.vocabulary.count(*id);
				}
			}
			if (ns.words.empty()) continue;
			ns.doc = static_cast<std::uint32_t>(out.documents.size());
			ns.index_in_doc = static_cast<std::uint32_t>(d.sentences.size());
			d.sentences.push_back(std::move(ns));
		}
		if (d.sentences.empty()) {
			++dropped;
			continue;
		}
		out.documents.push_back(std::move(d));
	}
	if (dropped_documents != nullptr) *dropped_documents = dropped;
	return out;
}

} // namespace trait
