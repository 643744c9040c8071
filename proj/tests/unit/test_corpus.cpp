#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <trait/corpus.hpp>

#include "../support/fixtures.hpp"

using namespace trait;

namespace {

Corpus load_text(const std::string& text, CorpusFormat format = CorpusFormat::Auto) {
	std::istringstream in(text);
	return load_corpus(in, format);
}

} // namespace

TEST(LoadCorpus, TwoDocumentFixture) {
	auto c = load_text(R"({"id": "r1", "attribute": "business", "rating": 4, "text": "Great location. Clean rooms."}
{"id": "r2", "attribute": "family", "rating": null, "text": "The pool was dirty."}
)");
	EXPECT_EQ(c.documents.size(), 2u);
	EXPECT_EQ(c.attributes.size(), 2u);
	EXPECT_EQ(c.documents[0].sentences.size(), 2u);
	EXPECT_EQ(c.documents[0].rating, 4);
	EXPECT_FALSE(c.documents[1].rating.has_value());
	EXPECT_NO_THROW(c.validate());
}

TEST(LoadCorpus, MissingAttributeNamesTheLine) {
	try {
		load_text("{\"id\": \"a\", \"attribute\": \"x\", \"text\": \"good\"}\n{\"id\": \"b\", \"text\": \"bad\"}\n");
		FAIL() << "expected FormatError";
	} catch (const FormatError& e) {
		EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
		EXPECT_NE(std::string(e.what()).find("attribute"), std::string::npos);
	}
}

TEST(LoadCorpus, RejectsMalformedRecords) {
	EXPECT_THROW(load_text("{not json}\n"), FormatError);
	EXPECT_THROW(load_text(R"({"id": "a", "attribute": "x", "rating": 9, "text": "good"})"), FormatError);
	EXPECT_THROW(load_text(R"({"id": "a", "attribute": "x", "sentences": [["two words"]]})"), FormatError);
	EXPECT_THROW(load_text(""), FormatError);
}

TEST(LoadCorpus, PreTokenizedRecordsAreTakenAsIs) {
	auto c = load_text(R"({"id": "a", "attribute": "x", "rating": 5, "sentences": [["Rooms", "great"], []]})");
	ASSERT_EQ(c.documents[0].sentences.size(), 1u);
	EXPECT_EQ(c.vocabulary.term(c.documents[0].sentences[0].words[0]), "Rooms");
}

TEST(LoadCorpus, SaveLoadRoundTripKeepsIds) {
	auto c = load_text(R"({"id": "a", "attribute": "x", "rating": 2, "text": "Noisy street. Friendly staff."}
{"id": "b", "attribute": "y", "text": "Friendly front desk."})");
	std::stringstream buf;
	save_corpus(c, buf);
	auto back = load_corpus(buf, CorpusFormat::Tokenized);
	EXPECT_EQ(back.vocabulary.terms(), c.vocabulary.terms());
	EXPECT_EQ(back.attributes.values(), c.attributes.values());
	ASSERT_EQ(back.documents.size(), c.documents.size());
	for (std::size_t d = 0; d < c.documents.size(); ++d) {
		EXPECT_EQ(back.documents[d].id, c.documents[d].id);
		EXPECT_EQ(back.documents[d].rating, c.documents[d].rating);
		ASSERT_EQ(back.documents[d].sentences.size(), c.documents[d].sentences.size());
		for (std::size_t s = 0; s < c.documents[d].sentences.size(); ++s) {
			EXPECT_EQ(back.documents[d].sentences[s].words, c.documents[d].sentences[s].words);
		}
	}
}

TEST(LoadCorpus, MinFrequencyDropsRareTermsAndEmptySentences) {
	std::istringstream in(R"({"id": "a", "attribute": "x", "sentences": [["pool", "view"], ["rare"]]}
{"id": "b", "attribute": "x", "sentences": [["pool", "view"]]})");
	NormalizationConfig rules;
	rules.min_frequency = 2;
	auto c = load_corpus(in, CorpusFormat::Tokenized, rules);
	EXPECT_EQ(c.vocabulary.size(), 2u);
	EXPECT_EQ(c.documents[0].sentences.size(), 1u);
	EXPECT_FALSE(c.vocabulary.find("rare").has_value());
}

TEST(Partition, SizesFollowAttributes) {
	auto c = fixtures::make_corpus({{"d1", "X", 5, {{"a"}, {"b"}, {"c"}}}, {"d2", "Y", 1, {{"a"}, {"d"}}}});
	auto parts = partition_by_attribute(c);
	ASSERT_EQ(parts.size(), 2u);
	EXPECT_EQ(parts[*c.attributes.find("X")].size(), 3u);
	EXPECT_EQ(parts[*c.attributes.find("Y")].size(), 2u);
}

TEST(Partition, SingleAttributeHoldsEverySentence) {
	auto c = fixtures::make_corpus({{"d1", "X", 5, {{"a"}, {"b"}}}, {"d2", "X", 1, {{"a"}}}});
	auto parts = partition_by_attribute(c);
	ASSERT_EQ(parts.size(), 1u);
	EXPECT_EQ(parts[0], (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Partition, SevenCitiesGiveSevenPartitions) {
	std::vector<fixtures::DocSpec> docs;
	const std::vector<std::string> cities = {"Boston", "Chicago", "Honolulu", "Las Vegas", "Los Angeles", "New York", "San Francisco"};
	for (std::size_t k = 0; k < 14; ++k) docs.push_back({"d" + std::to_string(k), cities[k % 7], 3, {{"room"}}});
	EXPECT_EQ(partition_by_attribute(fixtures::make_corpus(docs)).size(), 7u);
}

TEST(SplitCorpus, StratifiedAndSharesVocabulary) {
	std::vector<fixtures::DocSpec> docs;
	for (std::size_t k = 0; k < 20; ++k) docs.push_back({"d" + std::to_string(k), k % 2 ? "X" : "Y", 3, {{"w" + std::to_string(k)}}});
	auto c = fixtures::make_corpus(docs);
	std::mt19937_64 rng(3);
	auto [train, test] = split_corpus(c, 0.2, rng);
	EXPECT_EQ(train.documents.size(), 16u);
	EXPECT_EQ(test.documents.size(), 4u);
	EXPECT_EQ(train.vocabulary.terms(), c.vocabulary.terms());
	EXPECT_NO_THROW(train.validate());
	EXPECT_NO_THROW(test.validate());
}

TEST(ReindexCorpus, DropsUnknownWordsAndEmptiedDocuments) {
	auto c = fixtures::make_corpus({{"d1", "X", 5, {{"pool", "zzz"}, {"zzz"}}}, {"d2", "X", 1, {{"yyy"}}}});
	std::size_t dropped = 0;
	auto r = reindex_corpus(c, {"view", "pool"}, {"Y", "X"}, &dropped);
	EXPECT_EQ(dropped, 1u);
	ASSERT_EQ(r.documents.size(), 1u);
	EXPECT_EQ(r.documents[0].attribute, 1u);
	ASSERT_EQ(r.documents[0].sentences.size(), 1u);
	EXPECT_EQ(r.documents[0].sentences[0].words, std::vector<WordId>{1});
	EXPECT_NO_THROW(r.validate());
	EXPECT_THROW(reindex_corpus(c, {"pool"}, {"Y"}), ValidationError);
}
