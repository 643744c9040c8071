#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <trait/embedding.hpp>
#include <trait/graph.hpp>

#include "../support/fixtures.hpp"

using namespace trait;

namespace {

EmbeddingTable table_of(std::uint32_t dim, const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
	EmbeddingTable t(dim);
	for (const auto& [k, v] : rows) t.add(k, v);
	return t;
}

// Corpus of single-word sentences: one document per attribute in `layout`,
// holding the given number of sentences.
Corpus sentences_corpus(const std::vector<std::pair<std::string, std::size_t>>& layout) {
	std::vector<fixtures::DocSpec> docs;
	for (std::size_t d = 0; d < layout.size(); ++d) {
		fixtures::DocSpec doc{"d" + std::to_string(d), layout[d].first, std::nullopt, {}};
		for (std::size_t k = 0; k < layout[d].second; ++k) doc.sentences.push_back({"w"});
		docs.push_back(doc);
	}
	return fixtures::make_corpus(docs);
}

std::vector<std::uint32_t> nbrs(const CorrespondenceGraph& g, std::size_t i) {
	auto s = g.neighbors(i);
	return {s.begin(), s.end()};
}

} // namespace

TEST(Cosine, HandValues) {
	EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 0}), 1.0);
	EXPECT_DOUBLE_EQ(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
	EXPECT_NEAR(cosine_similarity(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 1.0 / std::sqrt(2.0), 1e-9);
	EXPECT_NEAR(cosine_similarity(std::vector<double>{1, 1}, std::vector<double>{1, 0}), 0.7071, 1e-4);
}

TEST(CorrespondenceGraph, RhoOneWithDistinctVectorsHasNoEdges) {
	auto c = sentences_corpus({{"X", 3}});
	auto emb = table_of(2, {{"d0#0", {1, 0}}, {"d0#1", {0, 1}}, {"d0#2", {1, 1}}});
	auto g = build_correspondence_graph(emb, c, 1.0);
	EXPECT_EQ(g.num_edges(), 0u);
}

TEST(CorrespondenceGraph, IdenticalVectorsFormATriangle) {
	auto c = sentences_corpus({{"X", 3}});
	auto emb = table_of(2, {{"d0#0", {1, 2}}, {"d0#1", {1, 2}}, {"d0#2", {1, 2}}});
	auto g = build_correspondence_graph(emb, c, 0.99);
	for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g.neighbors(i).size(), 2u);
	EXPECT_EQ(g.num_edges(), 3u);
}

TEST(CorrespondenceGraph, HandPlacedSixSentenceFixture) {
	// Partition X: s0 (1,0), s1 (0.8,0.6) cos .8, s2 (0,1) cos(s1,s2) .6.
	// Partition Y: s3 (1,1), s4 (1,0.9) cos ~.9986, s5 (-1,0).
	auto c = sentences_corpus({{"X", 3}, {"Y", 3}});
	auto emb = table_of(2, {{"d0#0", {1, 0}}, {"d0#1", {0.8f, 0.6f}}, {"d0#2", {0, 1}},
	                        {"d1#0", {1, 1}}, {"d1#1", {1, 0.9f}}, {"d1#2", {-1, 0}}});
	auto g = build_correspondence_graph(emb, c, 0.7);
	EXPECT_EQ(nbrs(g, 0), (std::vector<std::uint32_t>{1}));
	EXPECT_EQ(nbrs(g, 1), (std::vector<std::uint32_t>{0}));
	EXPECT_TRUE(nbrs(g, 2).empty());
	EXPECT_EQ(nbrs(g, 3), (std::vector<std::uint32_t>{4}));
	EXPECT_EQ(nbrs(g, 4), (std::vector<std::uint32_t>{3}));
	EXPECT_TRUE(nbrs(g, 5).empty());

	// Brute-force all-pairs check.
	auto sentences = c.sentences();
	for (std::size_t i = 0; i < 6; ++i) {
		for (std::size_t j = 0; j < 6; ++j) {
			auto ri = emb.lookup(c.sentence_key(*sentences[i]));
			auto rj = emb.lookup(c.sentence_key(*sentences[j]));
			std::vector<double> u(ri->begin(), ri->end()), v(rj->begin(), rj->end());
			bool same_attr = c.documents[sentences[i]->doc].attribute == c.documents[sentences[j]->doc].attribute;
			bool want = i != j && same_attr && cosine_similarity(u, v) > 0.7;
			auto n = g.neighbors(i);
			EXPECT_EQ(std::find(n.begin(), n.end(), j) != n.end(), want) << i << "," << j;
		}
	}
	EXPECT_NO_THROW(g.validate(c));
}

TEST(CorrespondenceGraph, ThresholdIsStrict) {
	auto c = sentences_corpus({{"X", 2}});
	auto emb = table_of(2, {{"d0#0", {1, 0}}, {"d0#1", {1, 0}}});
	EXPECT_EQ(build_correspondence_graph(emb, c, 1.0).num_edges(), 0u);
}

TEST(CorrespondenceGraph, NoEdgesAcrossAttributes) {
	auto c = sentences_corpus({{"X", 1}, {"Y", 1}});
	auto emb = table_of(2, {{"d0#0", {1, 0}}, {"d1#0", {1, 0}}});
	EXPECT_EQ(build_correspondence_graph(emb, c, 0.5).num_edges(), 0u);
}

TEST(CorrespondenceGraph, MissingEmbeddingIsAnError) {
	auto c = sentences_corpus({{"X", 2}});
	auto emb = table_of(2, {{"d0#0", {1, 0}}});
	EXPECT_THROW(build_correspondence_graph(emb, c, 0.5), ValidationError);
}

TEST(CorrespondenceGraph, ParallelBuildMatchesSerial) {
	std::mt19937_64 rng(5);
	std::normal_distribution<float> n;
	auto c = sentences_corpus({{"X", 40}, {"Y", 30}});
	EmbeddingTable emb(8);
	for (const auto* s : c.sentences()) {
		std::vector<float> v(8);
		for (auto& x : v) x = n(rng);
		emb.add(c.sentence_key(*s), v);
	}
	auto a = build_correspondence_graph(emb, c, 0.2, 1);
	auto b = build_correspondence_graph(emb, c, 0.2, 4);
	ASSERT_EQ(a.num_nodes(), b.num_nodes());
	for (std::size_t i = 0; i < a.num_nodes(); ++i) EXPECT_EQ(nbrs(a, i), nbrs(b, i));
}

TEST(GraphFile, RoundTripAndCorruption) {
	auto c = sentences_corpus({{"X", 3}});
	auto emb = table_of(2, {{"d0#0", {1, 2}}, {"d0#1", {1, 2}}, {"d0#2", {-1, 0}}});
	auto g = build_correspondence_graph(emb, c, 0.7);
	std::stringstream buf;
	write_graph(g, buf);
	auto back = read_graph(buf);
	EXPECT_EQ(back.keys(), g.keys());
	EXPECT_DOUBLE_EQ(back.rho(), 0.7);
	for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(nbrs(back, i), nbrs(g, i));

	std::string bytes;
	{
		std::stringstream b2;
		write_graph(g, b2);
		bytes = b2.str();
	}
	std::string bad = bytes;
	bad[0] = 'X';
	std::istringstream in1(bad);
	EXPECT_THROW(read_graph(in1), FormatError);
	std::istringstream in2(bytes.substr(0, bytes.size() - 3));
	EXPECT_THROW(read_graph(in2), FormatError);
}

TEST(EmbeddingFile, RoundTripAndValidation) {
	auto t = table_of(3, {{"a", {1, 2, 3}}, {"b#0", {0, 0, 1}}});
	std::stringstream buf;
	write_embeddings(t, buf);
	auto back = read_embeddings(buf);
	ASSERT_EQ(back.size(), 2u);
	EXPECT_EQ(back.dimension(), 3u);
	EXPECT_EQ(back.key(1), "b#0");
	EXPECT_FLOAT_EQ((*back.lookup("a"))[2], 3.0f);

	EmbeddingTable bad(2);
	EXPECT_THROW(bad.add("z", std::vector<float>{0, 0}), ValidationError);
	EXPECT_THROW(bad.add("n", std::vector<float>{NAN, 1}), ValidationError);
	EXPECT_THROW(bad.add("w", std::vector<float>{1, 2, 3}), ValidationError);
	bad.add("x", std::vector<float>{1, 0});
	EXPECT_THROW(bad.add("x", std::vector<float>{0, 1}), ValidationError);

	std::string bytes = buf.str();
	std::istringstream trunc(bytes.substr(0, bytes.size() - 2));
	EXPECT_THROW(read_embeddings(trunc), FormatError);
}

TEST(Promotion, WordWithoutCloseNeighborsGetsNothing) {
	auto c = fixtures::make_corpus({{"d", "X", 3, {{"clean", "tidy", "noisy"}}}});
	auto emb = table_of(2, {{"clean", {1, 0}}, {"tidy", {0.9f, 0.1f}}, {"noisy", {-1, 0.2f}}});
	auto p = build_promotion_table(emb, c.vocabulary, PromotionOptions{0.3, 0.5, 10});
	EXPECT_TRUE(p.related(*c.vocabulary.find("noisy")).empty());
	EXPECT_EQ(p.related(*c.vocabulary.find("clean")).size(), 1u);
}

TEST(Promotion, EveryWeightIsEpsilon) {
	auto c = fixtures::make_corpus({{"d", "X", 3, {{"a", "b", "c", "d"}}}});
	auto emb = table_of(2, {{"a", {1, 0}}, {"b", {1, 0.1f}}, {"c", {1, 0.2f}}, {"d", {1, 0.3f}}});
	auto p = build_promotion_table(emb, c.vocabulary, PromotionOptions{0.3, 0.5, 10});
	EXPECT_GT(p.num_pairs(), 0u);
	for (WordId v = 0; v < 4; ++v) {
		for (const auto& e : p.related(v)) EXPECT_EQ(e.weight, 0.3);
	}
}

TEST(Promotion, MatchesBruteForceRanking) {
	auto c = fixtures::make_corpus({{"d", "X", 3, {{"w0", "w1", "w2", "w3"}}}});
	std::vector<std::vector<float>> vecs = {{1, 0, 0}, {0.9f, 0.3f, 0}, {0.7f, 0.7f, 0.1f}, {0.2f, 1, 0}};
	EmbeddingTable emb(3);
	for (WordId v = 0; v < 4; ++v) emb.add(c.vocabulary.term(v), vecs[v]);
	const std::size_t top_k = 2;
	auto p = build_promotion_table(emb, c.vocabulary, PromotionOptions{0.3, 0.5, top_k});
	for (WordId v = 0; v < 4; ++v) {
		std::vector<std::pair<double, WordId>> cands;
		for (WordId u = 0; u < 4; ++u) {
			if (u == v) continue;
			double cs = cosine_similarity(std::vector<double>(vecs[v].begin(), vecs[v].end()),
			                              std::vector<double>(vecs[u].begin(), vecs[u].end()));
			if (cs >= 0.5) cands.emplace_back(cs, u);
		}
		std::sort(cands.begin(), cands.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
		if (cands.size() > top_k) cands.resize(top_k);
		auto got = p.related(v);
		ASSERT_EQ(got.size(), cands.size()) << v;
		for (std::size_t k = 0; k < cands.size(); ++k) {
			EXPECT_EQ(got[k].word, cands[k].second);
			EXPECT_NEAR(got[k].cosine, cands[k].first, 1e-6);
		}
	}
}

TEST(Promotion, RejectsBadOptions) {
	auto c = fixtures::make_corpus({{"d", "X", 3, {{"a"}}}});
	auto emb = table_of(2, {{"a", {1, 0}}});
	EXPECT_THROW(build_promotion_table(emb, c.vocabulary, PromotionOptions{0.0, 0.5, 10}), ValidationError);
	EXPECT_THROW(build_promotion_table(emb, c.vocabulary, PromotionOptions{0.3, 1.5, 10}), ValidationError);
	EXPECT_THROW(build_promotion_table(emb, c.vocabulary, PromotionOptions{0.3, 0.5, 0}), ValidationError);
}
