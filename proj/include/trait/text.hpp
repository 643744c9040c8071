#pragma once

// Review text normalization: HTML stripping, placeholder substitution,
// abbreviation expansion, sentence splitting, negation merging, stop-word
// removal and stemming.

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "trait/porter_stemmer.hpp"

namespace trait {

inline constexpr std::string_view kLinkPlaceholder = "#LINK#";
inline constexpr std::string_view kMoneyPlaceholder = "#MONEY#";
inline constexpr std::string_view kNumberPlaceholder = "#NUMBER#";
inline constexpr std::string_view kNegationPrefix = "not_";

inline const std::vector<std::string>& default_stop_words() {
	// Standard English function words. Negators are handled separately and
	// sentiment-bearing words (good, best, ...) are deliberately absent.
	static const std::vector<std::string> words = {
		"a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
		"be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
		"did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has",
		"have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if",
		"in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "nor", "now",
		"of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own",
		"same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
		"themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too", "under",
		"until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
		"why", "will", "with", "would", "you", "your", "yours", "yourself", "yourselves", "also", "us",
		"s", "t", "d", "ll", "m", "re", "ve", "etc", "etcetera",
	};
	return words;
}

inline const std::unordered_map<std::string, std::string>& default_abbreviations() {
	static const std::unordered_map<std::string, std::string> map = {
		{"don't", "do not"}, {"doesn't", "does not"}, {"didn't", "did not"}, {"isn't", "is not"},
		{"aren't", "are not"}, {"wasn't", "was not"}, {"weren't", "were not"}, {"won't", "will not"},
		{"wouldn't", "would not"}, {"can't", "can not"}, {"cannot", "can not"}, {"couldn't", "could not"},
		{"shouldn't", "should not"}, {"haven't", "have not"}, {"hasn't", "has not"}, {"hadn't", "had not"},
		{"ain't", "is not"}, {"w/", "with"}, {"w/o", "without"}, {"b/c", "because"}, {"e.g.", "for example"},
		{"i.e.", "that is"}, {"etc.", "etcetera"}, {"mr.", "mister"}, {"mrs.", "missus"}, {"ms.", "miss"},
		{"dr.", "doctor"}, {"st.", "street"}, {"ave.", "avenue"}, {"approx.", "approximately"},
		{"min.", "minutes"}, {"hrs.", "hours"}, {"vs.", "versus"}, {"u.s.", "usa"}, {"a.m.", "am"},
		{"p.m.", "pm"},
	};
	return map;
}

struct NormalizationConfig {
	std::unordered_set<std::string> stop_words{default_stop_words().begin(), default_stop_words().end()};
	std::unordered_map<std::string, std::string> abbreviations = default_abbreviations();
	std::unordered_set<std::string> negators{"no", "not", "nothing"};
	bool stemming = true;
	bool number_placeholders = true;
	std::size_t min_frequency = 1;
};

namespace detail {

inline bool is_placeholder(std::string_view tok) {
	return tok == kLinkPlaceholder || tok == kMoneyPlaceholder || tok == kNumberPlaceholder;
}

inline bool is_negated(std::string_view tok) {
	return tok.size() > kNegationPrefix.size() && tok.starts_with(kNegationPrefix);
}

inline std::string strip_html(std::string_view raw) {
	static const std::regex tag(R"(<[^>]*>)");
	static const std::regex entity(R"(&(nbsp|amp|quot|lt|gt|#39);)");
	std::string s = std::regex_replace(std::string(raw), tag, " ");
	return std::regex_replace(s, entity, " ");
}

inline std::string to_lower_ascii(std::string s) {
	for (auto& c : s) {
		if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
	}
	return s;
}

// Replaces URLs by the link placeholder, keeping trailing sentence punctuation
// outside the match so that boundaries survive.
inline std::string replace_links(const std::string& s) {
	static const std::regex url(R"((https?://|www\.)[^\s<>"]+)");
	std::string out;
	auto begin = std::sregex_iterator(s.begin(), s.end(), url);
	std::size_t last = 0;
	for (auto it = begin; it != std::sregex_iterator(); ++it) {
		const auto& m = *it;
		auto pos = static_cast<std::size_t>(m.position(0));
		std::string matched = m.str(0);
		std::string trail;
		while (!matched.empty() && std::string_view(".,!?;:)]'").find(matched.back()) != std::string_view::npos) {
			trail.insert(trail.begin(), matched.back());
			matched.pop_back();
		}
		out.append(s, last, pos - last);
		out.append(" ").append(kLinkPlaceholder).append(" ").append(trail);
		last = pos + static_cast<std::size_t>(m.length(0));
	}
	out.append(s, last, std::string::npos);
	return out;
}

inline std::string replace_money(const std::string& s) {
	static const std::regex prefixed("(\\$|\xC2\xA3|\xE2\x82\xAC)\\s?\\d[\\d,]*(\\.\\d+)?");
	static const std::regex suffixed(R"(\b\d[\d,]*(\.\d+)?\s?(dollars|dollar|bucks|usd|euros|euro)\b)");
	std::string out = std::regex_replace(s, prefixed, std::string(" ") + std::string(kMoneyPlaceholder) + " ");
	return std::regex_replace(out, suffixed, std::string(" ") + std::string(kMoneyPlaceholder) + " ");
}

inline std::string replace_numbers(const std::string& s) {
	static const std::regex number(R"(\b\d+([.,:]\d+)*\b)");
	return std::regex_replace(s, number, std::string(" ") + std::string(kNumberPlaceholder) + " ");
}

inline std::string expand_abbreviations(const std::string& s, const std::unordered_map<std::string, std::string>& abbr) {
	if (abbr.empty()) return s;
	std::string out;
	out.reserve(s.size());
	std::size_t i = 0;
	while (i < s.size()) {
		if (std::isspace(static_cast<unsigned char>(s[i]))) {
			out.push_back(s[i++]);
			continue;
		}
		std::size_t j = i;
		while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
		std::string chunk = s.substr(i, j - i);
		// Leading and trailing punctuation (other than the abbreviation's own
		// final period) is kept around the expansion.
		std::size_t lead = 0;
		while (lead < chunk.size() && std::string_view("\"'([").find(chunk[lead]) != std::string_view::npos) ++lead;
		std::string core = chunk.substr(lead);
		std::string trail;
		std::string expanded;
		bool found = false;
		while (!core.empty()) {
			if (auto it = abbr.find(core); it != abbr.end()) {
				expanded = it->second;
				found = true;
				break;
			}
			char back = core.back();
			if (std::string_view(".,!?;:)]\"'").find(back) == std::string_view::npos) break;
			trail.insert(trail.begin(), back);
			core.pop_back();
		}
		if (found) {
			out.append(chunk, 0, lead).append(expanded).append(trail);
		} else {
			out.append(chunk);
		}
		i = j;
	}
	return out;
}

inline std::vector<std::string> split_sentences(const std::string& s) {
	std::vector<std::string> out;
	std::string cur;
	for (char c : s) {
		if (c == '.' || c == '!' || c == '?') {
			if (!cur.empty()) out.push_back(std::move(cur));
			cur.clear();
		} else {
			cur.push_back(c);
		}
	}
	if (!cur.empty()) out.push_back(std::move(cur));
	return out;
}

// Word characters: ASCII letters/digits, underscore, and any non-ASCII byte
// (UTF-8 continuation). Apostrophes are dropped inside words.
inline std::vector<std::string> tokenize(const std::string& sentence) {
	std::vector<std::string> tokens;
	std::string cur;
	auto flush = [&] {
		if (!cur.empty()) tokens.push_back(std::move(cur));
		cur.clear();
	};
	for (std::size_t i = 0; i < sentence.size(); ++i) {
		char c = sentence[i];
		auto uc = static_cast<unsigned char>(c);
		if (c == '#') {
			bool placeholder = false;
			for (auto ph : {kLinkPlaceholder, kMoneyPlaceholder, kNumberPlaceholder}) {
				// Text is lowercased before tokenizing, so already-normalized
				// placeholders arrive as "#link#".
				auto span = std::string_view(sentence).substr(i, ph.size());
				if (std::equal(span.begin(), span.end(), ph.begin(), ph.end(),
				               [](char a, char b) { return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b)); })) {
					flush();
					tokens.emplace_back(ph);
					i += ph.size() - 1;
					placeholder = true;
					break;
				}
			}
			if (!placeholder) flush();
		} else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || uc >= 0x80) {
			cur.push_back(c);
		} else if (c == '\'') {
			// drop
		} else {
			flush();
		}
	}
	flush();
	return tokens;
}

inline std::string stem_token(const std::string& tok, bool stemming) {
	if (!stemming || is_placeholder(tok) || is_negated(tok)) return tok;
	return porter_stem(tok);
}

} // namespace detail

/// Normalizes raw review text into sentences of surface tokens. Degenerate
/// input yields an empty list.
inline std::vector<std::vector<std::string>> normalize_text(std::string_view raw, const NormalizationConfig& rules) {
	std::string s = detail::strip_html(raw);
	s = detail::to_lower_ascii(std::move(s));
	s = detail::replace_links(s);
	s = detail::replace_money(s);
	s = detail::expand_abbreviations(s, rules.abbreviations);
	if (rules.number_placeholders) s = detail::replace_numbers(s);

	std::vector<std::vector<std::string>> sentences;
	for (const auto& chunk : detail::split_sentences(s)) {
		auto raw_tokens = detail::tokenize(chunk);

		// Negation merge precedes stop-word removal.
		std::vector<std::string> merged;
		merged.reserve(raw_tokens.size());
		for (std::size_t i = 0; i < raw_tokens.size(); ++i) {
			const auto& tok = raw_tokens[i];
			if (rules.negators.contains(tok) && i + 1 < raw_tokens.size()) {
				const auto& next = raw_tokens[i + 1];
				if (!rules.negators.contains(next) && !detail::is_placeholder(next) && !detail::is_negated(next)) {
					merged.push_back(std::string(kNegationPrefix) + detail::stem_token(next, rules.stemming));
					++i;
					continue;
				}
			}
			merged.push_back(tok);
		}

		std::vector<std::string> kept;
		kept.reserve(merged.size());
		for (auto& tok : merged) {
			if (detail::is_negated(tok) || detail::is_placeholder(tok)) {
				kept.push_back(std::move(tok));
				continue;
			}
			if (rules.negators.contains(tok) || rules.stop_words.contains(tok)) continue;
			auto stemmed = detail::stem_token(tok, rules.stemming);
			if (stemmed.empty() || rules.stop_words.contains(stemmed)) continue;
			kept.push_back(std::move(stemmed));
		}
		if (!kept.empty()) sentences.push_back(std::move(kept));
	}
	return sentences;
}

} // namespace trait
