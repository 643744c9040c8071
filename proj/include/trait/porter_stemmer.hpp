#pragma once

// Porter (1980) suffix-stripping stemmer for lowercase ASCII English words.
// Words containing non-letters or shorter than three characters pass through.

#include <string>
#include <string_view>

namespace trait {

namespace detail {

class PorterStemmer {
public:
	explicit PorterStemmer(std::string word) : b_(std::move(word)) {}

	std::string run() {
		if (b_.size() <= 2) {
			return b_;
		}
		k_ = static_cast<int>(b_.size()) - 1;
		step1ab();
		if (k_ > 0) {
			step1c();
			step2();
			step3();
			step4();
			step5();
		}
		return b_.substr(0, static_cast<std::size_t>(k_ + 1));
	}

private:
	std::string b_;
	int k_ = 0; // end of the current stem (inclusive)
	int j_ = 0; // end of the stem preceding a matched suffix

	bool cons(int i) const {
		switch (b_[static_cast<std::size_t>(i)]) {
		case 'a':
		case 'e':
		case 'i':
		case 'o':
		case 'u':
			return false;
		case 'y':
			return i == 0 ? true : !cons(i - 1);
		default:
			return true;
		}
	}

	// Number of VC sequences in b[0..j].
	int measure() const {
		int n = 0;
		int i = 0;
		while (true) {
			if (i > j_) return n;
			if (!cons(i)) break;
			++i;
		}
		++i;
		while (true) {
			while (true) {
				if (i > j_) return n;
				if (cons(i)) break;
				++i;
			}
			++i;
			++n;
			while (true) {
				if (i > j_) return n;
				if (!cons(i)) break;
				++i;
			}
			++i;
		}
	}

	bool vowel_in_stem() const {
		for (int i = 0; i <= j_; ++i) {
			if (!cons(i)) return true;
		}
		return false;
	}

	bool double_cons(int j) const {
		if (j < 1) return false;
		if (b_[static_cast<std::size_t>(j)] != b_[static_cast<std::size_t>(j - 1)]) return false;
		return cons(j);
	}

	// cvc at i-2..i where the final c is not w, x or y.
	bool cvc(int i) const {
		if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
		char ch = b_[static_cast<std::size_t>(i)];
		return ch != 'w' && ch != 'x' && ch != 'y';
	}

	bool ends(std::string_view s) {
		int len = static_cast<int>(s.size());
		if (len > k_ + 1) return false;
		if (std::string_view(b_).substr(static_cast<std::size_t>(k_ - len + 1), s.size()) != s) return false;
		j_ = k_ - len;
		return true;
	}

	// Writes s over b[j+1..] and moves the end; never exceeds the original
	// buffer because every replacement follows a longer removal.
	void set_to(std::string_view s) {
		for (std::size_t i = 0; i < s.size(); ++i) {
			b_[static_cast<std::size_t>(j_ + 1) + i] = s[i];
		}
		k_ = j_ + static_cast<int>(s.size());
	}

	void replace_if_measured(std::string_view s) {
		if (measure() > 0) set_to(s);
	}

	void step1ab() {
		if (b_[static_cast<std::size_t>(k_)] == 's') {
			if (ends("sses")) {
				k_ -= 2;
			} else if (ends("ies")) {
				set_to("i");
			} else if (b_[static_cast<std::size_t>(k_ - 1)] != 's') {
				--k_;
			}
		}
		if (ends("eed")) {
			if (measure() > 0) --k_;
		} else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
			k_ = j_;
			if (ends("at")) {
				set_to("ate");
			} else if (ends("bl")) {
				set_to("ble");
			} else if (ends("iz")) {
				set_to("ize");
			} else if (double_cons(k_)) {
				char ch = b_[static_cast<std::size_t>(k_)];
				if (ch != 'l' && ch != 's' && ch != 'z') --k_;
			} else {
				j_ = k_;
				if (measure() == 1 && cvc(k_)) set_to("e");
			}
		}
	}

	void step1c() {
		if (ends("y") && vowel_in_stem()) {
			b_[static_cast<std::size_t>(k_)] = 'i';
		}
	}

	void step2() {
		if (k_ < 1) return;
		switch (b_[static_cast<std::size_t>(k_ - 1)]) {
		case 'a':
			if (ends("ational")) { replace_if_measured("ate"); break; }
			if (ends("tional")) { replace_if_measured("tion"); break; }
			break;
		case 'c':
			if (ends("enci")) { replace_if_measured("ence"); break; }
			if (ends("anci")) { replace_if_measured("ance"); break; }
			break;
		case 'e':
			if (ends("izer")) { replace_if_measured("ize"); break; }
			break;
		case 'l':
			if (ends("abli")) { replace_if_measured("able"); break; }
			if (ends("alli")) { replace_if_measured("al"); break; }
			if (ends("entli")) { replace_if_measured("ent"); break; }
			if (ends("eli")) { replace_if_measured("e"); break; }
			if (ends("ousli")) { replace_if_measured("ous"); break; }
			break;
		case 'o':
			if (ends("ization")) { replace_if_measured("ize"); break; }
			if (ends("ation")) { replace_if_measured("ate"); break; }
			if (ends("ator")) { replace_if_measured("ate"); break; }
			break;
		case 's':
			if (ends("alism")) { replace_if_measured("al"); break; }
			if (ends("iveness")) { replace_if_measured("ive"); break; }
			if (ends("fulness")) { replace_if_measured("ful"); break; }
			if (ends("ousness")) { replace_if_measured("ous"); break; }
			break;
		case 't':
			if (ends("aliti")) { replace_if_measured("al"); break; }
			if (ends("iviti")) { replace_if_measured("ive"); break; }
			if (ends("biliti")) { replace_if_measured("ble"); break; }
			break;
		default:
			break;
		}
	}

	void step3() {
		switch (b_[static_cast<std::size_t>(k_)]) {
		case 'e':
			if (ends("icate")) { replace_if_measured("ic"); break; }
			if (ends("ative")) { replace_if_measured(""); break; }
			if (ends("alize")) { replace_if_measured("al"); break; }
			break;
		case 'i':
			if (ends("iciti")) { replace_if_measured("ic"); break; }
			break;
		case 'l':
			if (ends("ical")) { replace_if_measured("ic"); break; }
			if (ends("ful")) { replace_if_measured(""); break; }
			break;
		case 's':
			if (ends("ness")) { replace_if_measured(""); break; }
			break;
		default:
			break;
		}
	}

	void step4() {
		if (k_ < 1) return;
		bool matched = false;
		switch (b_[static_cast<std::size_t>(k_ - 1)]) {
		case 'a': matched = ends("al"); break;
		case 'c': matched = ends("ance") || ends("ence"); break;
		case 'e': matched = ends("er"); break;
		case 'i': matched = ends("ic"); break;
		case 'l': matched = ends("able") || ends("ible"); break;
		case 'n': matched = ends("ant") || ends("ement") || ends("ment") || ends("ent"); break;
		case 'o':
			if (ends("ion") && j_ >= 0 && (b_[static_cast<std::size_t>(j_)] == 's' || b_[static_cast<std::size_t>(j_)] == 't')) {
				matched = true;
			} else {
				matched = ends("ou");
			}
			break;
		case 's': matched = ends("ism"); break;
		case 't': matched = ends("ate") || ends("iti"); break;
		case 'u': matched = ends("ous"); break;
		case 'v': matched = ends("ive"); break;
		case 'z': matched = ends("ize"); break;
		default: break;
		}
		if (matched && measure() > 1) k_ = j_;
	}

	void step5() {
		j_ = k_;
		if (b_[static_cast<std::size_t>(k_)] == 'e') {
			int a = measure();
			if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
		}
		if (b_[static_cast<std::size_t>(k_)] == 'l' && double_cons(k_) && measure() > 1) --k_;
	}
};

} // namespace detail

/// Stems a lowercase word. Tokens containing anything other than a-z are
/// returned unchanged (placeholders, numbers, negation compounds are handled
/// by the caller).
inline std::string porter_stem(std::string_view word) {
	for (char c : word) {
		if (c < 'a' || c > 'z') {
			return std::string(word);
		}
	}
	return detail::PorterStemmer(std::string(word)).run();
}

} // namespace trait
