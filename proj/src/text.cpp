#include "quim/text.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

namespace quim {

namespace {

constexpr auto kStopwords = std::to_array<std::string_view>({
    "a",    "an",    "as",    "at",   "be",   "by",    "do",    "if",    "in",   "is",    "it",
    "me",   "my",    "no",    "of",   "on",   "or",    "so",    "to",    "up",   "us",    "we",
    "the",  "and",   "for",   "are",  "but",  "not",   "you",   "all",   "any",  "can",   "had",
    "her",  "was",   "one",   "our",  "out",  "has",   "his",   "how",   "its",  "who",   "did",
    "yes",  "she",   "him",   "may",  "what", "when",  "where", "which", "why",  "with",  "this",
    "that", "from",  "they",  "them", "then", "there", "these", "those", "have", "does",  "into",
    "than", "your",  "about", "will", "would", "could", "should", "their", "been", "were", "also",
    "some", "such",  "each",  "more", "most", "other", "being",
});

bool is_word_byte(unsigned char c) noexcept {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<TokenSpan> WhitespaceTokenizer::tokenize(std::string_view text) const {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        if (i >= text.size()) break;
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        out.push_back({start, i});
    }
    return out;
}

std::string_view trim(std::string_view s) noexcept {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : trim(s)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char x = a[i], y = b[i];
        if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
        if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
        if (x != y) return false;
    }
    return true;
}

std::string normalize_for_match(std::string_view s) { return to_lower(collapse_whitespace(s)); }

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool is_stopword(std::string_view w) noexcept {
    return std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end();
}

std::vector<std::string> content_words(std::string_view s) {
    auto all = words(s);
    std::vector<std::string> out;
    for (auto& w : all) {
        if (w.size() >= 3 && !is_stopword(w)) out.push_back(std::move(w));
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text, std::string_view terminators) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (terminators.find(text[i]) == std::string_view::npos) continue;
        if (i + 1 < text.size() && !is_space(text[i + 1])) continue;
        auto piece = trim(text.substr(start, i + 1 - start));
        if (!piece.empty()) out.emplace_back(piece);
        start = i + 1;
    }
    auto tail = trim(text.substr(std::min(start, text.size())));
    if (!tail.empty()) out.emplace_back(tail);
    return out;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) noexcept {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace quim
