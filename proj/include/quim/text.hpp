#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace quim {

/// Half-open byte range [start, end) into some text.
struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// Splits text into tokens reported as byte offsets. Chunk windows and prompt
/// budgets are measured in tokens of whichever tokenizer is plugged in.
class TokenizerProvider {
public:
    virtual ~TokenizerProvider() = default;
    virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;
    virtual std::string tokenizer_id() const = 0;

    std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

/// Maximal runs of non-whitespace bytes.
class WhitespaceTokenizer final : public TokenizerProvider {
public:
    std::vector<TokenSpan> tokenize(std::string_view text) const override;
    std::string tokenizer_id() const override { return "whitespace"; }
};

bool is_space(char c) noexcept;
std::string_view trim(std::string_view s) noexcept;
std::string collapse_whitespace(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;

/// Lowercase + collapsed whitespace; the key used for duplicate detection.
std::string normalize_for_match(std::string_view s);

/// Lowercased ASCII-alphanumeric words. Bytes >= 0x80 are kept inside words so
/// UTF-8 text is not split mid-character.
std::vector<std::string> words(std::string_view s);

/// words() minus a short English stopword list and anything under 3 bytes.
std::vector<std::string> content_words(std::string_view s);
bool is_stopword(std::string_view w) noexcept;

/// Split after any terminator character that is followed by whitespace (or
/// ends the text). Pieces are trimmed; empty pieces dropped.
std::vector<std::string> split_sentences(std::string_view text, std::string_view terminators = ".?!");

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace quim
