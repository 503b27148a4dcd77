#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace charm {

inline constexpr std::size_t kMaxTokens = 77;
inline constexpr std::size_t kTextDim = 64;

struct ByteSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    bool operator==(const ByteSpan&) const = default;
};

struct Token {
    std::size_t index = 0;
    std::string text;
    ByteSpan span;
    bool is_stopword = false;

    bool is_punctuation() const noexcept;

    bool operator==(const Token&) const = default;
};

struct Prompt {
    std::string raw;
    std::vector<Token> tokens;

    std::size_t size() const noexcept { return tokens.size(); }
    bool operator==(const Prompt&) const = default;
};

using StopWords = std::set<std::string, std::less<>>;

/// Bundled stop-word list. data/stopwords.txt mirrors it.
const StopWords& default_stopwords();

/// One word per line, '#' starts a comment, blank lines ignored.
StopWords load_stopwords(const std::filesystem::path& path);

/// Splits on whitespace and ASCII punctuation; each punctuation byte becomes
/// its own token. Throws InvalidUtf8. No length limit (corpus mining path).
std::vector<Token> split_tokens(std::string_view raw, const StopWords& stopwords);

/// split_tokens plus the N_max limit. Throws TooLong.
Prompt tokenize(std::string_view raw, const StopWords& stopwords = default_stopwords());

/// Token texts joined by single spaces.
std::string join_tokens(std::span<const Token> tokens);

/// Row-major kMaxTokens x kTextDim matrix. Rows >= valid_len are zero.
struct TextEmbedding {
    std::vector<double> values = std::vector<double>(kMaxTokens * kTextDim, 0.0);
    std::size_t valid_len = 0;

    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * kTextDim, kTextDim};
    }
    bool operator==(const TextEmbedding&) const = default;

    static TextEmbedding zeros() { return {}; }
};

using Vector = std::vector<double>;

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Deterministic stand-in for a learned text encoder. Immutable after
/// construction and safe to share across threads.
class TextEncoder {
public:
    explicit TextEncoder(std::uint64_t seed = 0, StopWords stopwords = default_stopwords());

    std::uint64_t seed() const noexcept { return seed_; }
    const StopWords& stopwords() const noexcept { return stopwords_; }

    Prompt tokenize(std::string_view raw) const { return charm::tokenize(raw, stopwords_); }

    /// Position-free embedding of one token's text.
    Vector token_embedding(std::string_view text) const;

    /// Base token embedding plus sinusoidal position; padding rows zero.
    TextEmbedding encode(const Prompt& prompt) const;

    /// Mean of the phrase's token embeddings (no positional term).
    /// Throws EmptyPhrase.
    Vector embed_phrase(std::string_view phrase) const;

private:
    std::uint64_t seed_;
    StopWords stopwords_;
};

/// Sinusoidal position code of length kTextDim.
Vector positional_encoding(std::size_t position);

}  // namespace charm
