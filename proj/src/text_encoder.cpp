#include "charm/text_encoder.hpp"

#include <cmath>
#include <fstream>

#include "charm/error.hpp"
#include "charm/random.hpp"

namespace charm {

namespace {

// Version 1 of the bundled list. Keep data/stopwords.txt in sync.
constexpr std::string_view kStopwords[] = {
    "a",       "about",   "above",   "after",   "again",   "against", "all",     "am",
    "an",      "and",     "any",     "are",     "as",      "at",      "be",      "because",
    "been",    "before",  "being",   "below",   "between", "both",    "but",     "by",
    "can",     "could",   "did",     "do",      "does",    "doing",   "down",    "during",
    "each",    "few",     "for",     "from",    "further", "had",     "has",     "have",
    "having",  "he",      "her",     "here",    "hers",    "herself", "him",     "himself",
    "his",     "how",     "i",       "if",      "in",      "into",    "is",      "it",
    "its",     "itself",  "just",    "me",      "more",    "most",    "my",      "myself",
    "no",      "nor",     "not",     "now",     "of",      "off",     "on",      "once",
    "only",    "or",      "other",   "our",     "ours",    "ourselves", "out",   "over",
    "own",     "same",    "she",     "should",  "so",      "some",    "such",    "than",
    "that",    "the",     "their",   "theirs",  "them",    "themselves", "then", "there",
    "these",   "they",    "this",    "those",   "through", "to",      "too",     "under",
    "until",   "up",      "very",    "was",     "we",      "were",    "what",    "when",
    "where",   "which",   "while",   "who",     "whom",    "why",     "will",    "with",
    "would",   "you",     "your",    "yours",   "yourself", "yourselves",
};

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
    return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
           (c >= 0x7b && c <= 0x7e);
}

char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xe0) == 0xc0) {
            len = 2;
            cp = c & 0x1f;
        } else if ((c & 0xf0) == 0xe0) {
            len = 3;
            cp = c & 0x0f;
        } else if ((c & 0xf8) == 0xf0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3f);
        }
        // overlong forms, surrogates, out of range
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff))
            return false;
        i += len;
    }
    return true;
}

}  // namespace

bool Token::is_punctuation() const noexcept {
    return text.size() == 1 && is_ascii_punct(static_cast<unsigned char>(text[0]));
}

const StopWords& default_stopwords() {
    static const StopWords words(std::begin(kStopwords), std::end(kStopwords));
    return words;
}

StopWords load_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stop-word list: " + path.string());
    StopWords out;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::size_t b = 0, e = line.size();
        while (b < e && is_space(static_cast<unsigned char>(line[b]))) ++b;
        while (e > b && is_space(static_cast<unsigned char>(line[e - 1]))) --e;
        if (b == e) continue;
        std::string word = line.substr(b, e - b);
        for (auto& c : word) c = ascii_lower(c);
        out.insert(std::move(word));
    }
    return out;
}

std::vector<Token> split_tokens(std::string_view raw, const StopWords& stopwords) {
    if (!valid_utf8(raw)) throw InvalidUtf8("prompt is not valid UTF-8");

    std::vector<Token> tokens;
    auto emit = [&](std::size_t b, std::size_t e) {
        Token t;
        t.index = tokens.size();
        t.span = {b, e};
        t.text.reserve(e - b);
        for (std::size_t i = b; i < e; ++i) t.text.push_back(ascii_lower(raw[i]));
        t.is_stopword = stopwords.contains(t.text);
        tokens.push_back(std::move(t));
    };

    std::size_t i = 0;
    while (i < raw.size()) {
        const auto c = static_cast<unsigned char>(raw[i]);
        if (is_space(c)) {
            ++i;
        } else if (is_ascii_punct(c)) {
            emit(i, i + 1);
            ++i;
        } else {
            const std::size_t start = i;
            while (i < raw.size()) {
                const auto d = static_cast<unsigned char>(raw[i]);
                if (is_space(d) || is_ascii_punct(d)) break;
                ++i;
            }
            emit(start, i);
        }
    }
    return tokens;
}

Prompt tokenize(std::string_view raw, const StopWords& stopwords) {
    auto tokens = split_tokens(raw, stopwords);
    if (tokens.size() > kMaxTokens)
        throw TooLong("prompt has " + std::to_string(tokens.size()) + " tokens; limit is " +
                      std::to_string(kMaxTokens));
    return Prompt{std::string(raw), std::move(tokens)};
}

std::string join_tokens(std::span<const Token> tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t.text;
    }
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("cosine of vectors with different lengths");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

Vector positional_encoding(std::size_t position) {
    Vector pe(kTextDim);
    const double pos = static_cast<double>(position);
    for (std::size_t i = 0; i < kTextDim / 2; ++i) {
        const double freq =
            std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(kTextDim));
        pe[2 * i] = std::sin(pos * freq);
        pe[2 * i + 1] = std::cos(pos * freq);
    }
    return pe;
}

TextEncoder::TextEncoder(std::uint64_t seed, StopWords stopwords)
    : seed_(seed), stopwords_(std::move(stopwords)) {}

Vector TextEncoder::token_embedding(std::string_view text) const {
    SplitMix64 rng(combine_seed(fnv1a64(text), seed_));
    Vector v(kTextDim);
    for (auto& x : v) x = rng.standard();
    return v;
}

TextEmbedding TextEncoder::encode(const Prompt& prompt) const {
    TextEmbedding emb;
    emb.valid_len = prompt.tokens.size();
    for (std::size_t r = 0; r < prompt.tokens.size(); ++r) {
        const auto base = token_embedding(prompt.tokens[r].text);
        const auto pos = positional_encoding(r);
        double* row = emb.values.data() + r * kTextDim;
        for (std::size_t k = 0; k < kTextDim; ++k) row[k] = base[k] + pos[k];
    }
    return emb;
}

Vector TextEncoder::embed_phrase(std::string_view phrase) const {
    const auto tokens = split_tokens(phrase, stopwords_);
    if (tokens.empty()) throw EmptyPhrase("phrase has no tokens");
    Vector mean(kTextDim, 0.0);
    for (const auto& t : tokens) {
        const auto e = token_embedding(t.text);
        for (std::size_t k = 0; k < kTextDim; ++k) mean[k] += e[k];
    }
    const double n = static_cast<double>(tokens.size());
    for (auto& x : mean) x /= n;
    return mean;
}

}  // namespace charm
