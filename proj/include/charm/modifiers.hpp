#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "charm/text_encoder.hpp"

namespace charm {

struct PromptRecord {
    std::int64_t id = 0;
    std::string text;
    std::optional<std::string> image_path;

    bool operator==(const PromptRecord&) const = default;
};

using Corpus = std::vector<PromptRecord>;

/// Newline-delimited prompts (ids are 0-based line numbers of non-blank
/// lines) or, for *.csv files, a header row "id,text,image_path" followed by
/// RFC 4180 records. Throws ParseError / IoError.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus_lines(std::string_view text);
Corpus parse_corpus_csv(std::string_view text);

struct ModifierEntry {
    std::string phrase;
    std::size_t n = 0;
    std::size_t frequency = 0;
    Vector embedding;

    bool operator==(const ModifierEntry&) const = default;
};

/// Entries sorted by (frequency desc, phrase asc). Immutable once built.
class ModifierCatalog {
public:
    ModifierCatalog() = default;
    /// Sorts the entries and builds the phrase index. Duplicate phrases are
    /// rejected with ParseError.
    ModifierCatalog(std::vector<ModifierEntry> entries, std::string corpus_ref = {},
                    std::uint64_t encoder_seed = 0);

    const std::vector<ModifierEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::string& corpus_ref() const noexcept { return corpus_ref_; }
    std::uint64_t encoder_seed() const noexcept { return encoder_seed_; }
    const ModifierEntry* find(std::string_view phrase) const;

private:
    std::vector<ModifierEntry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::string corpus_ref_;
    std::uint64_t encoder_seed_ = 0;
};

struct MiningOptions {
    std::size_t min_freq = 2;
    std::size_t top_k = 500;
    /// Count a gram at most once per prompt instead of once per occurrence.
    bool once_per_prompt = false;
};

/// Every 1/2/3-gram of consecutive tokens that does not cross punctuation
/// and is not made only of stop words, keyed by its space-joined text.
std::map<std::string, std::size_t> count_ngrams(const Corpus& corpus, const StopWords& stopwords,
                                                bool once_per_prompt = false);

/// Throws InvalidConfig when min_freq or top_k is 0.
ModifierCatalog mine(const Corpus& corpus, const TextEncoder& encoder, const MiningOptions& options = {},
                     std::string corpus_ref = {});

/// Prompts containing every keyword token, ranked by how many keyword-token
/// occurrences they contain (desc), then id (asc). Throws EmptyQuery.
std::vector<PromptRecord> search(const Corpus& corpus, std::string_view keywords,
                                 const StopWords& stopwords = default_stopwords());

struct ScoredModifier {
    const ModifierEntry* entry = nullptr;
    double distance = 0.0;  // cosine distance to the query
};

/// k entries closest to the phrase by cosine distance, excluding an exact
/// phrase match. Ties: frequency desc, phrase asc. Throws EmptyPhrase.
std::vector<ScoredModifier> similar(const ModifierCatalog& catalog, const TextEncoder& encoder,
                                    std::string_view phrase, std::size_t k = 3);
/// k entries farthest from the phrase. Same tie-break.
std::vector<ScoredModifier> dissimilar(const ModifierCatalog& catalog, const TextEncoder& encoder,
                                       std::string_view phrase, std::size_t k = 3);

nlohmann::json to_json(const ModifierEntry& entry);
nlohmann::json to_json(const PromptRecord& record);

/// Writes `<path>` (JSON) and `<path minus extension>.chex` (embeddings).
void save_catalog(const ModifierCatalog& catalog, const std::filesystem::path& path);
/// Reads both files back. Throws IoError / ParseError.
ModifierCatalog load_catalog(const std::filesystem::path& path);
std::filesystem::path catalog_sidecar_path(const std::filesystem::path& json_path);

}  // namespace charm
