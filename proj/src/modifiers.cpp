#include "charm/modifiers.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "charm/chex.hpp"
#include "charm/error.hpp"
#include "charm/image.hpp"

namespace charm {

namespace {

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_field = [&]() {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&]() {
        end_field();
        const bool blank = row.size() == 1 && row[0].empty();
        if (!blank) rows.push_back(std::move(row));
        row.clear();
    };
    while (i < text.size()) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                quoted = false;
            } else {
                field.push_back(c);
            }
            ++i;
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n' || c == '\r') {
            end_row();
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else {
            field.push_back(c);
            field_started = true;
        }
        ++i;
    }
    if (quoted) throw ParseError("unterminated quoted CSV field");
    if (field_started || !row.empty()) end_row();
    return rows;
}

std::int64_t parse_id(const std::string& s) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError("corpus id is not an integer: '" + s + "'");
    return v;
}

void check_unique_ids(const Corpus& corpus) {
    std::set<std::int64_t> seen;
    for (const auto& r : corpus)
        if (!seen.insert(r.id).second)
            throw ParseError("duplicate corpus id " + std::to_string(r.id));
}

// Splits a token list into punctuation-free runs.
std::vector<std::vector<const Token*>> segments(const std::vector<Token>& tokens) {
    std::vector<std::vector<const Token*>> out(1);
    for (const auto& t : tokens) {
        if (t.is_punctuation()) {
            if (!out.back().empty()) out.emplace_back();
        } else {
            out.back().push_back(&t);
        }
    }
    if (out.back().empty()) out.pop_back();
    return out;
}

bool entry_order(const ModifierEntry& a, const ModifierEntry& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.phrase < b.phrase;
}

std::vector<ScoredModifier> rank(const ModifierCatalog& catalog, const TextEncoder& encoder,
                                 std::string_view phrase, std::size_t k, bool nearest) {
    const Vector query = encoder.embed_phrase(phrase);
    const std::string normalized = join_tokens(split_tokens(phrase, encoder.stopwords()));
    std::vector<ScoredModifier> scored;
    scored.reserve(catalog.size());
    for (const auto& e : catalog.entries()) {
        if (nearest && e.phrase == normalized) continue;
        scored.push_back({&e, 1.0 - cosine_similarity(query, e.embedding)});
    }
    auto cmp = [nearest](const ScoredModifier& a, const ScoredModifier& b) {
        if (a.distance != b.distance) return nearest ? a.distance < b.distance : a.distance > b.distance;
        return entry_order(*a.entry, *b.entry);
    };
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), cmp);
    scored.resize(take);
    return scored;
}

}  // namespace

Corpus parse_corpus_lines(std::string_view text) {
    Corpus corpus;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const bool blank = line.find_first_not_of(" \t") == std::string_view::npos;
        if (!blank)
            corpus.push_back({static_cast<std::int64_t>(corpus.size()), std::string(line), std::nullopt});
        start = nl + 1;
    }
    return corpus;
}

Corpus parse_corpus_csv(std::string_view text) {
    auto rows = parse_csv_rows(text);
    if (rows.empty()) return {};
    const auto& header = rows.front();
    if (header.size() < 2 || header[0] != "id" || header[1] != "text" ||
        (header.size() >= 3 && header[2] != "image_path") || header.size() > 3)
        throw ParseError("CSV corpus header must be id,text,image_path");
    Corpus corpus;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw ParseError("CSV row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                             " fields, expected " + std::to_string(header.size()));
        PromptRecord rec{parse_id(row[0]), row[1], std::nullopt};
        if (row.size() == 3 && !row[2].empty()) rec.image_path = row[2];
        corpus.push_back(std::move(rec));
    }
    check_unique_ids(corpus);
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    if (path.extension() == ".csv") return parse_corpus_csv(text);
    return parse_corpus_lines(text);
}

ModifierCatalog::ModifierCatalog(std::vector<ModifierEntry> entries, std::string corpus_ref,
                                 std::uint64_t encoder_seed)
    : entries_(std::move(entries)), corpus_ref_(std::move(corpus_ref)), encoder_seed_(encoder_seed) {
    std::sort(entries_.begin(), entries_.end(), entry_order);
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (!index_.emplace(entries_[i].phrase, i).second)
            throw ParseError("duplicate catalog phrase: " + entries_[i].phrase);
}

const ModifierEntry* ModifierCatalog::find(std::string_view phrase) const {
    auto it = index_.find(phrase);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

std::map<std::string, std::size_t> count_ngrams(const Corpus& corpus, const StopWords& stopwords,
                                                bool once_per_prompt) {
    std::map<std::string, std::size_t> counts;
    for (const auto& rec : corpus) {
        const auto tokens = split_tokens(rec.text, stopwords);
        std::set<std::string> seen;
        for (const auto& seg : segments(tokens)) {
            for (std::size_t n = 1; n <= 3; ++n) {
                for (std::size_t i = 0; i + n <= seg.size(); ++i) {
                    bool all_stop = true;
                    std::string gram;
                    for (std::size_t k = i; k < i + n; ++k) {
                        all_stop = all_stop && seg[k]->is_stopword;
                        if (k > i) gram.push_back(' ');
                        gram += seg[k]->text;
                    }
                    if (all_stop) continue;
                    if (once_per_prompt && !seen.insert(gram).second) continue;
                    ++counts[gram];
                }
            }
        }
    }
    return counts;
}

ModifierCatalog mine(const Corpus& corpus, const TextEncoder& encoder, const MiningOptions& options,
                     std::string corpus_ref) {
    if (options.min_freq < 1) throw InvalidConfig("min_freq must be >= 1");
    if (options.top_k < 1) throw InvalidConfig("top_k must be >= 1");
    const auto counts = count_ngrams(corpus, encoder.stopwords(), options.once_per_prompt);

    std::vector<ModifierEntry> entries;
    for (const auto& [phrase, freq] : counts) {
        if (freq < options.min_freq) continue;
        const auto n = static_cast<std::size_t>(std::count(phrase.begin(), phrase.end(), ' ')) + 1;
        entries.push_back({phrase, n, freq, {}});
    }
    std::sort(entries.begin(), entries.end(), entry_order);
    if (entries.size() > options.top_k) entries.resize(options.top_k);
    for (auto& e : entries) e.embedding = encoder.embed_phrase(e.phrase);
    return ModifierCatalog(std::move(entries), std::move(corpus_ref), encoder.seed());
}

std::vector<PromptRecord> search(const Corpus& corpus, std::string_view keywords,
                                 const StopWords& stopwords) {
    std::set<std::string> wanted;
    for (const auto& t : split_tokens(keywords, stopwords))
        if (!t.is_punctuation()) wanted.insert(t.text);
    if (wanted.empty()) throw EmptyQuery("search needs at least one keyword");

    std::vector<std::pair<std::size_t, const PromptRecord*>> hits;
    for (const auto& rec : corpus) {
        std::set<std::string> present;
        std::size_t matches = 0;
        for (const auto& t : split_tokens(rec.text, stopwords)) {
            if (wanted.contains(t.text)) {
                present.insert(t.text);
                ++matches;
            }
        }
        if (present.size() == wanted.size()) hits.emplace_back(matches, &rec);
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->id < b.second->id;
    });
    std::vector<PromptRecord> out;
    out.reserve(hits.size());
    for (const auto& [_, rec] : hits) out.push_back(*rec);
    return out;
}

std::vector<ScoredModifier> similar(const ModifierCatalog& catalog, const TextEncoder& encoder,
                                    std::string_view phrase, std::size_t k) {
    return rank(catalog, encoder, phrase, k, true);
}

std::vector<ScoredModifier> dissimilar(const ModifierCatalog& catalog, const TextEncoder& encoder,
                                       std::string_view phrase, std::size_t k) {
    return rank(catalog, encoder, phrase, k, false);
}

nlohmann::json to_json(const ModifierEntry& entry) {
    return {{"phrase", entry.phrase}, {"n", entry.n}, {"frequency", entry.frequency}};
}

nlohmann::json to_json(const PromptRecord& record) {
    nlohmann::json j{{"id", record.id}, {"text", record.text}};
    j["image_path"] = record.image_path ? nlohmann::json(*record.image_path) : nlohmann::json(nullptr);
    return j;
}

std::filesystem::path catalog_sidecar_path(const std::filesystem::path& json_path) {
    auto p = json_path;
    p.replace_extension(".chex");
    return p;
}

void save_catalog(const ModifierCatalog& catalog, const std::filesystem::path& path) {
    nlohmann::json doc{{"schema_version", 1},
                       {"corpus_ref", catalog.corpus_ref()},
                       {"encoder_seed", catalog.encoder_seed()},
                       {"dim", kTextDim}};
    nlohmann::json entries = nlohmann::json::array();
    ChexBlob blob;
    blob.count = static_cast<std::uint32_t>(catalog.size());
    blob.height = 1;
    blob.width = static_cast<std::uint32_t>(kTextDim);
    for (const auto& e : catalog.entries()) {
        entries.push_back(to_json(e));
        if (e.embedding.size() != kTextDim) throw DimensionMismatch("catalog embedding has wrong size");
        for (double v : e.embedding) blob.values.push_back(static_cast<float>(v));
    }
    doc["entries"] = std::move(entries);
    const std::string text = doc.dump(2) + "\n";
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    write_file(catalog_sidecar_path(path), encode_chex(blob));
}

ModifierCatalog load_catalog(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("catalog JSON: ") + e.what());
    }
    const auto blob = decode_chex(read_file(catalog_sidecar_path(path)));
    try {
        const auto& items = doc.at("entries");
        if (blob.count != items.size() || blob.height != 1 || blob.width != kTextDim)
            throw ParseError("catalog sidecar does not match catalog entries");
        std::vector<ModifierEntry> entries;
        entries.reserve(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) {
            ModifierEntry e;
            e.phrase = items[i].at("phrase").get<std::string>();
            e.n = items[i].at("n").get<std::size_t>();
            e.frequency = items[i].at("frequency").get<std::size_t>();
            e.embedding.assign(blob.values.begin() + static_cast<std::ptrdiff_t>(i * kTextDim),
                               blob.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * kTextDim));
            entries.push_back(std::move(e));
        }
        return ModifierCatalog(std::move(entries), doc.value("corpus_ref", std::string{}),
                               doc.value("encoder_seed", std::uint64_t{0}));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("catalog JSON: ") + e.what());
    }
}

}  // namespace charm
