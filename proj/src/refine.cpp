#include "charm/refine.hpp"

#include <httplib.h>

#include <algorithm>

#include "charm/error.hpp"

namespace charm {

namespace {

bool blank(std::string_view s) {
    return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool contains_run(const std::vector<Token>& hay, const std::vector<Token>& needle) {
    if (needle.empty() || needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < needle.size() && ok; ++k) ok = hay[i + k].text == needle[k].text;
        if (ok) return true;
    }
    return false;
}

struct Endpoint {
    std::string origin;  // scheme://host:port
    std::string path;
};

Endpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ExternalUnavailable("endpoint is not a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string to_string(RefinerStrategy s) {
    return s == RefinerStrategy::heuristic ? "heuristic" : "external";
}

RefinementSuggestion refine_heuristic(std::string_view prompt, const ModifierCatalog& catalog,
                                      const StopWords& stopwords, const RefinerConfig& config) {
    if (blank(prompt)) throw EmptyPrompt("prompt is empty");
    const auto prompt_tokens = split_tokens(prompt, stopwords);

    RefinementSuggestion out;
    out.refined = std::string(prompt);
    out.source = RefinerStrategy::heuristic;
    std::vector<std::vector<Token>> grams;
    for (const auto& entry : catalog.entries()) grams.push_back(split_tokens(entry.phrase, stopwords));

    std::vector<std::size_t> chosen;
    const auto& entries = catalog.entries();
    for (std::size_t i = 0; i < entries.size() && chosen.size() < config.k_append; ++i) {
        if (contains_run(prompt_tokens, grams[i])) continue;
        // A phrase that only ever occurs inside a longer one adds nothing.
        bool subsumed = false;
        for (std::size_t j = 0; j < entries.size() && !subsumed; ++j)
            subsumed = j != i && entries[j].frequency == entries[i].frequency &&
                       grams[j].size() > grams[i].size() && contains_run(grams[j], grams[i]);
        if (subsumed) continue;
        const bool duplicate = std::any_of(chosen.begin(), chosen.end(), [&](std::size_t c) {
            return contains_run(grams[c], grams[i]) || contains_run(grams[i], grams[c]) ||
                   cosine_similarity(entries[c].embedding, entries[i].embedding) > config.duplicate_cosine;
        });
        if (duplicate) continue;
        chosen.push_back(i);
    }
    for (auto c : chosen) {
        out.refined += ", ";
        out.refined += entries[c].phrase;
        out.appended.push_back(entries[c].phrase);
    }
    return out;
}

RefinementSuggestion refine_external(std::string_view prompt, const RefinerConfig& config) {
    if (blank(prompt)) throw EmptyPrompt("prompt is empty");
    if (!config.external_endpoint) throw ExternalUnavailable("no external refiner endpoint configured");
    const auto ep = parse_endpoint(*config.external_endpoint);

    httplib::Client client(ep.origin);
    if (!client.is_valid()) throw ExternalUnavailable("unsupported endpoint: " + *config.external_endpoint);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const nlohmann::json body{{"prompt", std::string(prompt)}};
    auto res = client.Post(ep.path, body.dump(), "application/json");
    if (!res) throw ExternalUnavailable("external refiner: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw ExternalUnavailable("external refiner returned HTTP " + std::to_string(res->status));

    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
        throw ExternalUnavailable("external refiner returned malformed JSON");
    }
    if (!reply.is_object() || !reply.contains("refined") || !reply["refined"].is_string())
        throw ExternalUnavailable("external refiner reply lacks a 'refined' string");

    RefinementSuggestion out;
    out.refined = reply["refined"].get<std::string>();
    out.source = RefinerStrategy::external;
    // When the model only appended, recover the appended modifiers.
    if (out.refined.starts_with(prompt)) {
        std::string_view rest(out.refined);
        rest.remove_prefix(prompt.size());
        std::size_t start = 0;
        while (start <= rest.size()) {
            auto comma = rest.find(',', start);
            if (comma == std::string_view::npos) comma = rest.size();
            const auto piece = trim(rest.substr(start, comma - start));
            if (!piece.empty() &&
                std::find(out.appended.begin(), out.appended.end(), piece) == out.appended.end())
                out.appended.emplace_back(piece);
            start = comma + 1;
        }
    }
    return out;
}

RefinementSuggestion refine(std::string_view prompt, const ModifierCatalog& catalog,
                            const StopWords& stopwords, const RefinerConfig& config) {
    if (config.strategy == RefinerStrategy::external) return refine_external(prompt, config);
    return refine_heuristic(prompt, catalog, stopwords, config);
}

nlohmann::json to_json(const RefinementSuggestion& s) {
    return {{"refined", s.refined}, {"appended", s.appended}, {"source", to_string(s.source)}};
}

}  // namespace charm
