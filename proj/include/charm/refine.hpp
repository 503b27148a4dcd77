#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "charm/modifiers.hpp"
#include "charm/text_encoder.hpp"

namespace charm {

enum class RefinerStrategy { heuristic, external };

struct RefinerConfig {
    RefinerStrategy strategy = RefinerStrategy::heuristic;
    std::size_t k_append = 4;
    std::optional<std::string> external_endpoint;  // e.g. http://host:port/refine
    std::chrono::milliseconds timeout{10000};
    /// Candidates whose embedding is closer than this to an already chosen
    /// modifier are skipped.
    double duplicate_cosine = 0.95;
};

struct RefinementSuggestion {
    std::string refined;
    std::vector<std::string> appended;
    RefinerStrategy source = RefinerStrategy::heuristic;

    bool operator==(const RefinementSuggestion&) const = default;
};

/// Keeps the prompt verbatim and appends up to k_append catalog modifiers,
/// most frequent first. Skips phrases already in the prompt, phrases that
/// only occur inside a longer equally frequent phrase, and phrases that
/// overlap or nearly duplicate a chosen one. Throws EmptyPrompt.
RefinementSuggestion refine_heuristic(std::string_view prompt, const ModifierCatalog& catalog,
                                      const StopWords& stopwords, const RefinerConfig& config);

/// POSTs {"prompt": ...} to the endpoint and expects {"refined": ...}.
/// Throws ExternalUnavailable on transport errors, timeouts, non-200
/// replies, or malformed bodies.
RefinementSuggestion refine_external(std::string_view prompt, const RefinerConfig& config);

/// Dispatches on config.strategy.
RefinementSuggestion refine(std::string_view prompt, const ModifierCatalog& catalog,
                            const StopWords& stopwords, const RefinerConfig& config);

std::string to_string(RefinerStrategy s);
nlohmann::json to_json(const RefinementSuggestion& s);

}  // namespace charm
