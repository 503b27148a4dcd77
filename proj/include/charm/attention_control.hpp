#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace charm {

struct Prompt;

inline constexpr double kGammaMin = 0.5;
inline constexpr double kGammaMax = 2.0;

/// Per-token multiplicative factors on cross-attention probabilities.
/// Tokens without an entry keep factor 1.
struct AttentionAdjustment {
    std::map<std::size_t, double> entries;

    bool empty() const noexcept { return entries.empty(); }
    double gamma(std::size_t token) const {
        auto it = entries.find(token);
        return it == entries.end() ? 1.0 : it->second;
    }
    /// One entry per selected token, all with the same factor.
    static AttentionAdjustment for_selection(std::span<const std::size_t> tokens, double gamma);

    bool operator==(const AttentionAdjustment&) const = default;
};

/// Throws IndexOutOfRange or GammaOutOfRange. Bounds are inclusive.
void validate(const AttentionAdjustment& adjustment, const Prompt& prompt);
void validate(const AttentionAdjustment& adjustment, std::size_t token_count);

/// Scales column j of a row-major rows x cols probability matrix by gamma_j
/// for every adjusted j < valid_len. Other columns are untouched and rows
/// are not renormalized. Bounds are not checked here.
void apply_adjustment(std::span<double> matrix, std::size_t rows, std::size_t cols,
                      const AttentionAdjustment& adjustment, std::size_t valid_len);

std::vector<double> apply_adjustment_copy(std::span<const double> matrix, std::size_t rows,
                                          std::size_t cols, const AttentionAdjustment& adjustment,
                                          std::size_t valid_len);

/// {"entries": {"<index>": <gamma>}}
nlohmann::json to_json(const AttentionAdjustment& adjustment);
/// Throws ParseError on malformed documents.
AttentionAdjustment adjustment_from_json(const nlohmann::json& doc);

}  // namespace charm
