#include "charm/attention_control.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "charm/error.hpp"
#include "charm/text_encoder.hpp"

namespace charm {

AttentionAdjustment AttentionAdjustment::for_selection(std::span<const std::size_t> tokens,
                                                       double gamma) {
    AttentionAdjustment a;
    for (auto t : tokens) a.entries[t] = gamma;
    return a;
}

void validate(const AttentionAdjustment& adjustment, std::size_t token_count) {
    for (const auto& [index, gamma] : adjustment.entries) {
        if (index >= token_count)
            throw IndexOutOfRange("token index " + std::to_string(index) + " out of range for " +
                                  std::to_string(token_count) + " tokens");
        // NaN fails both comparisons and lands here too.
        if (!(gamma >= kGammaMin && gamma <= kGammaMax)) {
            std::ostringstream msg;
            msg << "gamma " << gamma << " for token " << index << " outside [" << kGammaMin
                << ", " << kGammaMax << "]";
            throw GammaOutOfRange(msg.str());
        }
    }
}

void validate(const AttentionAdjustment& adjustment, const Prompt& prompt) {
    validate(adjustment, prompt.tokens.size());
}

void apply_adjustment(std::span<double> matrix, std::size_t rows, std::size_t cols,
                      const AttentionAdjustment& adjustment, std::size_t valid_len) {
    if (matrix.size() != rows * cols)
        throw DimensionMismatch("attention matrix has " + std::to_string(matrix.size()) +
                                " entries, expected " + std::to_string(rows * cols));
    const std::size_t limit = std::min(valid_len, cols);
    for (const auto& [col, gamma] : adjustment.entries) {
        if (col >= limit) continue;
        for (std::size_t r = 0; r < rows; ++r) matrix[r * cols + col] *= gamma;
    }
}

std::vector<double> apply_adjustment_copy(std::span<const double> matrix, std::size_t rows,
                                          std::size_t cols, const AttentionAdjustment& adjustment,
                                          std::size_t valid_len) {
    std::vector<double> out(matrix.begin(), matrix.end());
    apply_adjustment(out, rows, cols, adjustment, valid_len);
    return out;
}

nlohmann::json to_json(const AttentionAdjustment& adjustment) {
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [index, gamma] : adjustment.entries) entries[std::to_string(index)] = gamma;
    return {{"entries", entries}};
}

AttentionAdjustment adjustment_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_object())
        throw ParseError("adjustment must be {\"entries\": {...}}");
    AttentionAdjustment a;
    for (const auto& [key, value] : doc["entries"].items()) {
        std::size_t index = 0;
        const auto* first = key.data();
        const auto* last = key.data() + key.size();
        auto [ptr, ec] = std::from_chars(first, last, index);
        if (ec != std::errc{} || ptr != last || key.empty())
            throw ParseError("adjustment key is not a token index: " + key);
        if (!value.is_number()) throw ParseError("gamma for token " + key + " is not a number");
        a.entries[index] = value.get<double>();
    }
    return a;
}

}  // namespace charm
