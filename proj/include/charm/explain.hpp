#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

#include "charm/chex.hpp"
#include "charm/diffusion.hpp"
#include "charm/text_encoder.hpp"

namespace charm {

inline constexpr double kDefaultSimilarityThreshold = 0.7;

struct TokenHeatmap {
    std::size_t token_index = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;  // row-major, >= 0
};

struct TokenSaliency {
    std::size_t token_index = 0;
    double value = 0.0;  // in [0, 1]
};

/// Per-token attribution of a traced generation. One entry per prompt token.
struct Explanation {
    std::vector<TokenHeatmap> heatmaps;
    std::vector<TokenSaliency> saliencies;
    /// Raw per-token attention sums at latent resolution, before upsampling
    /// and normalization.
    std::vector<std::vector<double>> contributions;

    std::size_t size() const noexcept { return heatmaps.size(); }
};

/// Sums each token's pre-adjustment attention column over every
/// (step, layer, head) record, bilinearly upsamples the latent-resolution sum
/// to image size, and divides all maps by their joint maximum. Saliency is
/// the mean of each normalized map, rescaled so the largest is 1.
/// Throws IncompleteTrace when any record is missing or malformed.
Explanation aggregate(const AttentionTrace& trace, std::size_t token_count, const ModelConfig& config);
Explanation aggregate(const AttentionTrace& trace, const Prompt& prompt, const ModelConfig& config);

/// Half-pixel-centre bilinear resize (align_corners = false).
std::vector<double> bilinear_upsample(const std::vector<double>& src, std::size_t src_h,
                                      std::size_t src_w, std::size_t dst_h, std::size_t dst_w);

struct SimilarTokens {
    std::vector<std::size_t> tokens;  // ascending
    bool zero_query = false;          // the query token contributed nothing
};

/// Tokens other than `token` whose contribution vectors have cosine
/// similarity >= threshold with it. Throws IndexOutOfRange.
SimilarTokens similar_tokens(const Explanation& explanation, std::size_t token,
                             double threshold = kDefaultSimilarityThreshold);

/// Heatmaps as a float32 CHEX blob (count = tokens, dims = image).
ChexBlob heatmaps_to_chex(const Explanation& explanation, const ModelConfig& config);

/// {"threshold", "height", "width", "tokens": [{index, text, saliency,
/// similar, zero_contribution}]}
nlohmann::json explanation_summary(const Explanation& explanation, const Prompt& prompt,
                                   const ModelConfig& config,
                                   double threshold = kDefaultSimilarityThreshold);

}  // namespace charm
