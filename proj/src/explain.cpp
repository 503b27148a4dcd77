#include "charm/explain.hpp"

#include <algorithm>
#include <cmath>

#include "charm/error.hpp"

namespace charm {

std::vector<double> bilinear_upsample(const std::vector<double>& src, std::size_t src_h,
                                      std::size_t src_w, std::size_t dst_h, std::size_t dst_w) {
    if (src.size() != src_h * src_w) throw DimensionMismatch("source map has wrong size");
    std::vector<double> out(dst_h * dst_w);
    const double sy = static_cast<double>(src_h) / static_cast<double>(dst_h);
    const double sx = static_cast<double>(src_w) / static_cast<double>(dst_w);
    for (std::size_t y = 0; y < dst_h; ++y) {
        const double fy = std::max(0.0, (static_cast<double>(y) + 0.5) * sy - 0.5);
        const auto y0 = std::min(static_cast<std::size_t>(fy), src_h - 1);
        const auto y1 = std::min(y0 + 1, src_h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < dst_w; ++x) {
            const double fx = std::max(0.0, (static_cast<double>(x) + 0.5) * sx - 0.5);
            const auto x0 = std::min(static_cast<std::size_t>(fx), src_w - 1);
            const auto x1 = std::min(x0 + 1, src_w - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = src[y0 * src_w + x0] * (1.0 - wx) + src[y0 * src_w + x1] * wx;
            const double bot = src[y1 * src_w + x0] * (1.0 - wx) + src[y1 * src_w + x1] * wx;
            out[y * dst_w + x] = top * (1.0 - wy) + bot * wy;
        }
    }
    return out;
}

Explanation aggregate(const AttentionTrace& trace, std::size_t token_count,
                      const ModelConfig& config) {
    const std::size_t nq = config.queries();
    const std::size_t expected = config.steps * config.layers * config.heads;

    // Every (step, layer, head) must appear exactly once.
    std::vector<const AttentionRecord*> slots(expected, nullptr);
    for (const auto& r : trace.records) {
        if (r.step >= config.steps || r.layer >= config.layers || r.head >= config.heads)
            throw IncompleteTrace("trace record outside the model's step/layer/head grid");
        if (r.rows != nq || r.cols < token_count || r.probs.size() != r.rows * r.cols)
            throw IncompleteTrace("trace record has the wrong shape");
        auto& slot = slots[(r.step * config.layers + r.layer) * config.heads + r.head];
        if (slot) throw IncompleteTrace("duplicate trace record");
        slot = &r;
    }
    for (std::size_t i = 0; i < expected; ++i) {
        if (!slots[i]) {
            const std::size_t head = i % config.heads;
            const std::size_t layer = (i / config.heads) % config.layers;
            const std::size_t step = i / (config.heads * config.layers);
            throw IncompleteTrace("missing trace record for step " + std::to_string(step) +
                                  ", layer " + std::to_string(layer) + ", head " +
                                  std::to_string(head));
        }
    }

    Explanation ex;
    ex.contributions.assign(token_count, std::vector<double>(nq, 0.0));
    for (const auto* r : slots) {
        for (std::size_t q = 0; q < nq; ++q) {
            const double* row = r->probs.data() + q * r->cols;
            for (std::size_t j = 0; j < token_count; ++j) ex.contributions[j][q] += row[j];
        }
    }

    const std::size_t h = config.img_h();
    const std::size_t w = config.img_w();
    double global_max = 0.0;
    ex.heatmaps.reserve(token_count);
    for (std::size_t j = 0; j < token_count; ++j) {
        TokenHeatmap hm{j, h, w,
                        bilinear_upsample(ex.contributions[j], config.latent_h, config.latent_w, h, w)};
        for (double v : hm.values) global_max = std::max(global_max, v);
        ex.heatmaps.push_back(std::move(hm));
    }
    if (global_max > 0.0)
        for (auto& hm : ex.heatmaps)
            for (auto& v : hm.values) v /= global_max;

    double max_mean = 0.0;
    ex.saliencies.reserve(token_count);
    for (const auto& hm : ex.heatmaps) {
        double sum = 0.0;
        for (double v : hm.values) sum += v;
        const double mean = sum / static_cast<double>(hm.values.size());
        max_mean = std::max(max_mean, mean);
        ex.saliencies.push_back({hm.token_index, mean});
    }
    if (max_mean > 0.0)
        for (auto& s : ex.saliencies) s.value /= max_mean;
    return ex;
}

Explanation aggregate(const AttentionTrace& trace, const Prompt& prompt, const ModelConfig& config) {
    return aggregate(trace, prompt.tokens.size(), config);
}

namespace {

bool is_zero(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

SimilarTokens similar_tokens(const Explanation& explanation, std::size_t token, double threshold) {
    if (token >= explanation.contributions.size())
        throw IndexOutOfRange("token " + std::to_string(token) + " not in explanation");
    SimilarTokens out;
    const auto& query = explanation.contributions[token];
    if (is_zero(query)) {
        out.zero_query = true;
        return out;
    }
    for (std::size_t j = 0; j < explanation.contributions.size(); ++j) {
        if (j == token) continue;
        const auto& other = explanation.contributions[j];
        if (is_zero(other)) continue;
        if (cosine_similarity(query, other) >= threshold) out.tokens.push_back(j);
    }
    return out;
}

ChexBlob heatmaps_to_chex(const Explanation& explanation, const ModelConfig& config) {
    ChexBlob blob;
    blob.count = static_cast<std::uint32_t>(explanation.heatmaps.size());
    blob.height = static_cast<std::uint32_t>(config.img_h());
    blob.width = static_cast<std::uint32_t>(config.img_w());
    blob.values.reserve(std::size_t(blob.count) * blob.height * blob.width);
    for (const auto& hm : explanation.heatmaps)
        for (double v : hm.values) blob.values.push_back(static_cast<float>(v));
    return blob;
}

nlohmann::json explanation_summary(const Explanation& explanation, const Prompt& prompt,
                                   const ModelConfig& config, double threshold) {
    if (prompt.tokens.size() != explanation.size())
        throw DimensionMismatch("explanation and prompt disagree on token count");
    nlohmann::json tokens = nlohmann::json::array();
    for (std::size_t j = 0; j < explanation.size(); ++j) {
        const auto sim = similar_tokens(explanation, j, threshold);
        tokens.push_back({{"index", j},
                          {"text", prompt.tokens[j].text},
                          {"saliency", explanation.saliencies[j].value},
                          {"similar", sim.tokens},
                          {"zero_contribution", sim.zero_query}});
    }
    return {{"threshold", threshold},
            {"height", config.img_h()},
            {"width", config.img_w()},
            {"tokens", std::move(tokens)}};
}

}  // namespace charm
