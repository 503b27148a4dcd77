#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "charm/attention_control.hpp"
#include "charm/image.hpp"
#include "charm/text_encoder.hpp"

namespace charm {

/// Pixel upsampling factor between latent grid and image.
inline constexpr std::size_t kUpsample = 4;
/// Length of the training noise schedule the sampler strides through.
inline constexpr std::size_t kTrainTimesteps = 1000;

struct ModelConfig {
    std::size_t layers = 4;
    std::size_t heads = 4;
    std::size_t latent_h = 16;
    std::size_t latent_w = 16;
    std::size_t latent_c = 4;
    std::size_t d_model = 64;
    std::size_t steps = 10;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::uint64_t weight_seed = 0;

    /// Throws InvalidConfig.
    void validate() const;

    std::size_t queries() const noexcept { return latent_h * latent_w; }
    std::size_t img_h() const noexcept { return latent_h * kUpsample; }
    std::size_t img_w() const noexcept { return latent_w * kUpsample; }

    bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
ModelConfig model_config_from_json(const nlohmann::json& doc);

/// Row-major dense matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    bool operator==(const Matrix&) const = default;
};

struct BlockWeights {
    Matrix query;   // d_model x d_model
    Matrix key;     // d_text x d_model
    Matrix value;   // d_text x d_model
    Matrix output;  // d_model x d_model
    Matrix ff_in;   // d_model x d_model
    std::vector<double> ff_in_bias;
    Matrix ff_out;  // d_model x d_model
    std::vector<double> ff_out_bias;

    bool operator==(const BlockWeights&) const = default;
};

struct DenoiserWeights {
    ModelConfig config;
    Matrix latent_in;   // latent_c x d_model
    Matrix latent_out;  // d_model x latent_c
    Matrix decoder;     // 3 x latent_c
    std::vector<BlockWeights> blocks;

    bool operator==(const DenoiserWeights&) const = default;
};

/// Throws InvalidConfig. Fully determined by config.weight_seed.
DenoiserWeights build_model(const ModelConfig& config);

/// latent_h x latent_w grid of latent_c channels, cell-major.
struct Latent {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t c = 0;
    std::vector<double> data;

    Latent() = default;
    Latent(std::size_t h_, std::size_t w_, std::size_t c_) : h(h_), w(w_), c(c_), data(h_ * w_ * c_, 0.0) {}
    bool operator==(const Latent&) const = default;
};

/// Where a hook fires: denoising step (0-based, in sampling order), block,
/// head, and the schedule timestep of that step.
struct HookSite {
    std::size_t step = 0;
    std::size_t layer = 0;
    std::size_t head = 0;
    std::size_t timestep = 0;
};

/// Observation/modification point on every cross-attention head. `probs` is
/// the post-softmax queries x tokens matrix and may be modified in place;
/// the modified matrix is what multiplies the values.
class AttentionHook {
public:
    virtual ~AttentionHook() = default;
    virtual void on_attention(const HookSite& site, std::size_t rows, std::size_t cols,
                              std::span<double> probs, std::span<const double> logits) = 0;
};

/// Denoising network plus latent codec. The samplers only talk to this
/// interface, so a different backbone can be dropped in.
class Backbone {
public:
    virtual ~Backbone() = default;
    virtual const ModelConfig& config() const = 0;

    /// Predicted noise for latent x at a schedule timestep, conditioned on
    /// the text embedding. `hook` may be null.
    virtual Latent predict_noise(const Latent& x, std::size_t timestep, std::size_t step,
                                 const TextEmbedding& text, AttentionHook* hook) const = 0;

    /// Throws DimensionMismatch.
    virtual RgbImage decode(const Latent& latent) const = 0;
    /// Least-squares inverse of decode before quantization.
    virtual Latent encode(const RgbImage& image) const = 0;
};

class ToyBackbone final : public Backbone {
public:
    explicit ToyBackbone(DenoiserWeights weights);
    explicit ToyBackbone(const ModelConfig& config) : ToyBackbone(build_model(config)) {}

    const ModelConfig& config() const override { return weights_.config; }
    const DenoiserWeights& weights() const noexcept { return weights_; }

    Latent predict_noise(const Latent& x, std::size_t timestep, std::size_t step,
                         const TextEmbedding& text, AttentionHook* hook) const override;
    RgbImage decode(const Latent& latent) const override;
    Latent encode(const RgbImage& image) const override;

private:
    DenoiserWeights weights_;
    Matrix positions_;       // queries x d_model
    Matrix decoder_pinv_;    // latent_c x 3
};

/// One traced (step, layer, head) cross-attention record.
struct AttentionRecord {
    std::size_t step = 0;
    std::size_t layer = 0;
    std::size_t head = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> probs;     // pre-adjustment, rows x cols
    std::vector<double> adjusted;  // post-adjustment; empty when no adjustment was active
    std::vector<double> logits;    // scaled scores; empty unless requested

    std::span<const double> effective() const { return adjusted.empty() ? probs : adjusted; }
};

struct AttentionTrace {
    std::size_t steps = 0;
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::vector<AttentionRecord> records;

    const AttentionRecord* find(std::size_t step, std::size_t layer, std::size_t head) const;
};

struct TraceOptions {
    bool enabled = false;
    bool keep_logits = false;
};

struct GeneratedImage {
    RgbImage rgb;
    std::uint64_t seed = 0;
    std::string prompt;
    AttentionAdjustment adjustment;

    bool operator==(const GeneratedImage&) const = default;
};

struct GenerationResult {
    GeneratedImage image;
    std::optional<AttentionTrace> trace;
    Latent latent;
};

/// Seeded N(0,1)-like initial latent.
Latent initial_noise(const ModelConfig& config, std::uint64_t seed);

/// Noise-schedule helpers.
std::vector<double> alphas_cumprod(const ModelConfig& config);
/// Sampling timesteps in order (descending).
std::vector<std::size_t> sampling_timesteps(const ModelConfig& config);

/// Runs the deterministic DDIM loop. The adjustment, when given, is applied
/// at every hook site; tracing never changes the result.
GenerationResult generate(const Backbone& model, const TextEmbedding& embedding,
                          std::uint64_t seed, const AttentionAdjustment* adjustment = nullptr,
                          TraceOptions trace = {});

/// Convenience: decode with the model's fixed decoder.
RgbImage decode_latent(const Backbone& model, const Latent& latent);

/// Low-level sampler shared with inpainting. `after_step(i, alpha_bar, x)`
/// runs after step i has produced x, where alpha_bar is the cumulative alpha
/// of x's noise level (1 after the final step).
Latent run_sampler(const Backbone& model, const TextEmbedding& embedding, Latent x,
                   std::span<const std::size_t> timesteps, const AttentionAdjustment* adjustment,
                   AttentionTrace* trace, bool keep_logits,
                   const std::function<void(std::size_t, double, Latent&)>& after_step = {});

}  // namespace charm
