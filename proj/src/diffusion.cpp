#include "charm/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "charm/error.hpp"
#include "charm/random.hpp"

namespace charm {

namespace {

// Sub-stream tags so each weight tensor draws from its own sequence.
enum class Stream : std::uint64_t {
    latent_in = 1,
    latent_out,
    decoder,
    block_base = 100,
    noise = 0x6e6f697365ULL,
};

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale) {
    SplitMix64 rng(seed);
    Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.standard() * scale;
    return m;
}

std::uint64_t stream_seed(std::uint64_t weight_seed, std::uint64_t tag) {
    return combine_seed(weight_seed, tag);
}

// out (n x k) = a (n x m) * b (m x k); accumulates in ikj order.
void matmul(const double* a, std::size_t n, std::size_t m, const Matrix& b, double* out) {
    const std::size_t k = b.cols;
    std::fill(out, out + n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = out + i * k;
        const double* arow = a + i * m;
        for (std::size_t p = 0; p < m; ++p) {
            const double av = arow[p];
            const double* brow = b.data.data() + p * k;
            for (std::size_t j = 0; j < k; ++j) orow[j] += av * brow[j];
        }
    }
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Solves the small dense system a x = b in place (Gauss-Jordan, partial pivot).
Matrix solve(Matrix a, Matrix b) {
    const std::size_t n = a.rows;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (a(pivot, col) == 0.0) throw InvalidConfig("decoder matrix is rank deficient");
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(pivot, c));
            for (std::size_t c = 0; c < b.cols; ++c) std::swap(b(col, c), b(pivot, c));
        }
        const double inv = 1.0 / a(col, col);
        for (std::size_t c = 0; c < n; ++c) a(col, c) *= inv;
        for (std::size_t c = 0; c < b.cols; ++c) b(col, c) *= inv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a(r, col) == 0.0) continue;
            const double f = a(r, col);
            for (std::size_t c = 0; c < n; ++c) a(r, c) -= f * a(col, c);
            for (std::size_t c = 0; c < b.cols; ++c) b(r, c) -= f * b(col, c);
        }
    }
    return b;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) t(c, r) = m(r, c);
    return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    matmul(a.data.data(), a.rows, a.cols, b, out.data.data());
    return out;
}

// Moore-Penrose pseudo-inverse of a full-rank 3 x c matrix.
Matrix pseudo_inverse(const Matrix& d) {
    const Matrix dt = transpose(d);
    if (d.cols >= d.rows) {
        // d^T (d d^T)^-1
        Matrix eye(d.rows, d.rows);
        for (std::size_t i = 0; i < d.rows; ++i) eye(i, i) = 1.0;
        return multiply(dt, solve(multiply(d, dt), eye));
    }
    // (d^T d)^-1 d^T
    return solve(multiply(dt, d), dt);
}

std::vector<double> sinusoid(double position, std::size_t dim, double base) {
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
        v[2 * i] = std::sin(position * freq);
        v[2 * i + 1] = std::cos(position * freq);
    }
    return v;
}

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& why) { throw InvalidConfig(why); };
    if (layers < 1) fail("layers must be >= 1");
    if (heads < 1) fail("heads must be >= 1");
    if (steps < 1) fail("steps must be >= 1");
    if (steps > kTrainTimesteps) fail("steps must be <= " + std::to_string(kTrainTimesteps));
    if (latent_h < 2 || latent_w < 2 || latent_c < 2) fail("latent dims must be >= 2");
    if (d_model < 1) fail("d_model must be >= 1");
    if (d_model % heads != 0)
        fail("d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
             std::to_string(heads) + ")");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        fail("betas must satisfy 0 < beta_start <= beta_end < 1");
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"layers", c.layers},         {"heads", c.heads},
            {"latent_h", c.latent_h},     {"latent_w", c.latent_w},
            {"latent_c", c.latent_c},     {"d_model", c.d_model},
            {"steps", c.steps},           {"beta_start", c.beta_start},
            {"beta_end", c.beta_end},     {"weight_seed", c.weight_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("model config must be a JSON object");
    ModelConfig c;
    for (const auto& [key, value] : doc.items()) {
        auto count = [&]() {
            if (!value.is_number_unsigned()) throw ParseError(key + " must be a non-negative integer");
            return value.get<std::size_t>();
        };
        auto real = [&]() {
            if (!value.is_number()) throw ParseError(key + " must be a number");
            return value.get<double>();
        };
        if (key == "layers") c.layers = count();
        else if (key == "heads") c.heads = count();
        else if (key == "latent_h") c.latent_h = count();
        else if (key == "latent_w") c.latent_w = count();
        else if (key == "latent_c") c.latent_c = count();
        else if (key == "d_model") c.d_model = count();
        else if (key == "steps") c.steps = count();
        else if (key == "beta_start") c.beta_start = real();
        else if (key == "beta_end") c.beta_end = real();
        else if (key == "weight_seed") c.weight_seed = value.get<std::uint64_t>();
        else throw ParseError("unknown model config field: " + key);
    }
    return c;
}

DenoiserWeights build_model(const ModelConfig& config) {
    config.validate();
    const std::uint64_t seed = config.weight_seed;
    const std::size_t d = config.d_model;
    const std::size_t c = config.latent_c;
    const double d_scale = 1.0 / std::sqrt(static_cast<double>(d));

    DenoiserWeights w;
    w.config = config;
    w.latent_in = random_matrix(c, d, stream_seed(seed, std::uint64_t(Stream::latent_in)),
                                1.0 / std::sqrt(static_cast<double>(c)));
    w.latent_out = random_matrix(d, c, stream_seed(seed, std::uint64_t(Stream::latent_out)), d_scale);
    w.decoder = random_matrix(3, c, stream_seed(seed, std::uint64_t(Stream::decoder)), 1.5);

    w.blocks.reserve(config.layers);
    for (std::size_t l = 0; l < config.layers; ++l) {
        const std::uint64_t base = std::uint64_t(Stream::block_base) + 16 * l;
        auto s = [&](std::uint64_t k) { return stream_seed(seed, base + k); };
        BlockWeights b;
        const double t_scale = 1.0 / std::sqrt(static_cast<double>(kTextDim));
        b.query = random_matrix(d, d, s(0), d_scale);
        b.key = random_matrix(kTextDim, d, s(1), t_scale);
        b.value = random_matrix(kTextDim, d, s(2), t_scale);
        b.output = random_matrix(d, d, s(3), d_scale);
        b.ff_in = random_matrix(d, d, s(4), d_scale);
        b.ff_out = random_matrix(d, d, s(5), d_scale);
        SplitMix64 bias_rng(s(6));
        b.ff_in_bias.resize(d);
        for (auto& v : b.ff_in_bias) v = 0.1 * bias_rng.standard();
        b.ff_out_bias.resize(d);
        for (auto& v : b.ff_out_bias) v = 0.1 * bias_rng.standard();
        w.blocks.push_back(std::move(b));
    }
    return w;
}

ToyBackbone::ToyBackbone(DenoiserWeights weights) : weights_(std::move(weights)) {
    const auto& cfg = weights_.config;
    cfg.validate();
    // Half of each position code encodes the row, the other half the column.
    const std::size_t d = cfg.d_model;
    const std::size_t half = d / 2;
    positions_ = Matrix(cfg.queries(), d);
    for (std::size_t y = 0; y < cfg.latent_h; ++y) {
        const auto ry = sinusoid(static_cast<double>(y), half, 100.0);
        for (std::size_t x = 0; x < cfg.latent_w; ++x) {
            const auto rx = sinusoid(static_cast<double>(x), d - half, 100.0);
            const std::size_t q = y * cfg.latent_w + x;
            for (std::size_t k = 0; k < half; ++k) positions_(q, k) = ry[k];
            for (std::size_t k = 0; k < d - half; ++k) positions_(q, half + k) = rx[k];
        }
    }
    decoder_pinv_ = pseudo_inverse(weights_.decoder);
}

Latent ToyBackbone::predict_noise(const Latent& x, std::size_t timestep, std::size_t step,
                                  const TextEmbedding& text, AttentionHook* hook) const {
    const auto& cfg = weights_.config;
    if (x.h != cfg.latent_h || x.w != cfg.latent_w || x.c != cfg.latent_c)
        throw DimensionMismatch("latent shape does not match model config");
    if (text.values.size() != kMaxTokens * kTextDim || text.valid_len > kMaxTokens)
        throw DimensionMismatch("text embedding shape does not match encoder");

    const std::size_t nq = cfg.queries();
    const std::size_t d = cfg.d_model;
    const std::size_t nt = kMaxTokens;
    const std::size_t heads = cfg.heads;
    const std::size_t dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    // Feature map: latent lifted to d_model plus position and time codes.
    std::vector<double> feat(nq * d);
    matmul(x.data.data(), nq, cfg.latent_c, weights_.latent_in, feat.data());
    const auto time_code = sinusoid(static_cast<double>(timestep), d, 10000.0);
    for (std::size_t q = 0; q < nq; ++q)
        for (std::size_t k = 0; k < d; ++k) feat[q * d + k] += positions_(q, k) + time_code[k];

    std::vector<double> queries(nq * d), keys(nt * d), values(nt * d);
    std::vector<double> mixed(nq * d), projected(nq * d);
    std::vector<double> hidden(nq * d), ff(nq * d);
    // Padding rows of the embedding are zero, so their keys and values are
    // zero: logits are exactly 0 and they add nothing to the value mix.
    const std::size_t valid = text.valid_len;
    std::vector<double> logits(nq * nt), probs(nq * nt);

    for (std::size_t l = 0; l < weights_.blocks.size(); ++l) {
        const auto& b = weights_.blocks[l];
        matmul(feat.data(), nq, d, b.query, queries.data());
        matmul(text.values.data(), valid, kTextDim, b.key, keys.data());
        matmul(text.values.data(), valid, kTextDim, b.value, values.data());

        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            for (std::size_t q = 0; q < nq; ++q) {
                const double* qv = queries.data() + q * d + off;
                double* lrow = logits.data() + q * nt;
                double row_max = valid < nt ? 0.0 : -INFINITY;
                for (std::size_t j = 0; j < valid; ++j) {
                    const double* kv = keys.data() + j * d + off;
                    double s = 0.0;
                    for (std::size_t k = 0; k < dh; ++k) s += qv[k] * kv[k];
                    lrow[j] = s * inv_sqrt_dh;
                    row_max = std::max(row_max, lrow[j]);
                }
                std::fill(lrow + valid, lrow + nt, 0.0);
                double* prow = probs.data() + q * nt;
                double sum = 0.0;
                for (std::size_t j = 0; j < nt; ++j) {
                    prow[j] = std::exp(lrow[j] - row_max);
                    sum += prow[j];
                }
                const double inv = 1.0 / sum;
                for (std::size_t j = 0; j < nt; ++j) prow[j] *= inv;
            }

            if (hook) hook->on_attention(HookSite{step, l, h, timestep}, nq, nt, probs, logits);

            for (std::size_t q = 0; q < nq; ++q) {
                double* out = mixed.data() + q * d + off;
                std::fill(out, out + dh, 0.0);
                const double* prow = probs.data() + q * nt;
                for (std::size_t j = 0; j < valid; ++j) {
                    const double p = prow[j];
                    const double* vv = values.data() + j * d + off;
                    for (std::size_t k = 0; k < dh; ++k) out[k] += p * vv[k];
                }
            }
        }

        matmul(mixed.data(), nq, d, b.output, projected.data());
        for (std::size_t i = 0; i < nq * d; ++i) feat[i] += projected[i];

        matmul(feat.data(), nq, d, b.ff_in, hidden.data());
        for (std::size_t q = 0; q < nq; ++q)
            for (std::size_t k = 0; k < d; ++k)
                hidden[q * d + k] = std::tanh(hidden[q * d + k] + b.ff_in_bias[k]);
        matmul(hidden.data(), nq, d, b.ff_out, ff.data());
        for (std::size_t q = 0; q < nq; ++q)
            for (std::size_t k = 0; k < d; ++k) feat[q * d + k] += ff[q * d + k] + b.ff_out_bias[k];
    }

    Latent eps(cfg.latent_h, cfg.latent_w, cfg.latent_c);
    matmul(feat.data(), nq, d, weights_.latent_out, eps.data.data());
    return eps;
}

RgbImage ToyBackbone::decode(const Latent& latent) const {
    const auto& cfg = weights_.config;
    if (latent.h != cfg.latent_h || latent.w != cfg.latent_w || latent.c != cfg.latent_c ||
        latent.data.size() != latent.h * latent.w * latent.c)
        throw DimensionMismatch("latent shape does not match model config");

    RgbImage img(cfg.img_w(), cfg.img_h());
    const auto& dec = weights_.decoder;
    for (std::size_t y = 0; y < latent.h; ++y) {
        for (std::size_t x = 0; x < latent.w; ++x) {
            const double* z = latent.data.data() + (y * latent.w + x) * latent.c;
            std::uint8_t rgb[3];
            for (std::size_t ch = 0; ch < 3; ++ch) {
                double s = 0.0;
                for (std::size_t k = 0; k < latent.c; ++k) s += dec(ch, k) * z[k];
                const long v = std::lround(255.0 * logistic(s));
                rgb[ch] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
            }
            for (std::size_t py = y * kUpsample; py < (y + 1) * kUpsample; ++py)
                for (std::size_t px = x * kUpsample; px < (x + 1) * kUpsample; ++px)
                    for (std::size_t ch = 0; ch < 3; ++ch) img.at(px, py, ch) = rgb[ch];
        }
    }
    return img;
}

Latent ToyBackbone::encode(const RgbImage& image) const {
    const auto& cfg = weights_.config;
    if (image.empty()) throw EmptyImage("cannot encode an empty image");
    if (image.width != cfg.img_w() || image.height != cfg.img_h() ||
        image.data.size() != image.width * image.height * 3)
        throw DimensionMismatch("image is " + std::to_string(image.width) + "x" +
                                std::to_string(image.height) + ", model expects " +
                                std::to_string(cfg.img_w()) + "x" + std::to_string(cfg.img_h()));

    constexpr double lo = 0.5 / 255.0;
    constexpr double hi = 254.5 / 255.0;
    Latent z(cfg.latent_h, cfg.latent_w, cfg.latent_c);
    const double inv_area = 1.0 / static_cast<double>(kUpsample * kUpsample);
    for (std::size_t y = 0; y < cfg.latent_h; ++y) {
        for (std::size_t x = 0; x < cfg.latent_w; ++x) {
            double u[3] = {0.0, 0.0, 0.0};
            for (std::size_t py = y * kUpsample; py < (y + 1) * kUpsample; ++py)
                for (std::size_t px = x * kUpsample; px < (x + 1) * kUpsample; ++px)
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        const double p = std::clamp(image.at(px, py, ch) / 255.0, lo, hi);
                        u[ch] += std::log(p / (1.0 - p));
                    }
            double* out = z.data.data() + (y * cfg.latent_w + x) * cfg.latent_c;
            for (std::size_t k = 0; k < cfg.latent_c; ++k) {
                double s = 0.0;
                for (std::size_t ch = 0; ch < 3; ++ch) s += decoder_pinv_(k, ch) * u[ch] * inv_area;
                out[k] = s;
            }
        }
    }
    return z;
}

const AttentionRecord* AttentionTrace::find(std::size_t step, std::size_t layer,
                                            std::size_t head) const {
    for (const auto& r : records)
        if (r.step == step && r.layer == layer && r.head == head) return &r;
    return nullptr;
}

Latent initial_noise(const ModelConfig& config, std::uint64_t seed) {
    Latent z(config.latent_h, config.latent_w, config.latent_c);
    SplitMix64 rng(combine_seed(seed, std::uint64_t(Stream::noise)));
    for (auto& v : z.data) v = rng.standard();
    return z;
}

std::vector<double> alphas_cumprod(const ModelConfig& config) {
    std::vector<double> out(kTrainTimesteps);
    double prod = 1.0;
    const double n = static_cast<double>(kTrainTimesteps - 1);
    for (std::size_t t = 0; t < kTrainTimesteps; ++t) {
        const double beta =
            config.beta_start + (config.beta_end - config.beta_start) * static_cast<double>(t) / n;
        prod *= 1.0 - beta;
        out[t] = prod;
    }
    return out;
}

std::vector<std::size_t> sampling_timesteps(const ModelConfig& config) {
    const std::size_t stride = kTrainTimesteps / config.steps;
    std::vector<std::size_t> ts(config.steps);
    for (std::size_t i = 0; i < config.steps; ++i) ts[i] = (config.steps - 1 - i) * stride;
    return ts;
}

namespace {

class SamplerHook final : public AttentionHook {
public:
    SamplerHook(const AttentionAdjustment* adjustment, std::size_t valid_len, AttentionTrace* trace,
                bool keep_logits)
        : adjustment_(adjustment && !adjustment->empty() ? adjustment : nullptr),
          valid_len_(valid_len),
          trace_(trace),
          keep_logits_(keep_logits) {}

    void on_attention(const HookSite& site, std::size_t rows, std::size_t cols,
                      std::span<double> probs, std::span<const double> logits) override {
        AttentionRecord* rec = nullptr;
        if (trace_) {
            rec = &trace_->records.emplace_back();
            rec->step = site.step;
            rec->layer = site.layer;
            rec->head = site.head;
            rec->rows = rows;
            rec->cols = cols;
            rec->probs.assign(probs.begin(), probs.end());
            if (keep_logits_) rec->logits.assign(logits.begin(), logits.end());
        }
        if (adjustment_) {
            apply_adjustment(probs, rows, cols, *adjustment_, valid_len_);
            if (rec) rec->adjusted.assign(probs.begin(), probs.end());
        }
    }

private:
    const AttentionAdjustment* adjustment_;
    std::size_t valid_len_;
    AttentionTrace* trace_;
    bool keep_logits_;
};

}  // namespace

Latent run_sampler(const Backbone& model, const TextEmbedding& embedding, Latent x,
                   std::span<const std::size_t> timesteps, const AttentionAdjustment* adjustment,
                   AttentionTrace* trace, bool keep_logits,
                   const std::function<void(std::size_t, double, Latent&)>& after_step) {
    const auto& cfg = model.config();
    const auto abar = alphas_cumprod(cfg);
    const std::size_t stride = kTrainTimesteps / cfg.steps;
    SamplerHook hook(adjustment, embedding.valid_len, trace, keep_logits);
    const bool need_hook = trace != nullptr || (adjustment && !adjustment->empty());

    for (std::size_t i = 0; i < timesteps.size(); ++i) {
        const std::size_t t = timesteps[i];
        const Latent eps = model.predict_noise(x, t, i, embedding, need_hook ? &hook : nullptr);
        const double a_t = abar[t];
        const double a_prev = t >= stride ? abar[t - stride] : 1.0;
        const double sa_t = std::sqrt(a_t);
        const double s1a_t = std::sqrt(1.0 - a_t);
        const double sa_prev = std::sqrt(a_prev);
        const double s1a_prev = std::sqrt(1.0 - a_prev);
        for (std::size_t k = 0; k < x.data.size(); ++k) {
            double x0 = (x.data[k] - s1a_t * eps.data[k]) / sa_t;
            x0 = std::clamp(x0, -1.0, 1.0);
            x.data[k] = sa_prev * x0 + s1a_prev * eps.data[k];
        }
        if (after_step) after_step(i, a_prev, x);
    }
    return x;
}

GenerationResult generate(const Backbone& model, const TextEmbedding& embedding,
                          std::uint64_t seed, const AttentionAdjustment* adjustment,
                          TraceOptions trace) {
    const auto& cfg = model.config();
    GenerationResult result;
    if (trace.enabled) {
        result.trace.emplace();
        result.trace->steps = cfg.steps;
        result.trace->layers = cfg.layers;
        result.trace->heads = cfg.heads;
        result.trace->records.reserve(cfg.steps * cfg.layers * cfg.heads);
    }
    const auto ts = sampling_timesteps(cfg);
    result.latent = run_sampler(model, embedding, initial_noise(cfg, seed), ts, adjustment,
                                result.trace ? &*result.trace : nullptr, trace.keep_logits);
    result.image.rgb = model.decode(result.latent);
    result.image.seed = seed;
    if (adjustment) result.image.adjustment = *adjustment;
    return result;
}

RgbImage decode_latent(const Backbone& model, const Latent& latent) { return model.decode(latent); }

}  // namespace charm
