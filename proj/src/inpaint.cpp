#include "charm/inpaint.hpp"

#include <algorithm>
#include <cmath>

#include "charm/error.hpp"

namespace charm {

Mask rasterize_strokes(const std::vector<Stroke>& strokes, std::size_t width, std::size_t height) {
    Mask mask(width, height);
    for (const auto& s : strokes) {
        if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.r) || !(s.r > 0.0))
            throw InvalidStroke("stroke radius must be positive and coordinates finite");
        const double r2 = s.r * s.r;
        const auto lo = [](double v) { return static_cast<std::ptrdiff_t>(std::floor(v)); };
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, lo(s.y - s.r - 1.0));
        const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(height) - 1, lo(s.y + s.r + 1.0));
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, lo(s.x - s.r - 1.0));
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(width) - 1, lo(s.x + s.r + 1.0));
        for (std::ptrdiff_t py = y0; py <= y1; ++py) {
            for (std::ptrdiff_t px = x0; px <= x1; ++px) {
                const double dx = static_cast<double>(px) + 0.5 - s.x;
                const double dy = static_cast<double>(py) + 0.5 - s.y;
                if (dx * dx + dy * dy <= r2)
                    mask.set(static_cast<std::size_t>(px), static_cast<std::size_t>(py), true);
            }
        }
    }
    return mask;
}

nlohmann::json to_json(const std::vector<Stroke>& strokes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : strokes) arr.push_back({{"x", s.x}, {"y", s.y}, {"r", s.r}});
    return arr;
}

std::vector<Stroke> strokes_from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw ParseError("strokes must be a JSON array");
    std::vector<Stroke> out;
    for (const auto& item : doc) {
        if (!item.is_object()) throw ParseError("stroke must be an object {x, y, r}");
        auto num = [&](const char* key) {
            if (!item.contains(key) || !item[key].is_number())
                throw ParseError(std::string("stroke field '") + key + "' must be a number");
            return item[key].get<double>();
        };
        out.push_back({num("x"), num("y"), num("r")});
    }
    return out;
}

std::vector<std::uint8_t> latent_mask(const Mask& mask, const ModelConfig& config) {
    if (mask.width != config.img_w() || mask.height != config.img_h())
        throw DimensionMismatch("mask does not match the model's image size");
    std::vector<std::uint8_t> cells(config.queries(), 0);
    for (std::size_t py = 0; py < mask.height; ++py)
        for (std::size_t px = 0; px < mask.width; ++px)
            if (mask.at(px, py)) cells[(py / kUpsample) * config.latent_w + px / kUpsample] = 1;
    return cells;
}

RgbImage inpaint(const Backbone& model, const RgbImage& image, const Mask& mask,
                 const TextEmbedding& text, std::uint64_t seed, const InpaintOptions& options) {
    const auto& cfg = model.config();
    if (image.empty()) throw EmptyImage("inpaint needs a non-empty image");
    if (mask.width != image.width || mask.height != image.height)
        throw DimensionMismatch("mask dims do not match image dims");
    if (!(options.strength > 0.0 && options.strength <= 1.0))
        throw InvalidConfig("inpaint strength must be in (0, 1]");
    if (mask.popcount() == 0) return image;

    const Latent source = model.encode(image);  // also checks image dims
    const auto cells = latent_mask(mask, cfg);
    const auto abar = alphas_cumprod(cfg);
    const auto all_ts = sampling_timesteps(cfg);

    const auto run = std::max<std::size_t>(
        1, std::min(cfg.steps, static_cast<std::size_t>(std::llround(options.strength * static_cast<double>(cfg.steps)))));
    const std::span<const std::size_t> ts(all_ts.data() + (cfg.steps - run), run);

    const Latent noise = initial_noise(cfg, seed);
    auto noised_source = [&](double a, std::size_t k) {
        return std::sqrt(a) * source.data[k] + std::sqrt(1.0 - a) * noise.data[k];
    };

    Latent x(cfg.latent_h, cfg.latent_w, cfg.latent_c);
    const double a_start = abar[ts.front()];
    for (std::size_t k = 0; k < x.data.size(); ++k) x.data[k] = noised_source(a_start, k);

    auto blend = [&](double a, Latent& z) {
        for (std::size_t q = 0; q < cells.size(); ++q) {
            if (cells[q]) continue;
            for (std::size_t ch = 0; ch < z.c; ++ch) {
                const std::size_t k = q * z.c + ch;
                z.data[k] = noised_source(a, k);
            }
        }
    };
    const std::size_t last = ts.size() - 1;
    x = run_sampler(model, text, std::move(x), ts, nullptr, nullptr, false,
                    [&](std::size_t step, double a_prev, Latent& z) {
                        if (options.blend_every_step || step == last) blend(a_prev, z);
                    });

    RgbImage out = model.decode(x);
    for (std::size_t py = 0; py < image.height; ++py)
        for (std::size_t px = 0; px < image.width; ++px)
            if (!mask.at(px, py))
                for (std::size_t ch = 0; ch < 3; ++ch) out.at(px, py, ch) = image.at(px, py, ch);
    return out;
}

RgbImage inpaint(const Backbone& model, const TextEncoder& encoder, const InpaintRequest& request,
                 const InpaintOptions& options) {
    const TextEmbedding text =
        request.prompt ? encoder.encode(encoder.tokenize(*request.prompt)) : TextEmbedding::zeros();
    return inpaint(model, request.image, request.mask, text, request.seed, options);
}

}  // namespace charm
