#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "charm/diffusion.hpp"
#include "charm/image.hpp"

namespace charm {

/// A filled brush circle in pixel coordinates.
struct Stroke {
    double x = 0.0;
    double y = 0.0;
    double r = 0.0;

    bool operator==(const Stroke&) const = default;
};

/// Union of filled circles clipped to the image. Pixel (px, py) is covered
/// when its centre (px + 0.5, py + 0.5) lies within distance r of (x, y).
/// Throws InvalidStroke for non-positive or non-finite radii.
Mask rasterize_strokes(const std::vector<Stroke>& strokes, std::size_t width, std::size_t height);

/// [{"x":..,"y":..,"r":..}, ...]
nlohmann::json to_json(const std::vector<Stroke>& strokes);
std::vector<Stroke> strokes_from_json(const nlohmann::json& doc);

struct InpaintOptions {
    /// Fraction of the sampling schedule re-run from a noised start.
    double strength = 0.8;
    /// Re-impose the known region after every step rather than only at the end.
    bool blend_every_step = true;

    bool operator==(const InpaintOptions&) const = default;
};

struct InpaintRequest {
    RgbImage image;
    Mask mask;
    std::optional<std::string> prompt;
    std::uint64_t seed = 0;
};

/// A latent cell is masked when any pixel it covers is masked.
std::vector<std::uint8_t> latent_mask(const Mask& mask, const ModelConfig& config);

/// Regenerates the masked region. Every unmasked pixel of the result equals
/// the input byte-for-byte. `text` conditions the run (use
/// TextEmbedding::zeros() for purely image-guided inpainting).
/// Throws EmptyImage, DimensionMismatch, InvalidConfig.
RgbImage inpaint(const Backbone& model, const RgbImage& image, const Mask& mask,
                 const TextEmbedding& text, std::uint64_t seed, const InpaintOptions& options = {});

/// Encodes request.prompt when present, otherwise uses the zero embedding.
RgbImage inpaint(const Backbone& model, const TextEncoder& encoder, const InpaintRequest& request,
                 const InpaintOptions& options = {});

}  // namespace charm
