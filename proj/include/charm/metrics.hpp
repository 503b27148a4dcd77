#pragma once

#include <cstddef>
#include <vector>

#include "charm/diffusion.hpp"
#include "charm/image.hpp"
#include "charm/session.hpp"

namespace charm {

struct SsimParams {
    std::size_t window = 8;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 255.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// BT.601 luma, row-major, unrounded.
std::vector<double> luma(const RgbImage& image);

/// SSIM of one pair of equal-size sample sets.
double ssim_window(const double* a, const double* b, std::size_t stride, std::size_t window,
                   const SsimParams& params);

/// Mean SSIM over every window position of the luma planes.
/// Throws DimensionMismatch when sizes differ or the image is smaller than the window.
double ssim(const RgbImage& a, const RgbImage& b, const SsimParams& params = {});
double ssim_luma(const std::vector<double>& a, const std::vector<double>& b, std::size_t width,
                 std::size_t height, const SsimParams& params = {});

/// Regenerates a version from its stored inputs and compares the image
/// byte for byte. Throws MissingArtifact when inputs are incomplete.
RgbImage regenerate(const Session& session, std::size_t version_id, const Backbone& model);
bool replay(const Session& session, std::size_t version_id, const Backbone& model);

}  // namespace charm
