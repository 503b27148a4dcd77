#include "charm/metrics.hpp"

#include "charm/error.hpp"
#include "charm/inpaint.hpp"
#include "charm/text_encoder.hpp"

namespace charm {

std::vector<double> luma(const RgbImage& image) {
    std::vector<double> y(image.width * image.height);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto* p = &image.data[i * 3];
        y[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
    return y;
}

double ssim_window(const double* a, const double* b, std::size_t stride, std::size_t window,
                   const SsimParams& params) {
    const double n = static_cast<double>(window * window);
    double ma = 0, mb = 0;
    for (std::size_t r = 0; r < window; ++r)
        for (std::size_t c = 0; c < window; ++c) {
            ma += a[r * stride + c];
            mb += b[r * stride + c];
        }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cov = 0;
    for (std::size_t r = 0; r < window; ++r)
        for (std::size_t c = 0; c < window; ++c) {
            const double da = a[r * stride + c] - ma;
            const double db = b[r * stride + c] - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
        }
    va /= n;
    vb /= n;
    cov /= n;
    const double c1 = params.c1(), c2 = params.c2();
    return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

double ssim_luma(const std::vector<double>& a, const std::vector<double>& b, std::size_t width,
                 std::size_t height, const SsimParams& params) {
    if (a.size() != width * height || b.size() != width * height)
        throw DimensionMismatch("luma planes do not match the stated size");
    if (!(params.k1 > 0 && params.k2 > 0) || params.window == 0)
        throw InvalidConfig("SSIM needs K1, K2 > 0 and a non-empty window");
    if (width < params.window || height < params.window)
        throw DimensionMismatch("image is smaller than the SSIM window");
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + params.window <= height; ++y)
        for (std::size_t x = 0; x + params.window <= width; ++x) {
            sum += ssim_window(&a[y * width + x], &b[y * width + x], width, params.window, params);
            ++count;
        }
    return sum / static_cast<double>(count);
}

double ssim(const RgbImage& a, const RgbImage& b, const SsimParams& params) {
    if (a.width != b.width || a.height != b.height)
        throw DimensionMismatch("SSIM needs images of equal size");
    return ssim_luma(luma(a), luma(b), a.width, a.height, params);
}

RgbImage regenerate(const Session& session, std::size_t version_id, const Backbone& model) {
    const Version& v = session.get(version_id);
    const TextEncoder encoder(v.encoder_seed);
    if (v.kind == VersionKind::inpaint) {
        if (!v.inpaint) throw MissingArtifact("inpaint version lacks its stored inputs");
        if (!session.contains(v.inpaint->source_version))
            throw MissingArtifact("inpaint source version is missing");
        const auto& src = session.get(v.inpaint->source_version).image;
        InpaintRequest req{src, rasterize_strokes(v.inpaint->strokes, src.width, src.height),
                           v.inpaint->prompt, v.seed};
        return inpaint(model, encoder, req, v.inpaint->options);
    }
    if (v.prompt.empty()) throw MissingArtifact("version has no prompt");
    const auto embedding = encoder.encode(encoder.tokenize(v.prompt));
    return generate(model, embedding, v.seed, &v.adjustment).image.rgb;
}

bool replay(const Session& session, std::size_t version_id, const Backbone& model) {
    return regenerate(session, version_id, model) == session.get(version_id).image;
}

}  // namespace charm
