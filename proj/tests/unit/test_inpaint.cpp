#include <doctest.h>

#include <random>

#include "charm/diffusion.hpp"
#include "charm/error.hpp"
#include "charm/inpaint.hpp"
#include "oracles.hpp"

using namespace charm;

namespace {

const ToyBackbone& model() {
    static const ToyBackbone m{ModelConfig{}};
    return m;
}

const RgbImage& source() {
    static const RgbImage img = [] {
        const TextEncoder enc;
        return generate(model(), enc.encode(enc.tokenize("a wolf next to a child")), 21).image.rgb;
    }();
    return img;
}

}  // namespace

TEST_CASE("rasterize_strokes") {
    CHECK(rasterize_strokes({}, 64, 64).popcount() == 0);
    CHECK(rasterize_strokes({{32, 32, 100}}, 64, 64).popcount() == 64 * 64);
    const Stroke a{12, 12, 6}, b{45, 40, 9.5};
    const auto both = rasterize_strokes({a, b}, 64, 64).popcount();
    CHECK(both == rasterize_strokes({a}, 64, 64).popcount() + rasterize_strokes({b}, 64, 64).popcount());
    CHECK(rasterize_strokes({a}, 64, 64).popcount() == oracle::disk_pixels(12, 12, 6, 64, 64));
    CHECK(rasterize_strokes({b}, 64, 64).popcount() == oracle::disk_pixels(45, 40, 9.5, 64, 64));
    // partially off-canvas
    CHECK(rasterize_strokes({{0, 0, 5}}, 64, 64).popcount() == oracle::disk_pixels(0, 0, 5, 64, 64));
    CHECK_THROWS_AS(rasterize_strokes({{1, 1, 0}}, 8, 8), InvalidStroke);
    CHECK_THROWS_AS(rasterize_strokes({{1, 1, -2}}, 8, 8), InvalidStroke);
    CHECK_THROWS_AS(rasterize_strokes({{NAN, 1, 2}}, 8, 8), InvalidStroke);
}

TEST_CASE("stroke json") {
    const std::vector<Stroke> s{{1.5, 2, 3}};
    const auto back = strokes_from_json(to_json(s));
    REQUIRE(back.size() == 1);
    CHECK(back[0].x == 1.5);
    CHECK(back[0].r == 3);
    CHECK_THROWS_AS(strokes_from_json(nlohmann::json::parse(R"([{"x":1,"y":2}])")), ParseError);
    CHECK_THROWS_AS(strokes_from_json(nlohmann::json::parse(R"({"x":1})")), ParseError);
}

TEST_CASE("latent mask marks any covered cell") {
    Mask m(64, 64);
    m.set(5, 9, true);
    const auto cells = latent_mask(m, model().config());
    std::size_t on = 0;
    for (auto c : cells) on += c;
    CHECK(on == 1);
    CHECK(cells[2 * 16 + 1] == 1);
}

TEST_CASE("empty mask returns the input") {
    const TextEncoder enc;
    const auto out = inpaint(model(), enc, InpaintRequest{source(), Mask(64, 64), std::nullopt, 3});
    CHECK(out == source());
}

TEST_CASE("left-half mask keeps the right half and changes the left") {
    Mask m(64, 64);
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 32; ++x) m.set(x, y, true);
    const TextEncoder enc;
    const auto out = inpaint(model(), enc, InpaintRequest{source(), m, std::string("a crescent moon"), 4});
    std::size_t changed = 0;
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                if (x >= 32)
                    CHECK(out.at(x, y, c) == source().at(x, y, c));
                else
                    changed += out.at(x, y, c) != source().at(x, y, c);
            }
    CHECK(changed > 0);
}

TEST_CASE("unprompted inpaint changes masked pixels across seeds and keeps the rest") {
    const TextEncoder enc;
    const auto m = rasterize_strokes({{30, 30, 10}}, 64, 64);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto out = inpaint(model(), enc, InpaintRequest{source(), m, std::nullopt, seed});
        std::size_t changed = 0;
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 0; x < 64; ++x)
                for (std::size_t c = 0; c < 3; ++c) {
                    if (m.at(x, y))
                        changed += out.at(x, y, c) != source().at(x, y, c);
                    else
                        CHECK(out.at(x, y, c) == source().at(x, y, c));
                }
        CHECK(changed > 0);
    }
}

TEST_CASE("inpaint is deterministic and prompt sensitive") {
    const TextEncoder enc;
    const auto m = rasterize_strokes({{20, 40, 12}}, 64, 64);
    InpaintRequest req{source(), m, std::string("a red door"), 8};
    const auto a = inpaint(model(), enc, req);
    CHECK(a == inpaint(model(), enc, req));
    req.prompt.reset();
    CHECK_FALSE(a == inpaint(model(), enc, req));
    // absent prompt is the zero embedding
    CHECK(inpaint(model(), enc, req) == inpaint(model(), source(), m, TextEmbedding::zeros(), 8));
}

TEST_CASE("options") {
    const TextEncoder enc;
    const auto m = rasterize_strokes({{20, 40, 12}}, 64, 64);
    const InpaintRequest req{source(), m, std::nullopt, 8};
    InpaintOptions end_only;
    end_only.blend_every_step = false;
    InpaintOptions weak;
    weak.strength = 0.3;
    CHECK_FALSE(inpaint(model(), enc, req) == inpaint(model(), enc, req, weak));
    const auto e = inpaint(model(), enc, req, end_only);
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x)
            if (!m.at(x, y)) CHECK(e.at(x, y, 0) == source().at(x, y, 0));
    InpaintOptions bad;
    bad.strength = 0.0;
    CHECK_THROWS_AS(inpaint(model(), enc, req, bad), InvalidConfig);
    bad.strength = 1.5;
    CHECK_THROWS_AS(inpaint(model(), enc, req, bad), InvalidConfig);
}

TEST_CASE("input validation") {
    const TextEncoder enc;
    CHECK_THROWS_AS(inpaint(model(), enc, InpaintRequest{RgbImage{}, Mask{}, std::nullopt, 0}), EmptyImage);
    CHECK_THROWS_AS(inpaint(model(), enc, InpaintRequest{source(), Mask(32, 32), std::nullopt, 0}), DimensionMismatch);
    RgbImage small(32, 32);
    auto m = Mask(32, 32);
    m.set(1, 1, true);
    CHECK_THROWS_AS(inpaint(model(), enc, InpaintRequest{small, m, std::nullopt, 0}), DimensionMismatch);
}
