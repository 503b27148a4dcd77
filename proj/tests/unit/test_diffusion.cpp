#include <doctest.h>

#include <cmath>

#include "charm/diffusion.hpp"
#include "charm/error.hpp"
#include "oracles.hpp"

using namespace charm;

namespace {

const ToyBackbone& model() {
    static const ToyBackbone m{ModelConfig{}};
    return m;
}

TextEmbedding embed(const std::string& s, std::uint64_t seed = 0) {
    const TextEncoder enc(seed);
    return enc.encode(enc.tokenize(s));
}

}  // namespace

TEST_CASE("build_model is deterministic and seed dependent") {
    ModelConfig c;
    CHECK(build_model(c) == build_model(c));
    ModelConfig d = c;
    d.weight_seed = 1;
    CHECK_FALSE(build_model(c) == build_model(d));
}

TEST_CASE("config validation") {
    ModelConfig c;
    c.d_model = 65;
    c.heads = 8;
    CHECK_THROWS_AS(build_model(c), InvalidConfig);
    ModelConfig z;
    z.steps = 0;
    CHECK_THROWS_AS(z.validate(), InvalidConfig);
    ModelConfig many;
    many.steps = 1001;
    CHECK_THROWS_AS(many.validate(), InvalidConfig);
    ModelConfig beta;
    beta.beta_start = 0.5;
    beta.beta_end = 0.1;
    CHECK_THROWS_AS(beta.validate(), InvalidConfig);
}

TEST_CASE("model config json") {
    ModelConfig c;
    c.steps = 5;
    c.weight_seed = 9;
    CHECK(model_config_from_json(to_json(c)) == c);
    CHECK(model_config_from_json(nlohmann::json::object()) == ModelConfig{});
    CHECK_THROWS(model_config_from_json(nlohmann::json{{"layerz", 2}}));
}

TEST_CASE("schedule") {
    ModelConfig c;
    const auto ts = sampling_timesteps(c);
    REQUIRE(ts.size() == c.steps);
    CHECK(ts.front() == 900);
    CHECK(ts.back() == 0);
    for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
    const auto ab = alphas_cumprod(c);
    REQUIRE(ab.size() == kTrainTimesteps);
    // product of (1 - beta) with linear betas, recomputed directly
    double prod = 1.0;
    for (std::size_t t = 0; t < kTrainTimesteps; ++t) {
        const double beta = c.beta_start + (c.beta_end - c.beta_start) * t / (kTrainTimesteps - 1);
        prod *= 1.0 - beta;
        CHECK(ab[t] == doctest::Approx(prod).epsilon(1e-12));
    }
}

TEST_CASE("generate is deterministic") {
    const auto e = embed("a wolf howling at the moon");
    const auto a = generate(model(), e, 42);
    const auto b = generate(model(), e, 42);
    CHECK(a.image == b.image);
    CHECK(a.latent == b.latent);
    CHECK(a.image.rgb.width == 64);
    CHECK(a.image.rgb.height == 64);
    CHECK_FALSE(generate(model(), e, 43).image.rgb == a.image.rgb);
}

TEST_CASE("tracing never changes the image") {
    const auto e = embed("a castle at night, oil painting");
    AttentionAdjustment adj;
    adj.entries[1] = 1.5;
    const auto plain = generate(model(), e, 5, &adj);
    const auto traced = generate(model(), e, 5, &adj, {true, true});
    CHECK(plain.image.rgb == traced.image.rgb);
    REQUIRE(traced.trace);
    const auto& c = model().config();
    CHECK(traced.trace->records.size() == c.steps * c.layers * c.heads);
    for (const auto& r : traced.trace->records) {
        CHECK(r.rows == c.queries());
        CHECK(r.cols == kMaxTokens);
        CHECK(r.adjusted.size() == r.probs.size());
        CHECK(r.logits.size() == r.probs.size());
    }
}

TEST_CASE("identity adjustment is bit-identical to no adjustment") {
    const auto e = embed("portrait of a knight");
    AttentionAdjustment ones;
    for (std::size_t j = 0; j < 4; ++j) ones.entries[j] = 1.0;
    const auto a = generate(model(), e, 8, nullptr, {true, false});
    const auto b = generate(model(), e, 8, &ones, {true, false});
    CHECK(a.image.rgb == b.image.rgb);
    for (std::size_t i = 0; i < a.trace->records.size(); ++i) CHECK(a.trace->records[i].probs == b.trace->records[i].probs);
}

TEST_CASE("adjustment changes the image") {
    const auto e = embed("a wolf next to a child");
    AttentionAdjustment half;
    half.entries[1] = 0.5;
    CHECK_FALSE(generate(model(), e, 1).image.rgb == generate(model(), e, 1, &half).image.rgb);
}

TEST_CASE("traced rows are distributions matching an independent softmax") {
    const auto g = generate(model(), embed("a fox in a snowy forest"), 2, nullptr, {true, true});
    double worst = 0;
    for (const auto& r : g.trace->records) {
        const auto ref = oracle::softmax_rows(r.logits, r.rows, r.cols);
        for (std::size_t i = 0; i < r.probs.size(); ++i) {
            CHECK(r.probs[i] >= 0.0);
            worst = std::max(worst, std::abs(r.probs[i] - ref[i]));
        }
        for (std::size_t q = 0; q < r.rows; ++q) {
            double s = 0;
            for (std::size_t j = 0; j < r.cols; ++j) s += r.probs[q * r.cols + j];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("decode") {
    const auto& c = model().config();
    Latent zero(c.latent_h, c.latent_w, c.latent_c);
    const auto img = model().decode(zero);
    for (auto v : img.data) CHECK(v == 128);
    CHECK(decode_latent(model(), zero) == img);
    CHECK_THROWS_AS(model().decode(Latent(3, 3, 4)), DimensionMismatch);
}

TEST_CASE("encode inverts decode up to quantization") {
    const auto g = generate(model(), embed("a lighthouse in a storm"), 4);
    const auto re = model().decode(model().encode(g.image.rgb));
    int worst = 0;
    for (std::size_t i = 0; i < re.data.size(); ++i)
        worst = std::max(worst, std::abs(int(re.data[i]) - int(g.image.rgb.data[i])));
    // decoded images are constant on 4x4 blocks, so only byte rounding is lost
    CHECK(worst <= 1);
}

TEST_CASE("hooks see every site in order") {
    struct Counter : AttentionHook {
        std::vector<HookSite> sites;
        void on_attention(const HookSite& s, std::size_t, std::size_t, std::span<double>, std::span<const double>) override {
            sites.push_back(s);
        }
    } counter;
    const auto& c = model().config();
    Latent x = initial_noise(c, 1);
    model().predict_noise(x, 500, 3, embed("a wolf"), &counter);
    REQUIRE(counter.sites.size() == c.layers * c.heads);
    CHECK(counter.sites[0].step == 3);
    CHECK(counter.sites[0].timestep == 500);
    CHECK(counter.sites.back().layer == c.layers - 1);
    CHECK(counter.sites.back().head == c.heads - 1);
}
