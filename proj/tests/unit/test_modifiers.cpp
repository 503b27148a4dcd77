#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "charm/error.hpp"
#include "charm/modifiers.hpp"
#include "oracles.hpp"

using namespace charm;
namespace fs = std::filesystem;

namespace {

Corpus corpus_of(const std::vector<std::string>& texts) {
    Corpus c;
    for (const auto& t : texts) c.push_back({static_cast<std::int64_t>(c.size()), t, std::nullopt});
    return c;
}

ModifierCatalog toy_catalog(const TextEncoder& enc) {
    std::vector<ModifierEntry> entries;
    std::size_t f = 10;
    for (const char* p : {"oil painting", "watercolor", "digital art", "highly detailed", "trending on artstation", "8k",
                          "soft light", "concept art", "matte painting", "octane render"})
        entries.push_back({p, std::string(p).find(' ') == std::string::npos ? 1u : 2u, f--, enc.embed_phrase(p)});
    return ModifierCatalog(entries, "toy", enc.seed());
}

}  // namespace

TEST_CASE("mining example with a custom stop list") {
    const TextEncoder enc(0, StopWords{"a"});
    const auto cat = mine(corpus_of({"a cat, highly detailed", "a dog, highly detailed"}), enc);
    const auto* hd = cat.find("highly detailed");
    REQUIRE(hd);
    CHECK(hd->n == 2);
    CHECK(hd->frequency == 2);
    REQUIRE(cat.find("detailed"));
    CHECK(cat.find("detailed")->frequency == 2);
    REQUIRE(cat.find("highly"));
    CHECK_FALSE(cat.find("a"));
    CHECK_FALSE(cat.find("cat , highly"));
    CHECK_FALSE(cat.find("cat highly"));
    CHECK(hd->embedding == enc.embed_phrase("highly detailed"));
}

TEST_CASE("empty corpus gives an empty catalog") {
    CHECK(mine({}, TextEncoder()).empty());
}

TEST_CASE("mining options are validated") {
    MiningOptions zero;
    zero.min_freq = 0;
    CHECK_THROWS_AS(mine({}, TextEncoder(), zero), InvalidConfig);
    MiningOptions none;
    none.top_k = 0;
    CHECK_THROWS_AS(mine({}, TextEncoder(), none), InvalidConfig);
}

TEST_CASE("counting per occurrence versus once per prompt") {
    const auto c = corpus_of({"rain rain rain", "rain"});
    const auto per = count_ngrams(c, default_stopwords(), false);
    const auto once = count_ngrams(c, default_stopwords(), true);
    CHECK(per.at("rain") == 4);
    CHECK(once.at("rain") == 2);
    CHECK(per.at("rain rain") == 2);
    CHECK(once.at("rain rain") == 1);
}

TEST_CASE("mine matches the brute-force counter on the bundled corpus") {
    const auto corpus = load_corpus(fs::path(CHARM_DATA_DIR) / "corpus.txt");
    std::vector<std::string> texts;
    for (const auto& r : corpus) texts.push_back(r.text);
    for (std::size_t min_freq : {1u, 2u, 3u}) {
        MiningOptions o;
        o.min_freq = min_freq;
        o.top_k = 25;
        const auto got = mine(corpus, TextEncoder(), o);
        const auto want = oracle::mine(texts, default_stopwords(), min_freq, 25);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(got.entries()[i].phrase == want[i].phrase);
            CHECK(got.entries()[i].frequency == want[i].count);
        }
    }
}

TEST_CASE("mine is independent of record order") {
    auto corpus = load_corpus(fs::path(CHARM_DATA_DIR) / "corpus.txt");
    const auto base = mine(corpus, TextEncoder());
    std::mt19937_64 rng(5);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(corpus.begin(), corpus.end(), rng);
        CHECK(mine(corpus, TextEncoder()).entries() == base.entries());
    }
}

TEST_CASE("search") {
    const auto c = corpus_of({"a wolf in the snow", "oil painting of a castle", "a wolf, oil painting, wolf"});
    const auto hits = search(c, "wolf");
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].id == 2);  // two occurrences rank first
    CHECK(hits[1].id == 0);
    CHECK(search(c, "oil painting").size() == 2);
    CHECK(search(c, "dragon").empty());
    CHECK_THROWS_AS(search(c, ""), EmptyQuery);
    CHECK_THROWS_AS(search(c, " , "), EmptyQuery);
}

TEST_CASE("search matches a linear-scan oracle") {
    const auto corpus = load_corpus(fs::path(CHARM_DATA_DIR) / "corpus.txt");
    for (const char* q : {"wolf", "digital art", "portrait", "oil painting, highly detailed"}) {
        std::vector<std::int64_t> want;
        for (const auto& r : corpus) {
            bool all = true;
            for (const auto& seg : oracle::segments(q))
                for (const auto& w : seg) {
                    bool found = false;
                    for (const auto& rs : oracle::segments(r.text)) found = found || std::count(rs.begin(), rs.end(), w);
                    all = all && found;
                }
            if (all) want.push_back(r.id);
        }
        std::vector<std::int64_t> got;
        for (const auto& r : search(corpus, q)) got.push_back(r.id);
        std::sort(got.begin(), got.end());
        CHECK(got == want);
    }
}

TEST_CASE("similar and dissimilar") {
    const TextEncoder enc;
    const auto cat = toy_catalog(enc);
    std::vector<oracle::Candidate> all;
    for (const auto& e : cat.entries()) all.push_back({e.phrase, e.frequency, e.embedding});

    SUBCASE("exhaustive ranking") {
        const auto q = enc.embed_phrase("oil painting");
        std::vector<std::string> near, far;
        for (const auto& s : similar(cat, enc, "oil painting", 3)) near.push_back(s.entry->phrase);
        for (const auto& s : dissimilar(cat, enc, "oil painting", 3)) far.push_back(s.entry->phrase);
        CHECK(near == oracle::rank(all, q, "oil painting", true, 3));
        CHECK(far == oracle::rank(all, q, "oil painting", false, 3));
        for (const auto& n : near) CHECK(std::find(far.begin(), far.end(), n) == far.end());
    }
    SUBCASE("self is excluded from similar") {
        for (const auto& s : similar(cat, enc, "Oil  Painting", 20)) CHECK(s.entry->phrase != "oil painting");
    }
    SUBCASE("k beyond catalog size returns everything") {
        CHECK(similar(cat, enc, "wolf", 50).size() == 10);
        CHECK(dissimilar(cat, enc, "wolf", 50).size() == 10);
    }
    SUBCASE("distances are sorted") {
        const auto s = similar(cat, enc, "wolf", 10);
        for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i - 1].distance <= s[i].distance);
    }
    CHECK_THROWS_AS(similar(cat, enc, "", 3), EmptyPhrase);
}

TEST_CASE("catalog rejects duplicate phrases and sorts entries") {
    const TextEncoder enc;
    CHECK_THROWS_AS(ModifierCatalog({{"a", 1, 1, enc.embed_phrase("a")}, {"a", 1, 2, enc.embed_phrase("a")}}), ParseError);
    const ModifierCatalog c({{"b", 1, 1, enc.embed_phrase("b")}, {"a", 1, 1, enc.embed_phrase("a")}, {"c", 1, 5, enc.embed_phrase("c")}});
    CHECK(c.entries()[0].phrase == "c");
    CHECK(c.entries()[1].phrase == "a");
    CHECK(c.entries()[2].phrase == "b");
}

TEST_CASE("catalog persistence") {
    const TextEncoder enc(4);
    const auto cat = mine(load_corpus(fs::path(CHARM_DATA_DIR) / "corpus.txt"), enc, {}, "corpus.txt");
    const auto dir = fs::temp_directory_path() / "charm-test-catalog";
    fs::create_directories(dir);
    save_catalog(cat, dir / "cat.json");
    CHECK(fs::exists(dir / "cat.chex"));
    const auto back = load_catalog(dir / "cat.json");
    REQUIRE(back.size() == cat.size());
    CHECK(back.encoder_seed() == 4);
    CHECK(back.corpus_ref() == "corpus.txt");
    for (std::size_t i = 0; i < cat.size(); ++i) {
        CHECK(back.entries()[i].phrase == cat.entries()[i].phrase);
        CHECK(back.entries()[i].frequency == cat.entries()[i].frequency);
        for (std::size_t k = 0; k < kTextDim; ++k)
            CHECK(back.entries()[i].embedding[k] == static_cast<double>(static_cast<float>(cat.entries()[i].embedding[k])));
    }
    fs::remove_all(dir);
}

TEST_CASE("corpus parsing") {
    const auto lines = parse_corpus_lines("first\r\n\n  \nsecond\n");
    REQUIRE(lines.size() == 2);
    CHECK(lines[1].id == 1);
    CHECK(lines[1].text == "second");

    const auto csv = parse_corpus_csv("id,text,image_path\n7,\"a wolf, \"\"howling\"\"\",img/7.png\n9,plain,\n");
    REQUIRE(csv.size() == 2);
    CHECK(csv[0].id == 7);
    CHECK(csv[0].text == "a wolf, \"howling\"");
    CHECK(csv[0].image_path == "img/7.png");
    CHECK_FALSE(csv[1].image_path);
    CHECK_THROWS_AS(parse_corpus_csv("id,prompt\n1,x\n"), ParseError);
    CHECK_THROWS_AS(parse_corpus_csv("id,text\n1,x\n1,y\n"), ParseError);
    CHECK_THROWS_AS(parse_corpus_csv("id,text\nx,y\n"), ParseError);
    CHECK_THROWS_AS(parse_corpus_csv("id,text\n1,\"open\n"), ParseError);
}
