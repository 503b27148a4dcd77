#pragma once

// Golden-request suite for the HTTP service. Each check yields a named
// pass/fail line; the acceptance binary and the unit tests share it.

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "charm/chex.hpp"
#include "charm/error.hpp"
#include "charm/inpaint.hpp"
#include "charm/metrics.hpp"
#include "charm/service.hpp"
#include "oracles.hpp"

namespace golden {

struct Check {
    std::string name;
    bool ok = false;
    std::string detail;
};

using nlohmann::json;

class Gate {
public:
    void enter(const std::string& job) {
        std::unique_lock lock(m_);
        entered_.insert(job);
        cv_.notify_all();
        cv_.wait(lock, [&] { return open_ || released_.count(job); });
    }
    bool wait_entered(const std::string& job) {
        std::unique_lock lock(m_);
        return cv_.wait_for(lock, std::chrono::seconds(20), [&] { return entered_.count(job) > 0; });
    }
    void release(const std::string& job) {
        std::lock_guard lock(m_);
        released_.insert(job);
        cv_.notify_all();
    }
    void open() {
        std::lock_guard lock(m_);
        open_ = true;
        cv_.notify_all();
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    std::set<std::string> entered_, released_;
    bool open_ = false;
};

inline json parse(const httplib::Result& r) {
    if (!r) return json();
    try {
        return json::parse(r->body);
    } catch (...) {
        return json();
    }
}

inline bool is_error(const httplib::Result& r, int status, const std::string& kind) {
    return r && r->status == status && parse(r).value("error", "") == kind;
}

inline json wait_job(httplib::Client& cli, const std::string& job_id) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(30);
    while (std::chrono::steady_clock::now() < deadline) {
        auto t = parse(cli.Get("/jobs/" + job_id));
        const auto state = t.value("state", "");
        if (state == "done" || state == "failed") return t;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return json();
}

inline std::vector<Check> run(const std::filesystem::path& data_dir, const std::filesystem::path& scratch) {
    namespace fs = std::filesystem;
    std::vector<Check> out;
    auto check = [&](std::string name, bool ok, std::string detail = {}) {
        out.push_back({std::move(name), ok, std::move(detail)});
        return ok;
    };

    fs::remove_all(scratch);
    charm::ServiceConfig cfg;
    cfg.port = 0;
    cfg.workers = 1;
    cfg.corpus_path = data_dir / "corpus.txt";
    cfg.session_dir = scratch / "sessions";

    Gate gate;
    auto service = std::make_unique<charm::Service>(cfg);
    service->set_job_observer([&](const charm::JobTicket& t) { gate.enter(t.job_id); });
    service->start();
    const int port = service->port();
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(30, 0);

    // health
    {
        auto r = cli.Get("/healthz");
        check("GET /healthz -> 200 {status: ok}", r && r->status == 200 && parse(r) == json{{"status", "ok"}});
    }

    // sessions
    std::string sid, sid2;
    {
        auto r = cli.Post("/sessions");
        sid = parse(r).value("session_id", "");
        check("POST /sessions -> 201 {session_id}", r && r->status == 201 && charm::SessionStore::valid_id(sid));
        sid2 = parse(cli.Post("/sessions")).value("session_id", "");
        auto m = parse(cli.Get("/sessions/" + sid));
        check("GET /sessions/{id} -> empty manifest", m.value("session_id", "") == sid && m["versions"].empty());
        check("GET /sessions/{unknown} -> 404 UnknownSession", is_error(cli.Get("/sessions/00ff00ff00ff00ff"), 404, "UnknownSession"));
        check("POST /sessions/{bad id}/generate -> 404 UnknownSession",
              is_error(cli.Post("/sessions/not-a-session/generate", R"({"prompt":"x"})", "application/json"), 404,
                       "UnknownSession"));
    }

    // refine
    {
        const std::string prompt = "a wolf on a hill";
        auto r = cli.Post("/sessions/" + sid + "/refine", json{{"prompt", prompt}}.dump(), "application/json");
        auto j = parse(r);
        bool subset = j.contains("appended") && !j["appended"].empty();
        if (subset)
            for (const auto& p : j["appended"]) subset = subset && service->catalog().find(p.get<std::string>());
        check("POST refine -> prefix kept, modifiers from catalog",
              r && r->status == 200 && j.value("refined", "").rfind(prompt, 0) == 0 && subset &&
                  j.value("source", "") == "heuristic");
        check("POST refine empty prompt -> 422 EmptyPrompt",
              is_error(cli.Post("/sessions/" + sid + "/refine", R"({"prompt":"  "})", "application/json"), 422, "EmptyPrompt"));
        check("POST refine malformed JSON -> 400 ParseError",
              is_error(cli.Post("/sessions/" + sid + "/refine", "{nope", "application/json"), 400, "ParseError"));
        check("POST refine missing field -> 400 ParseError",
              is_error(cli.Post("/sessions/" + sid + "/refine", "{}", "application/json"), 400, "ParseError"));
    }

    // generate validation
    const std::string gen = "/sessions/" + sid + "/generate";
    {
        json body{{"prompt", "a wolf howling at the moon"}, {"adjustment", {{"entries", {{"1", 3.0}}}}}};
        check("POST generate gamma=3.0 -> 422 GammaOutOfRange",
              is_error(cli.Post(gen, body.dump(), "application/json"), 422, "GammaOutOfRange"));
        body["adjustment"] = {{"1", 0.49}};
        check("POST generate gamma=0.49 (flat form) -> 422 GammaOutOfRange",
              is_error(cli.Post(gen, body.dump(), "application/json"), 422, "GammaOutOfRange"));
        body["adjustment"] = {{"entries", {{"40", 1.5}}}};
        check("POST generate token out of range -> 422 IndexOutOfRange",
              is_error(cli.Post(gen, body.dump(), "application/json"), 422, "IndexOutOfRange"));
        std::string long_prompt;
        for (int i = 0; i < 80; ++i) long_prompt += "wolf ";
        check("POST generate 80 tokens -> 422 TooLong",
              is_error(cli.Post(gen, json{{"prompt", long_prompt}}.dump(), "application/json"), 422, "TooLong"));
        check("POST generate seed of wrong type -> 400 ParseError",
              is_error(cli.Post(gen, R"({"prompt":"a wolf","seed":"x"})", "application/json"), 400, "ParseError"));
    }

    // job lifecycle: with one worker and gated jobs, every state is observable
    std::string job_a, job_b;
    {
        auto r = cli.Post(gen, json{{"prompt", "a wolf howling at the moon"}, {"seed", 7}, {"trace", true}}.dump(),
                          "application/json");
        auto t = parse(r);
        job_a = t.value("job_id", "");
        check("POST generate -> 202 JobTicket",
              r && r->status == 202 && !job_a.empty() && t.value("session_id", "") == sid &&
                  (t["state"] == "queued" || t["state"] == "running") && t["result_ref"].is_null());
        gate.wait_entered(job_a);
        check("GET /jobs/{id} while held -> running", parse(cli.Get("/jobs/" + job_a)).value("state", "") == "running");
        check("POST generate on a busy session -> 409 SessionBusy",
              is_error(cli.Post(gen, json{{"prompt", "a wolf"}}.dump(), "application/json"), 409, "SessionBusy"));

        auto rb = cli.Post("/sessions/" + sid2 + "/generate", json{{"prompt", "a castle at night"}, {"seed", 3}}.dump(),
                           "application/json");
        job_b = parse(rb).value("job_id", "");
        const auto state_b0 = parse(cli.Get("/jobs/" + job_b)).value("state", "");
        gate.release(job_a);
        const auto done_a = wait_job(cli, job_a);
        gate.wait_entered(job_b);
        const auto state_b1 = parse(cli.Get("/jobs/" + job_b)).value("state", "");
        gate.release(job_b);
        const auto done_b = wait_job(cli, job_b);
        check("job lifecycle queued -> running -> done",
              rb && rb->status == 202 && state_b0 == "queued" && state_b1 == "running" &&
                  done_b.value("state", "") == "done",
              state_b0 + " -> " + state_b1 + " -> " + done_b.value("state", ""));
        check("done job carries result_ref", done_a.value("state", "") == "done" &&
                                                 done_a.value("result_ref", "") == charm::version_ref(sid, 0) &&
                                                 done_a["error"].is_null());
        check("GET /jobs/{unknown} -> 404 UnknownJob", is_error(cli.Get("/jobs/job999"), 404, "UnknownJob"));
    }
    gate.open();

    // versions, image, explanation
    const std::string ref0 = charm::version_ref(sid, 0);
    {
        auto list = parse(cli.Get("/sessions/" + sid + "/versions"));
        check("GET /sessions/{id}/versions -> 1 version",
              list.is_array() && list.size() == 1 && list[0].value("ref", "") == ref0 &&
                  list[0].value("kind", "") == "diffuse" && list[0].value("seed", 0) == 7);

        auto img = cli.Get("/versions/" + ref0 + "/image");
        bool ok = img && img->status == 200 && img->get_header_value("Content-Type") == "image/png";
        if (ok) {
            const auto rgb = charm::decode_png(charm::Bytes(img->body.begin(), img->body.end()));
            const auto snap = service->sessions().snapshot(sid);
            ok = rgb == snap.get(0).image && charm::replay(snap, 0, service->model());
        }
        check("GET /versions/{id}/image -> PNG of a replayable version", ok);

        auto ex = parse(cli.Get("/versions/" + ref0 + "/explanation"));
        check("GET /versions/{id}/explanation -> one entry per token",
              ex.contains("tokens") && ex["tokens"].size() == 6 && ex["tokens"][1].value("text", "") == "wolf");
        auto hm = cli.Get("/versions/" + ref0 + "/explanation/heatmaps");
        bool hm_ok = hm && hm->status == 200;
        if (hm_ok) {
            const auto blob = charm::decode_chex(charm::Bytes(hm->body.begin(), hm->body.end()));
            hm_ok = blob.count == 6 && blob.height == 64 && blob.width == 64;
        }
        check("GET /versions/{id}/explanation/heatmaps -> CHEX 6x64x64", hm_ok);
        check("GET /versions/{unknown}/image -> 404 UnknownVersion",
              is_error(cli.Get("/versions/" + charm::version_ref(sid, 9) + "/image"), 404, "UnknownVersion"));
        check("GET /versions/{malformed}/image -> 404 UnknownVersion",
              is_error(cli.Get("/versions/garbage/image"), 404, "UnknownVersion"));
    }

    // adjusted version without trace
    {
        auto t = parse(cli.Post(gen, json{{"prompt", "a wolf howling at the moon"}, {"adjustment", {{"1", 0.5}}}}.dump(),
                                "application/json"));
        auto done = wait_job(cli, t.value("job_id", ""));
        check("adjust job inherits parent seed", done.value("state", "") == "done" &&
                                                     service->sessions().snapshot(sid).get(1).seed == 7 &&
                                                     service->sessions().snapshot(sid).get(1).kind == charm::VersionKind::adjust);
        check("GET explanation of untraced version -> 404",
              is_error(cli.Get("/versions/" + charm::version_ref(sid, 1) + "/explanation"), 404, "MissingArtifact"));
        auto d = parse(cli.Get("/sessions/" + sid + "/diff?a=0&b=1"));
        check("GET diff -> gamma delta only",
              d.contains("adjustment_delta") && d["prompt_edits"].empty() && d["adjustment_delta"].size() == 1 &&
                  d["adjustment_delta"][0] == json{{"token", 1}, {"before", 1.0}, {"after", 0.5}});
        check("GET diff missing b -> 400 ParseError", is_error(cli.Get("/sessions/" + sid + "/diff?a=0"), 400, "ParseError"));
        check("GET diff unknown version -> 404 UnknownVersion",
              is_error(cli.Get("/sessions/" + sid + "/diff?a=0&b=8"), 404, "UnknownVersion"));
    }

    // inpaint
    {
        const std::string url = "/sessions/" + sid + "/inpaint";
        const json strokes = json::array({{{"x", 20}, {"y", 24}, {"r", 9}}, {{"x", 44}, {"y", 40}, {"r", 6}}});
        auto t = parse(cli.Post(url, json{{"version_id", 0}, {"strokes", strokes}, {"prompt", "a red moon"}, {"seed", 11}}.dump(),
                                "application/json"));
        auto done = wait_job(cli, t.value("job_id", ""));
        bool ok = done.value("state", "") == "done";
        if (ok) {
            const auto snap = service->sessions().snapshot(sid);
            const auto& v = snap.get(2);
            const auto mask = charm::rasterize_strokes(charm::strokes_from_json(strokes), 64, 64);
            const auto& src = snap.get(0).image;
            for (std::size_t y = 0; y < 64 && ok; ++y)
                for (std::size_t x = 0; x < 64 && ok; ++x)
                    if (!mask.at(x, y))
                        for (std::size_t c = 0; c < 3; ++c) ok = ok && v.image.at(x, y, c) == src.at(x, y, c);
            ok = ok && v.kind == charm::VersionKind::inpaint && v.parent == 0u && charm::replay(snap, 2, service->model());
        }
        check("POST inpaint -> job done, unmasked pixels kept, replayable", ok);
        check("POST inpaint r=0 -> 422 InvalidStroke",
              is_error(cli.Post(url, json{{"version_id", 0}, {"strokes", {{{"x", 1}, {"y", 1}, {"r", 0}}}}}.dump(), "application/json"),
                       422, "InvalidStroke"));
        check("POST inpaint unknown version -> 404 UnknownVersion",
              is_error(cli.Post(url, json{{"version_id", 42}, {"strokes", strokes}}.dump(), "application/json"), 404,
                       "UnknownVersion"));
        check("POST inpaint without strokes -> 400 ParseError",
              is_error(cli.Post(url, json{{"version_id", 0}}.dump(), "application/json"), 400, "ParseError"));
    }

    // modifiers
    {
        auto r = parse(cli.Get("/modifiers?query=oil"));
        bool ok = r.contains("results") && !r["results"].empty();
        for (const auto& rec : r.value("results", json::array()))
            ok = ok && rec.value("text", "").find("oil") != std::string::npos;
        check("GET /modifiers?query=oil -> matching prompts", ok);
        check("GET /modifiers?query= -> 422 EmptyQuery", is_error(cli.Get("/modifiers?query="), 422, "EmptyQuery"));
        check("GET /modifiers without query -> 400 ParseError", is_error(cli.Get("/modifiers"), 400, "ParseError"));

        std::vector<oracle::Candidate> all;
        for (const auto& e : service->catalog().entries()) all.push_back({e.phrase, e.frequency, e.embedding});
        const charm::TextEncoder enc(cfg.encoder_seed);
        const auto q = enc.embed_phrase("oil painting");
        for (bool near : {true, false}) {
            auto res = parse(cli.Get(std::string("/modifiers/") + (near ? "similar" : "dissimilar") + "?phrase=oil%20painting&k=3"));
            std::vector<std::string> got;
            for (const auto& e : res.value("results", json::array())) got.push_back(e.value("phrase", ""));
            std::string shown;
            for (const auto& g : got) shown += g + ";";
            shown += " want ";
            for (const auto& g : oracle::rank(all, q, "oil painting", near, 3)) shown += g + ";";
            check(std::string("GET /modifiers/") + (near ? "similar" : "dissimilar") + " -> 3 ranked entries",
                  got.size() == 3 && got == oracle::rank(all, q, "oil painting", near, 3), shown);
        }
        check("GET /modifiers/similar bad k -> 400 ParseError",
              is_error(cli.Get("/modifiers/similar?phrase=oil&k=-1"), 400, "ParseError"));
        check("GET /modifiers/similar empty phrase -> 422 EmptyPhrase",
              is_error(cli.Get("/modifiers/similar?phrase=&k=3"), 422, "EmptyPhrase"));
    }

    check("GET /nowhere -> 404", cli.Get("/nowhere") && cli.Get("/nowhere")->status == 404);

    // every completed job is replayable
    {
        const auto snap = service->sessions().snapshot(sid);
        bool ok = snap.versions.size() == 3;
        for (const auto& v : snap.versions) ok = ok && charm::replay(snap, v.id, service->model());
        check("every job result replays", ok);
    }

    // occupied port
    {
        auto other = cfg;
        other.port = port;
        other.session_dir = scratch / "other";
        bool threw = false;
        try {
            charm::Service second(other);
            second.start();
        } catch (const charm::PortInUse&) {
            threw = true;
        }
        check("start on occupied port -> PortInUse", threw);
    }

    // restart round trip
    {
        const auto before = parse(cli.Get("/sessions/" + sid)).dump();
        service->stop();
        service.reset();
        service = std::make_unique<charm::Service>(cfg);
        service->start();
        httplib::Client cli2("127.0.0.1", service->port());
        const auto after = parse(cli2.Get("/sessions/" + sid)).dump();
        check("restart -> identical manifest", before == after && before.size() > 2);
        service->stop();
    }

    {
        bool threw = false;
        try {
            charm::service_config_from_json(json{{"workers", 0}});
        } catch (const charm::BadConfig&) {
            threw = true;
        }
        bool threw_unknown = false;
        try {
            charm::service_config_from_json(json{{"prot", 1}});
        } catch (const charm::BadConfig&) {
            threw_unknown = true;
        }
        check("bad config -> BadConfig", threw && threw_unknown);
    }
    return out;
}

}  // namespace golden
