#include "charm/service.hpp"

#include <httplib.h>
#include <sys/socket.h>

#include <charconv>
#include <fstream>

#include "charm/chex.hpp"
#include "charm/error.hpp"
#include "charm/inpaint.hpp"

namespace charm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- config -------------------------------------------------------------

template <typename T>
T config_value(const json& doc, const char* key, T fallback) {
    if (!doc.contains(key) || doc[key].is_null()) return fallback;
    try {
        return doc[key].get<T>();
    } catch (const json::exception&) {
        throw BadConfig(std::string("config field '") + key + "' has the wrong type");
    }
}

void reject_unknown(const json& doc, std::initializer_list<const char*> keys, const std::string& where) {
    if (!doc.is_object()) throw BadConfig(where + " must be a JSON object");
    for (const auto& [k, _] : doc.items()) {
        bool known = false;
        for (const char* key : keys) known = known || k == key;
        if (!known) throw BadConfig("unknown config field '" + k + "' in " + where);
    }
}

std::optional<fs::path> config_path(const json& doc, const char* key) {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    return fs::path(config_value<std::string>(doc, key, {}));
}

// ---- HTTP helpers -------------------------------------------------------

int status_for(const std::string& kind) {
    if (kind == "UnknownSession" || kind == "UnknownVersion" || kind == "UnknownJob" ||
        kind == "MissingArtifact" || kind == "NotFound")
        return 404;
    if (kind == "ParseError") return 400;
    if (kind == "SessionBusy") return 409;
    return 422;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::string& kind, const std::string& message) {
    send_json(res, status_for(kind), {{"error", kind}, {"message", message}});
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e.kind(), e.what());
        } catch (const json::exception& e) {
            send_error(res, "ParseError", e.what());
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
        }
    };
}

json body_of(const httplib::Request& req) {
    json doc;
    try {
        doc = json::parse(req.body);
    } catch (const json::exception&) {
        throw ParseError("request body is not valid JSON");
    }
    if (!doc.is_object()) throw ParseError("request body must be a JSON object");
    return doc;
}

template <typename T>
std::optional<T> field(const json& doc, const char* key) {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    const auto& v = doc[key];
    bool ok = false;
    if constexpr (std::is_same_v<T, std::string>)
        ok = v.is_string();
    else if constexpr (std::is_same_v<T, bool>)
        ok = v.is_boolean();
    else if constexpr (std::is_floating_point_v<T>)
        ok = v.is_number();
    else
        ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!ok) throw ParseError(std::string("field '") + key + "' has the wrong type");
    return v.get<T>();
}

template <typename T>
T required(const json& doc, const char* key) {
    auto v = field<T>(doc, key);
    if (!v) throw ParseError(std::string("missing field '") + key + "'");
    return *v;
}

std::size_t query_index(const httplib::Request& req, const char* key, std::optional<std::size_t> fallback = {}) {
    if (!req.has_param(key)) {
        if (fallback) return *fallback;
        throw ParseError(std::string("missing query parameter '") + key + "'");
    }
    const auto s = req.get_param_value(key);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw ParseError(std::string("query parameter '") + key + "' is not a non-negative integer");
    return v;
}

AttentionAdjustment parse_adjustment(const json& doc) {
    if (doc.is_object() && doc.contains("entries")) return adjustment_from_json(doc);
    return adjustment_from_json(json{{"entries", doc}});
}

json scored_json(const std::vector<ScoredModifier>& scored) {
    json out = json::array();
    for (const auto& s : scored)
        out.push_back({{"phrase", s.entry->phrase},
                       {"n", s.entry->n},
                       {"frequency", s.entry->frequency},
                       {"distance", s.distance}});
    return out;
}

}  // namespace

ServiceConfig service_config_from_json(const json& doc) {
    reject_unknown(doc,
                   {"host", "port", "model", "encoder_seed", "catalog_path", "corpus_path", "stopwords_path",
                    "session_dir", "workers", "mining", "refiner", "similarity_threshold"},
                   "config");
    ServiceConfig c;
    c.host = config_value(doc, "host", c.host);
    c.port = config_value(doc, "port", c.port);
    if (c.port < 0 || c.port > 65535) throw BadConfig("port must be in [0, 65535]");
    if (doc.contains("model")) {
        try {
            c.model = model_config_from_json(doc["model"]);
            c.model.validate();
        } catch (const Error& e) {
            throw BadConfig(std::string("model: ") + e.what());
        }
    }
    c.encoder_seed = config_value(doc, "encoder_seed", c.encoder_seed);
    c.catalog_path = config_path(doc, "catalog_path");
    c.corpus_path = config_path(doc, "corpus_path");
    c.stopwords_path = config_path(doc, "stopwords_path");
    c.session_dir = config_value<std::string>(doc, "session_dir", c.session_dir.string());
    c.workers = config_value(doc, "workers", c.workers);
    if (c.workers == 0) throw BadConfig("workers must be at least 1");
    if (doc.contains("mining")) {
        const auto& m = doc["mining"];
        reject_unknown(m, {"min_freq", "top_k", "once_per_prompt"}, "mining");
        c.mining.min_freq = config_value(m, "min_freq", c.mining.min_freq);
        c.mining.top_k = config_value(m, "top_k", c.mining.top_k);
        c.mining.once_per_prompt = config_value(m, "once_per_prompt", c.mining.once_per_prompt);
    }
    if (doc.contains("refiner")) {
        const auto& r = doc["refiner"];
        reject_unknown(r, {"strategy", "k_append", "external_endpoint", "timeout_ms", "duplicate_cosine"}, "refiner");
        const auto strategy = config_value<std::string>(r, "strategy", "heuristic");
        if (strategy == "heuristic")
            c.refiner.strategy = RefinerStrategy::heuristic;
        else if (strategy == "external")
            c.refiner.strategy = RefinerStrategy::external;
        else
            throw BadConfig("refiner.strategy must be 'heuristic' or 'external'");
        c.refiner.k_append = config_value(r, "k_append", c.refiner.k_append);
        if (r.contains("external_endpoint") && !r["external_endpoint"].is_null())
            c.refiner.external_endpoint = config_value<std::string>(r, "external_endpoint", {});
        c.refiner.timeout = std::chrono::milliseconds(config_value<std::int64_t>(r, "timeout_ms", c.refiner.timeout.count()));
        c.refiner.duplicate_cosine = config_value(r, "duplicate_cosine", c.refiner.duplicate_cosine);
    }
    c.similarity_threshold = config_value(doc, "similarity_threshold", c.similarity_threshold);
    return c;
}

ServiceConfig load_service_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw BadConfig("cannot read config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw BadConfig("config is not valid JSON: " + std::string(e.what()));
    }
    return service_config_from_json(doc);
}

json to_json(const ServiceConfig& c) {
    auto opt = [](const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); };
    return {{"host", c.host},
            {"port", c.port},
            {"model", to_json(c.model)},
            {"encoder_seed", c.encoder_seed},
            {"catalog_path", opt(c.catalog_path)},
            {"corpus_path", opt(c.corpus_path)},
            {"stopwords_path", opt(c.stopwords_path)},
            {"session_dir", c.session_dir.string()},
            {"workers", c.workers},
            {"mining",
             {{"min_freq", c.mining.min_freq}, {"top_k", c.mining.top_k}, {"once_per_prompt", c.mining.once_per_prompt}}},
            {"refiner",
             {{"strategy", to_string(c.refiner.strategy)},
              {"k_append", c.refiner.k_append},
              {"external_endpoint", c.refiner.external_endpoint ? json(*c.refiner.external_endpoint) : json(nullptr)},
              {"timeout_ms", c.refiner.timeout.count()},
              {"duplicate_cosine", c.refiner.duplicate_cosine}}},
            {"similarity_threshold", c.similarity_threshold}};
}

std::string to_string(JobState state) {
    switch (state) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
    }
    return "queued";
}

json to_json(const JobTicket& t) {
    return {{"job_id", t.job_id},
            {"session_id", t.session_id},
            {"state", to_string(t.state)},
            {"result_ref", t.result_ref ? json(*t.result_ref) : json(nullptr)},
            {"version_id", t.version_id ? json(*t.version_id) : json(nullptr)},
            {"error", t.error ? json(*t.error) : json(nullptr)}};
}

std::string version_ref(const std::string& session_id, std::size_t version_id) {
    return session_id + "." + std::to_string(version_id);
}

std::optional<std::pair<std::string, std::size_t>> parse_version_ref(const std::string& ref) {
    const auto dot = ref.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == ref.size()) return std::nullopt;
    std::size_t n = 0;
    const char* first = ref.data() + dot + 1;
    const char* last = ref.data() + ref.size();
    auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    auto sid = ref.substr(0, dot);
    if (!SessionStore::valid_id(sid)) return std::nullopt;
    return std::make_pair(std::move(sid), n);
}

// ---- worker pool --------------------------------------------------------

WorkerPool::WorkerPool(std::size_t threads) {
    for (std::size_t i = 0; i < threads; ++i) threads_.emplace_back([this] { run(); });
}

WorkerPool::~WorkerPool() { shutdown(); }

void WorkerPool::submit(std::function<void()> task) {
    {
        std::lock_guard lock(mutex_);
        tasks_.push_back(std::move(task));
    }
    cv_.notify_one();
}

void WorkerPool::shutdown() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_)
        if (t.joinable()) t.join();
    threads_.clear();
}

void WorkerPool::run() {
    for (;;) {
        std::function<void()> task;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [&] { return stopping_ || !tasks_.empty(); });
            if (tasks_.empty()) return;
            task = std::move(tasks_.front());
            tasks_.pop_front();
        }
        task();
    }
}

// ---- service ------------------------------------------------------------

namespace {

TextEncoder make_encoder(const ServiceConfig& c) {
    try {
        return TextEncoder(c.encoder_seed, c.stopwords_path ? load_stopwords(*c.stopwords_path) : default_stopwords());
    } catch (const Error& e) {
        throw BadConfig(std::string("stopwords: ") + e.what());
    }
}

std::unique_ptr<ToyBackbone> make_model(const ModelConfig& m) {
    try {
        return std::make_unique<ToyBackbone>(m);
    } catch (const Error& e) {
        throw BadConfig(std::string("model: ") + e.what());
    }
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      model_(make_model(config_.model)),
      encoder_(make_encoder(config_)),
      store_([&] {
          try {
              return SessionStore(config_.session_dir);
          } catch (const fs::filesystem_error& e) {
              throw BadConfig(std::string("session_dir: ") + e.what());
          }
      }()) {
    try {
        if (config_.corpus_path) corpus_ = load_corpus(*config_.corpus_path);
        if (config_.catalog_path)
            catalog_ = load_catalog(*config_.catalog_path);
        else if (config_.corpus_path)
            catalog_ = mine(corpus_, encoder_, config_.mining, config_.corpus_path->string());
    } catch (const Error& e) {
        throw BadConfig(e.kind() + ": " + e.what());
    }
    if (!catalog_.empty() && catalog_.encoder_seed() != config_.encoder_seed)
        throw BadConfig("catalog was built with a different encoder_seed");
    server_ = std::make_unique<httplib::Server>();
    routes();
}

Service::~Service() { stop(); }

void Service::set_job_observer(std::function<void(const JobTicket&)> fn) {
    std::lock_guard lock(jobs_mutex_);
    observer_ = std::move(fn);
}

std::optional<JobTicket> Service::job(const std::string& job_id) const {
    std::lock_guard lock(jobs_mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

void Service::update_job(const std::string& job_id, const std::function<void(JobTicket&)>& fn) {
    std::lock_guard lock(jobs_mutex_);
    fn(jobs_.at(job_id));
}

void Service::start() {
    if (running_) return;
    // SO_REUSEPORT would let a second server share the port silently.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (config_.port == 0) {
        bound_port_ = server_->bind_to_any_port(config_.host);
        if (bound_port_ < 0) throw PortInUse("cannot bind " + config_.host);
    } else {
        if (!server_->bind_to_port(config_.host, config_.port))
            throw PortInUse("port " + std::to_string(config_.port) + " is in use on " + config_.host);
        bound_port_ = config_.port;
    }
    pool_ = std::make_unique<WorkerPool>(config_.workers);
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    running_ = true;
}

void Service::stop() {
    if (!running_) return;
    server_->stop();
    if (listener_.joinable()) listener_.join();
    pool_->shutdown();  // in-flight and queued jobs finish and persist
    running_ = false;
}

std::string Service::enqueue(const std::string& session_id, std::function<VersionDraft()> work) {
    std::string job_id;
    {
        std::lock_guard lock(jobs_mutex_);
        if (busy_sessions_.count(session_id))
            throw SessionBusy("session " + session_id + " already has a job in flight");
        job_id = "job" + std::to_string(++next_job_);
        jobs_[job_id] = JobTicket{job_id, session_id, JobState::queued, {}, {}, {}};
        busy_sessions_.insert(session_id);
    }
    pool_->submit([this, job_id, session_id, work = std::move(work)] {
        std::function<void(const JobTicket&)> observer;
        JobTicket running;
        {
            std::lock_guard lock(jobs_mutex_);
            auto& t = jobs_.at(job_id);
            t.state = JobState::running;
            running = t;
            observer = observer_;
        }
        if (observer) observer(running);
        try {
            auto draft = work();
            const auto id = store_.with_session(
                session_id, [&](Session& s) { return s.commit(std::move(draft)).id; }, true);
            std::lock_guard lock(jobs_mutex_);
            auto& t = jobs_.at(job_id);
            t.state = JobState::done;
            t.version_id = id;
            t.result_ref = version_ref(session_id, id);
            busy_sessions_.erase(session_id);
        } catch (const std::exception& e) {
            const auto* err = dynamic_cast<const Error*>(&e);
            std::lock_guard lock(jobs_mutex_);
            auto& t = jobs_.at(job_id);
            t.state = JobState::failed;
            t.error = err ? err->kind() + ": " + e.what() : std::string(e.what());
            busy_sessions_.erase(session_id);
        }
    });
    return job_id;
}

void Service::routes() {
    auto& s = *server_;

    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            const std::string kind = res.status == 404 ? "NotFound" : "HttpError";
            res.set_content(json{{"error", kind}}.dump(), "application/json");
        }
    });

    s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    s.Post("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 201, {{"session_id", store_.create()}});
    }));

    s.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, manifest(store_.snapshot(req.matches[1])));
    }));

    s.Get(R"(/sessions/([^/]+)/versions)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        json list = json::array();
        store_.with_session(sid, [&](const Session& session) {
            for (const auto& v : session.versions) {
                auto j = to_json(v);
                j["ref"] = version_ref(sid, v.id);
                list.push_back(std::move(j));
            }
        });
        send_json(res, 200, list);
    }));

    s.Post(R"(/sessions/([^/]+)/refine)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        if (!store_.exists(req.matches[1])) throw UnknownSession("no session " + std::string(req.matches[1]));
        const auto doc = body_of(req);
        const auto prompt = required<std::string>(doc, "prompt");
        send_json(res, 200, to_json(refine(prompt, catalog_, encoder_.stopwords(), config_.refiner)));
    }));

    s.Post(R"(/sessions/([^/]+)/generate)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        if (!store_.exists(sid)) throw UnknownSession("no session " + sid);
        const auto doc = body_of(req);
        const auto text = required<std::string>(doc, "prompt");
        auto seed = field<std::uint64_t>(doc, "seed");
        const bool trace = field<bool>(doc, "trace").value_or(false);
        const auto parent_req = field<std::size_t>(doc, "parent");
        AttentionAdjustment adjustment;
        if (doc.contains("adjustment") && !doc["adjustment"].is_null())
            adjustment = parse_adjustment(doc["adjustment"]);

        if (text.find_first_not_of(" \t\r\n\f\v") == std::string::npos) throw EmptyPrompt("prompt is empty");
        const Prompt prompt = encoder_.tokenize(text);
        validate(adjustment, prompt);

        std::optional<std::size_t> parent;
        std::uint64_t parent_seed = 0;
        store_.with_session(sid, [&](const Session& session) {
            parent = parent_req ? parent_req : session.latest();
            if (parent) parent_seed = session.get(*parent).seed;
        });
        if (!seed) seed = parent_seed;

        const auto job_id = enqueue(sid, [this, prompt, adjustment, seed = *seed, trace, parent] {
            const auto embedding = encoder_.encode(prompt);
            auto result = generate(*model_, embedding, seed, &adjustment, TraceOptions{trace, false});
            VersionDraft d;
            d.parent = parent;
            d.prompt = prompt.raw;
            d.adjustment = adjustment;
            d.seed = seed;
            d.encoder_seed = encoder_.seed();
            d.kind = adjustment.empty() ? VersionKind::diffuse : VersionKind::adjust;
            d.image = std::move(result.image.rgb);
            if (result.trace) {
                const auto ex = aggregate(*result.trace, prompt, model_->config());
                d.explanation = ExplanationArtifact{
                    explanation_summary(ex, prompt, model_->config(), config_.similarity_threshold),
                    encode_chex(heatmaps_to_chex(ex, model_->config()))};
            }
            return d;
        });
        send_json(res, 202, to_json(*job(job_id)));
    }));

    s.Post(R"(/sessions/([^/]+)/inpaint)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const std::string sid = req.matches[1];
        if (!store_.exists(sid)) throw UnknownSession("no session " + sid);
        const auto doc = body_of(req);
        const auto source_id = required<std::size_t>(doc, "version_id");
        if (!doc.contains("strokes")) throw ParseError("missing field 'strokes'");
        auto strokes = strokes_from_json(doc["strokes"]);
        const auto aux = field<std::string>(doc, "prompt");
        auto seed = field<std::uint64_t>(doc, "seed");
        InpaintOptions options;
        options.strength = field<double>(doc, "strength").value_or(options.strength);
        if (!(options.strength > 0.0 && options.strength <= 1.0))
            throw InvalidConfig("inpaint strength must be in (0, 1]");
        if (aux) encoder_.tokenize(*aux);
        rasterize_strokes(strokes, model_->config().img_w(), model_->config().img_h());

        VersionDraft base;
        store_.with_session(sid, [&](const Session& session) {
            const auto& src = session.get(source_id);
            base.prompt = src.prompt;
            base.adjustment = src.adjustment;
            base.image = src.image;
            if (!seed) seed = src.seed;
        });

        const auto job_id = enqueue(sid, [this, base, source_id, strokes, aux, seed = *seed, options] {
            InpaintRequest request{base.image, rasterize_strokes(strokes, base.image.width, base.image.height),
                                   aux, seed};
            VersionDraft d;
            d.parent = source_id;
            d.prompt = base.prompt;
            d.adjustment = base.adjustment;
            d.seed = seed;
            d.encoder_seed = encoder_.seed();
            d.kind = VersionKind::inpaint;
            d.image = inpaint(*model_, encoder_, request, options);
            d.inpaint = InpaintInputs{source_id, strokes, aux, options};
            return d;
        });
        send_json(res, 202, to_json(*job(job_id)));
    }));

    s.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto t = job(req.matches[1]);
        if (!t) throw UnknownJob("no job " + std::string(req.matches[1]));
        send_json(res, 200, to_json(*t));
    }));

    auto with_version = [this](const std::string& ref, const std::function<void(const Version&)>& fn) {
        const auto parsed = parse_version_ref(ref);
        if (!parsed) throw UnknownVersion("malformed version ref " + ref);
        store_.with_session(parsed->first, [&](const Session& session) { fn(session.get(parsed->second)); });
    };

    s.Get(R"(/versions/([^/]+)/image)", guarded([with_version](const httplib::Request& req, httplib::Response& res) {
        with_version(req.matches[1], [&](const Version& v) {
            const auto png = encode_png(v.image);
            res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
        });
    }));

    s.Get(R"(/versions/([^/]+)/explanation)", guarded([with_version](const httplib::Request& req, httplib::Response& res) {
        with_version(req.matches[1], [&](const Version& v) {
            if (!v.explanation) throw MissingArtifact("version was generated without a trace");
            send_json(res, 200, v.explanation->summary);
        });
    }));

    s.Get(R"(/versions/([^/]+)/explanation/heatmaps)",
          guarded([with_version](const httplib::Request& req, httplib::Response& res) {
              with_version(req.matches[1], [&](const Version& v) {
                  if (!v.explanation) throw MissingArtifact("version was generated without a trace");
                  const auto& b = v.explanation->heatmaps;
                  res.set_content(reinterpret_cast<const char*>(b.data()), b.size(), "application/octet-stream");
              });
          }));

    s.Get(R"(/sessions/([^/]+)/diff)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto a = query_index(req, "a");
        const auto b = query_index(req, "b");
        const auto d = store_.with_session(req.matches[1], [&](const Session& session) { return diff(session, a, b); });
        send_json(res, 200, to_json(d));
    }));

    s.Get("/modifiers", guarded([this](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("query")) throw ParseError("missing query parameter 'query'");
        json out = json::array();
        for (const auto& r : search(corpus_, req.get_param_value("query"), encoder_.stopwords()))
            out.push_back(to_json(r));
        send_json(res, 200, {{"query", req.get_param_value("query")}, {"results", out}});
    }));

    auto ranked = [this](bool near) {
        return guarded([this, near](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("phrase")) throw ParseError("missing query parameter 'phrase'");
            const auto phrase = req.get_param_value("phrase");
            const auto k = query_index(req, "k", 3);
            const auto scored = near ? similar(catalog_, encoder_, phrase, k) : dissimilar(catalog_, encoder_, phrase, k);
            send_json(res, 200, {{"phrase", phrase}, {"results", scored_json(scored)}});
        });
    };
    s.Get("/modifiers/similar", ranked(true));
    s.Get("/modifiers/dissimilar", ranked(false));
}

}  // namespace charm
