#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "charm/diffusion.hpp"
#include "charm/explain.hpp"
#include "charm/modifiers.hpp"
#include "charm/refine.hpp"
#include "charm/session.hpp"
#include "charm/text_encoder.hpp"

namespace httplib {
class Server;
}

namespace charm {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 binds an ephemeral port
    ModelConfig model;
    std::uint64_t encoder_seed = 0;
    std::optional<std::filesystem::path> catalog_path;
    std::optional<std::filesystem::path> corpus_path;
    std::optional<std::filesystem::path> stopwords_path;
    std::filesystem::path session_dir = "sessions";
    std::size_t workers = 2;
    MiningOptions mining;
    RefinerConfig refiner;
    double similarity_threshold = kDefaultSimilarityThreshold;
};

/// Parses the JSON config; unknown keys and wrong types throw BadConfig.
ServiceConfig service_config_from_json(const nlohmann::json& doc);
ServiceConfig load_service_config(const std::filesystem::path& path);
nlohmann::json to_json(const ServiceConfig& config);

enum class JobState { queued, running, done, failed };
std::string to_string(JobState state);

struct JobTicket {
    std::string job_id;
    std::string session_id;
    JobState state = JobState::queued;
    std::optional<std::string> result_ref;  // "<session>.<version>"
    std::optional<std::size_t> version_id;
    std::optional<std::string> error;
};

nlohmann::json to_json(const JobTicket& ticket);

/// "<session>.<version>" and back; nullopt when malformed.
std::string version_ref(const std::string& session_id, std::size_t version_id);
std::optional<std::pair<std::string, std::size_t>> parse_version_ref(const std::string& ref);

/// Fixed-size pool; tasks run in submission order.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t threads);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    void submit(std::function<void()> task);
    /// Finishes queued tasks, then joins.
    void shutdown();

private:
    void run();

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::function<void()>> tasks_;
    std::vector<std::thread> threads_;
    bool stopping_ = false;
};

class Service {
public:
    /// Builds the model, loads or mines the catalog. Throws BadConfig.
    explicit Service(ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread. Throws PortInUse.
    void start();
    /// Stops accepting requests, drains jobs, flushes sessions.
    void stop();
    int port() const noexcept { return bound_port_; }
    bool running() const noexcept { return running_; }

    /// Called on the worker thread right after a job turns running.
    void set_job_observer(std::function<void(const JobTicket&)> fn);

    const ServiceConfig& config() const noexcept { return config_; }
    const ModifierCatalog& catalog() const noexcept { return catalog_; }
    const Backbone& model() const noexcept { return *model_; }
    SessionStore& sessions() noexcept { return store_; }
    std::optional<JobTicket> job(const std::string& job_id) const;

private:
    void routes();
    std::string enqueue(const std::string& session_id, std::function<VersionDraft()> work);
    void update_job(const std::string& job_id, const std::function<void(JobTicket&)>& fn);

    ServiceConfig config_;
    std::unique_ptr<ToyBackbone> model_;
    TextEncoder encoder_;
    Corpus corpus_;
    ModifierCatalog catalog_;
    SessionStore store_;

    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
    std::atomic<bool> running_{false};
    int bound_port_ = 0;

    mutable std::mutex jobs_mutex_;
    std::map<std::string, JobTicket> jobs_;
    std::set<std::string> busy_sessions_;
    std::uint64_t next_job_ = 0;
    std::function<void(const JobTicket&)> observer_;
    std::unique_ptr<WorkerPool> pool_;
};

}  // namespace charm
