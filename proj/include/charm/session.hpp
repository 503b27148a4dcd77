#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "charm/attention_control.hpp"
#include "charm/image.hpp"
#include "charm/inpaint.hpp"

namespace charm {

inline constexpr int kSessionSchemaVersion = 1;

enum class VersionKind { diffuse, adjust, inpaint };

std::string to_string(VersionKind kind);
VersionKind version_kind_from_string(const std::string& s);

/// What an inpaint version needs to be regenerated.
struct InpaintInputs {
    std::size_t source_version = 0;
    std::vector<Stroke> strokes;
    std::optional<std::string> prompt;
    InpaintOptions options;

    bool operator==(const InpaintInputs&) const = default;
};

/// Persisted explanation: JSON summary plus float32 CHEX heatmaps.
struct ExplanationArtifact {
    nlohmann::json summary;
    Bytes heatmaps;

    bool operator==(const ExplanationArtifact&) const = default;
};

struct VersionDraft {
    std::optional<std::size_t> parent;
    std::string prompt;
    AttentionAdjustment adjustment;
    std::uint64_t seed = 0;
    std::uint64_t encoder_seed = 0;
    VersionKind kind = VersionKind::diffuse;
    RgbImage image;
    std::optional<ExplanationArtifact> explanation;
    std::optional<InpaintInputs> inpaint;

    bool operator==(const VersionDraft&) const = default;
};

/// Immutable snapshot in a session's history.
struct Version : VersionDraft {
    std::size_t id = 0;
    std::int64_t created_at = 0;  // ms since the Unix epoch

    std::string image_ref() const { return "ver" + std::to_string(id) + ".png"; }
    std::optional<std::string> explanation_ref() const;

    bool operator==(const Version&) const = default;
};

struct Session {
    std::string id;
    std::vector<Version> versions;
    std::vector<std::size_t> selected;  // at most two ids

    /// Appends with the next dense id. Throws UnknownParent, EmptyImage.
    const Version& commit(VersionDraft draft, std::int64_t created_at);
    const Version& commit(VersionDraft draft);
    /// Throws UnknownVersion.
    const Version& get(std::size_t version_id) const;
    bool contains(std::size_t version_id) const noexcept { return version_id < versions.size(); }
    /// Throws UnknownVersion or InvalidConfig (more than two ids).
    void select(std::vector<std::size_t> ids);
    std::optional<std::size_t> latest() const;

    bool operator==(const Session&) const = default;
};

struct PromptEdit {
    enum class Op { insert, remove };
    Op op = Op::insert;
    std::size_t a_pos = 0;  // position in version a's tokens
    std::size_t b_pos = 0;  // position in version b's tokens
    std::vector<std::string> tokens;

    bool operator==(const PromptEdit&) const = default;
};

struct GammaDelta {
    std::size_t token = 0;
    double before = 1.0;
    double after = 1.0;

    bool operator==(const GammaDelta&) const = default;
};

struct VersionDiff {
    std::size_t a = 0;
    std::size_t b = 0;
    std::vector<PromptEdit> edits;  // change runs only; empty when prompts match
    std::vector<GammaDelta> adjustment;
    std::string image_a;
    std::string image_b;
};

/// Token-level LCS edit script from a to b, grouped into maximal runs.
std::vector<PromptEdit> token_edit_script(const std::vector<std::string>& a,
                                          const std::vector<std::string>& b);

/// Throws UnknownVersion.
VersionDiff diff(const Session& session, std::size_t a, std::size_t b);

nlohmann::json to_json(const Version& version);
nlohmann::json to_json(const VersionDiff& diff);
nlohmann::json manifest(const Session& session);

/// Writes session.json, ver<id>.png and ver<id>.chex into `dir`, with a
/// CRC-32 of every payload file recorded in the manifest.
void persist(const Session& session, const std::filesystem::path& dir);
/// Throws CorruptSession on checksum mismatch, truncation, or malformed
/// manifests; IoError when the directory is unreadable.
Session load(const std::filesystem::path& dir);

/// Directory of sessions, one subdirectory each. Writes to one session are
/// serialized; distinct sessions never contend.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Creates and persists an empty session; returns its id.
    std::string create();
    bool exists(const std::string& id) const;

    /// Runs fn on the session under its lock. Mutating callers must ask for
    /// persistence. Throws UnknownSession.
    template <typename Fn>
    auto with_session(const std::string& id, Fn&& fn, bool persist_after = false);

    Session snapshot(const std::string& id);

    static bool valid_id(const std::string& id);

private:
    struct Slot {
        std::mutex mutex;
        std::optional<Session> session;
    };
    Slot& slot(const std::string& id);

    std::filesystem::path root_;
    std::mutex slots_mutex_;
    std::map<std::string, std::unique_ptr<Slot>> slots_;
};

template <typename Fn>
auto SessionStore::with_session(const std::string& id, Fn&& fn, bool persist_after) {
    Slot& s = slot(id);
    std::lock_guard lock(s.mutex);
    if (!s.session) s.session = load(root_ / id);
    if constexpr (std::is_void_v<decltype(fn(*s.session))>) {
        fn(*s.session);
        if (persist_after) persist(*s.session, root_ / id);
    } else {
        auto result = fn(*s.session);
        if (persist_after) persist(*s.session, root_ / id);
        return result;
    }
}

}  // namespace charm
