#include "charm/session.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>

#include "charm/chex.hpp"
#include "charm/error.hpp"
#include "charm/text_encoder.hpp"

namespace charm {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "session.json";

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::vector<std::string> token_texts(const std::string& prompt) {
    std::vector<std::string> out;
    for (auto& t : split_tokens(prompt, default_stopwords())) out.push_back(std::move(t.text));
    return out;
}

Bytes as_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

void write_atomically(const fs::path& path, const Bytes& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    write_file(tmp, bytes);
    fs::rename(tmp, path);
}

nlohmann::json inpaint_json(const InpaintInputs& in) {
    return {{"source_version", in.source_version},
            {"strokes", to_json(in.strokes)},
            {"prompt", in.prompt ? nlohmann::json(*in.prompt) : nlohmann::json(nullptr)},
            {"strength", in.options.strength},
            {"blend_every_step", in.options.blend_every_step}};
}

InpaintInputs inpaint_from_json(const nlohmann::json& j) {
    InpaintInputs in;
    in.source_version = j.at("source_version").get<std::size_t>();
    in.strokes = strokes_from_json(j.at("strokes"));
    if (!j.at("prompt").is_null()) in.prompt = j.at("prompt").get<std::string>();
    in.options.strength = j.at("strength").get<double>();
    in.options.blend_every_step = j.at("blend_every_step").get<bool>();
    return in;
}

}  // namespace

std::string to_string(VersionKind kind) {
    switch (kind) {
        case VersionKind::diffuse: return "diffuse";
        case VersionKind::adjust: return "adjust";
        case VersionKind::inpaint: return "inpaint";
    }
    return "diffuse";
}

VersionKind version_kind_from_string(const std::string& s) {
    if (s == "diffuse") return VersionKind::diffuse;
    if (s == "adjust") return VersionKind::adjust;
    if (s == "inpaint") return VersionKind::inpaint;
    throw ParseError("unknown version kind: " + s);
}

std::optional<std::string> Version::explanation_ref() const {
    if (!explanation) return std::nullopt;
    return "ver" + std::to_string(id) + ".chex";
}

const Version& Session::commit(VersionDraft draft, std::int64_t created_at) {
    if (draft.parent && !contains(*draft.parent))
        throw UnknownParent("parent version " + std::to_string(*draft.parent) + " does not exist");
    if (draft.image.empty()) throw EmptyImage("a version needs an image");
    if (draft.inpaint && !contains(draft.inpaint->source_version))
        throw UnknownParent("inpaint source version " + std::to_string(draft.inpaint->source_version) +
                            " does not exist");
    Version v;
    static_cast<VersionDraft&>(v) = std::move(draft);
    v.id = versions.size();
    v.created_at = created_at;
    versions.push_back(std::move(v));
    return versions.back();
}

const Version& Session::commit(VersionDraft draft) { return commit(std::move(draft), now_ms()); }

const Version& Session::get(std::size_t version_id) const {
    if (!contains(version_id))
        throw UnknownVersion("version " + std::to_string(version_id) + " not in session " + id);
    return versions[version_id];
}

void Session::select(std::vector<std::size_t> ids) {
    if (ids.size() > 2) throw InvalidConfig("at most two versions can be selected");
    for (auto i : ids) get(i);
    selected = std::move(ids);
}

std::optional<std::size_t> Session::latest() const {
    if (versions.empty()) return std::nullopt;
    return versions.back().id;
}

std::vector<PromptEdit> token_edit_script(const std::vector<std::string>& a,
                                          const std::vector<std::string>& b) {
    const std::size_t n = a.size(), m = b.size();
    // lcs[i][j] = LCS length of a[i..] and b[j..]
    std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    std::vector<PromptEdit> script;
    auto push = [&](PromptEdit::Op op, std::size_t i, std::size_t j, const std::string& tok) {
        if (!script.empty()) {
            auto& last = script.back();
            const bool contiguous = op == PromptEdit::Op::remove
                                        ? last.a_pos + last.tokens.size() == i && last.b_pos == j
                                        : last.b_pos + last.tokens.size() == j && last.a_pos == i;
            if (last.op == op && contiguous) {
                last.tokens.push_back(tok);
                return;
            }
        }
        script.push_back({op, i, j, {tok}});
    };
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i] == b[j]) {
            ++i;
            ++j;
        } else if (j == m || (i < n && lcs[i + 1][j] >= lcs[i][j + 1])) {
            push(PromptEdit::Op::remove, i, j, a[i]);
            ++i;
        } else {
            push(PromptEdit::Op::insert, i, j, b[j]);
            ++j;
        }
    }
    return script;
}

VersionDiff diff(const Session& session, std::size_t a, std::size_t b) {
    const auto& va = session.get(a);
    const auto& vb = session.get(b);
    VersionDiff d;
    d.a = a;
    d.b = b;
    d.edits = token_edit_script(token_texts(va.prompt), token_texts(vb.prompt));
    std::map<std::size_t, std::pair<double, double>> gammas;
    for (const auto& [t, g] : va.adjustment.entries) gammas[t] = {g, vb.adjustment.gamma(t)};
    for (const auto& [t, g] : vb.adjustment.entries) gammas[t] = {va.adjustment.gamma(t), g};
    for (const auto& [t, pair] : gammas)
        if (pair.first != pair.second) d.adjustment.push_back({t, pair.first, pair.second});
    d.image_a = va.image_ref();
    d.image_b = vb.image_ref();
    return d;
}

nlohmann::json to_json(const Version& v) {
    nlohmann::json j{{"id", v.id},
                     {"parent", v.parent ? nlohmann::json(*v.parent) : nlohmann::json(nullptr)},
                     {"prompt", v.prompt},
                     {"adjustment", to_json(v.adjustment)},
                     {"seed", v.seed},
                     {"encoder_seed", v.encoder_seed},
                     {"kind", to_string(v.kind)},
                     {"created_at", v.created_at},
                     {"image_ref", v.image_ref()}};
    const auto ex = v.explanation_ref();
    j["explanation_ref"] = ex ? nlohmann::json(*ex) : nlohmann::json(nullptr);
    j["inpaint"] = v.inpaint ? inpaint_json(*v.inpaint) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const VersionDiff& d) {
    nlohmann::json edits = nlohmann::json::array();
    for (const auto& e : d.edits)
        edits.push_back({{"op", e.op == PromptEdit::Op::insert ? "insert" : "delete"},
                         {"a_pos", e.a_pos},
                         {"b_pos", e.b_pos},
                         {"tokens", e.tokens}});
    nlohmann::json deltas = nlohmann::json::array();
    for (const auto& g : d.adjustment)
        deltas.push_back({{"token", g.token}, {"before", g.before}, {"after", g.after}});
    return {{"a", d.a},
            {"b", d.b},
            {"prompt_edits", std::move(edits)},
            {"adjustment_delta", std::move(deltas)},
            {"images", {{"a", d.image_a}, {"b", d.image_b}}}};
}

nlohmann::json manifest(const Session& session) {
    nlohmann::json versions = nlohmann::json::array();
    for (const auto& v : session.versions) {
        auto j = to_json(v);
        j["image"] = {{"file", v.image_ref()}, {"crc32", crc32(encode_png(v.image))}};
        if (v.explanation)
            j["explanation"] = {{"file", *v.explanation_ref()},
                                {"crc32", crc32(v.explanation->heatmaps)},
                                {"summary", v.explanation->summary}};
        else
            j["explanation"] = nullptr;
        versions.push_back(std::move(j));
    }
    return {{"schema_version", kSessionSchemaVersion},
            {"session_id", session.id},
            {"selected", session.selected},
            {"versions", std::move(versions)}};
}

void persist(const Session& session, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json doc = manifest(session);
    for (const auto& v : session.versions) {
        write_atomically(dir / v.image_ref(), encode_png(v.image));
        if (v.explanation) write_atomically(dir / *v.explanation_ref(), v.explanation->heatmaps);
    }
    write_atomically(dir / kManifest, as_bytes(doc.dump(2) + "\n"));
}

Session load(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("no session directory at " + dir.string());
    const auto raw = read_file(dir / kManifest);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::exception& e) {
        throw CorruptSession(std::string("manifest is not valid JSON: ") + e.what());
    }

    auto checked = [&](const std::string& file, std::uint32_t crc) {
        const fs::path p = dir / file;
        if (file.find('/') != std::string::npos || !fs::exists(p))
            throw CorruptSession("missing artifact " + file);
        auto bytes = read_file(p);
        if (crc32(bytes) != crc) throw CorruptSession("checksum mismatch for " + file);
        return bytes;
    };

    try {
        if (doc.at("schema_version").get<int>() != kSessionSchemaVersion)
            throw CorruptSession("unsupported schema_version");
        Session s;
        s.id = doc.at("session_id").get<std::string>();
        for (const auto& jv : doc.at("versions")) {
            Version v;
            v.id = jv.at("id").get<std::size_t>();
            if (v.id != s.versions.size()) throw CorruptSession("version ids are not dense");
            if (!jv.at("parent").is_null()) {
                v.parent = jv.at("parent").get<std::size_t>();
                if (*v.parent >= v.id) throw CorruptSession("parent does not precede child");
            }
            v.prompt = jv.at("prompt").get<std::string>();
            v.adjustment = adjustment_from_json(jv.at("adjustment"));
            v.seed = jv.at("seed").get<std::uint64_t>();
            v.encoder_seed = jv.at("encoder_seed").get<std::uint64_t>();
            v.kind = version_kind_from_string(jv.at("kind").get<std::string>());
            v.created_at = jv.at("created_at").get<std::int64_t>();
            const auto& img = jv.at("image");
            v.image = decode_png(checked(img.at("file").get<std::string>(), img.at("crc32").get<std::uint32_t>()));
            if (const auto& ex = jv.at("explanation"); !ex.is_null()) {
                ExplanationArtifact art;
                art.heatmaps = checked(ex.at("file").get<std::string>(), ex.at("crc32").get<std::uint32_t>());
                decode_chex(art.heatmaps);
                art.summary = ex.at("summary");
                v.explanation = std::move(art);
            }
            if (const auto& in = jv.at("inpaint"); !in.is_null()) v.inpaint = inpaint_from_json(in);
            s.versions.push_back(std::move(v));
        }
        s.select(doc.at("selected").get<std::vector<std::size_t>>());
        return s;
    } catch (const CorruptSession&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptSession(std::string("malformed manifest: ") + e.what());
    } catch (const Error& e) {
        throw CorruptSession(e.kind() + ": " + e.what());
    }
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

bool SessionStore::valid_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

std::string SessionStore::create() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::string id;
    do {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
        id = buf;
    } while (exists(id));
    Session s;
    s.id = id;
    persist(s, root_ / id);
    return id;
}

bool SessionStore::exists(const std::string& id) const {
    return valid_id(id) && fs::exists(root_ / id / kManifest);
}

SessionStore::Slot& SessionStore::slot(const std::string& id) {
    if (!exists(id)) throw UnknownSession("no session " + id);
    std::lock_guard lock(slots_mutex_);
    auto& p = slots_[id];
    if (!p) p = std::make_unique<Slot>();
    return *p;
}

Session SessionStore::snapshot(const std::string& id) {
    return with_session(id, [](const Session& s) { return s; });
}

}  // namespace charm
