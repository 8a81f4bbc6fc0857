#include "scriptboard/cinematographer.hpp"

#include "scriptboard/director.hpp"
#include "scriptboard/error.hpp"
#include "scriptboard/hashing.hpp"
#include "scriptboard/text_util.hpp"

#include <future>

namespace scriptboard {

BasePromptConfig BasePromptConfig::characters() { return {}; }

BasePromptConfig BasePromptConfig::spots() {
    BasePromptConfig c;
    c.orientation = Orientation::landscape;
    c.framing = Framing::full_body;
    c.style_suffix = "clean storyboard illustration, wide establishing view";
    c.negative_terms = {"people", "characters", "text", "watermark"};
    return c;
}

int BasePromptConfig::width() const { return orientation == Orientation::portrait ? 512 : 1024; }
int BasePromptConfig::height() const { return orientation == Orientation::portrait ? 768 : 576; }

namespace {

std::string framing_clause(const BasePromptConfig& c, bool character) {
    std::string shot;
    if (!character) {
        shot = "empty location, no people";
    } else {
        switch (c.framing) {
        case Framing::full_body: shot = "full body, standing, arms relaxed"; break;
        case Framing::half_body: shot = "half body, from the waist up"; break;
        case Framing::head_and_shoulders: shot = "head and shoulders"; break;
        }
        shot += ", facing the viewer, plain white background";
    }
    return shot + (c.orientation == Orientation::portrait ? ", portrait orientation" : ", landscape orientation");
}

std::string assemble(const std::vector<std::string>& parts, const std::string& framing, const std::string& suffix) {
    std::string body;
    for (const auto& p : parts) {
        if (is_blank(p) || p == kUnspecified) continue;
        if (!body.empty()) body += ", ";
        body += collapse_whitespace(p);
    }
    std::string head = body + ". " + framing;
    if (head.size() > kMaxPromptLength) return utf8_truncate(head, kMaxPromptLength);
    if (suffix.empty()) return head;
    std::string with = head + ". " + suffix;
    if (with.size() <= kMaxPromptLength) return with;
    std::string cut = utf8_truncate(with, kMaxPromptLength);
    while (!cut.empty() && (cut.back() == ' ' || cut.back() == ',')) cut.pop_back();
    return cut;
}

} // namespace

std::string build_base_prompt(const CharacterRecord& r, const BasePromptConfig& config) {
    if (r.refinement_round < 1)
        throw Error(Errc::UnrefinedRecord, "character " + r.id + " has not been refined");
    const auto& p = r.refined_profile;
    return assemble({r.name, p.age_band, p.hair, p.clothing, p.build, p.distinguishing_features},
                    framing_clause(config, true), config.style_suffix);
}

std::string build_base_prompt(const SpotRecord& r, const BasePromptConfig& config) {
    std::string place = (r.interior_exterior == InteriorExterior::INT   ? "interior of "
                         : r.interior_exterior == InteriorExterior::EXT ? "exterior of "
                                                                        : "") +
                        r.name;
    std::string time = r.time_of_day == TimeOfDay::DAY ? "daytime" : r.time_of_day == TimeOfDay::NIGHT ? "night" : "";
    std::vector<std::string> parts{place, time};
    if (r.refinement_round >= 1) {
        for (std::size_t i = 0; i < SpotProfile::field_names.size(); ++i) parts.push_back(r.refined_profile.at(i));
    } else {
        parts.push_back(utf8_truncate(r.description, 200));
    }
    return assemble(parts, framing_clause(config, false), config.style_suffix);
}

std::string negative_prompt(const BasePromptConfig& config) {
    std::string out;
    for (const auto& t : config.negative_terms) out += (out.empty() ? "" : ", ") + t;
    return out;
}

// ---------------------------------------------------------------------------
// Asset store

AssetStore::AssetStore(std::filesystem::path root) : root_(std::move(root)), manifest_(nlohmann::json::object()) {
    auto path = root_ / "assets" / "manifest.json";
    if (std::filesystem::exists(path)) {
        try {
            manifest_ = nlohmann::json::parse(read_text_file(path));
        } catch (const nlohmann::json::exception&) {
            manifest_ = nlohmann::json::object();
        }
    }
}

std::string AssetStore::character_ref_path(const std::string& id) { return "assets/characters/" + id + "/ref.png"; }
std::string AssetStore::character_view_path(const std::string& id, int view) {
    return "assets/characters/" + id + "/view_" + std::to_string(view) + ".png";
}
std::string AssetStore::spot_ref_path(const std::string& id) { return "assets/spots/" + id + "/ref.png"; }

std::optional<ImageAsset> AssetStore::find(const std::string& asset_id, const std::string& cache_key) const {
    nlohmann::json entry;
    {
        std::lock_guard lock(mutex_);
        if (!manifest_.contains(asset_id)) return std::nullopt;
        entry = manifest_[asset_id];
    }
    if (entry.value("cache_key", std::string{}) != cache_key) return std::nullopt;
    try {
        return load(asset_id);
    } catch (const Error&) {
        return std::nullopt;
    }
}

void AssetStore::put(const ImageAsset& asset, const std::string& relative_path, const std::string& cache_key) {
    save_png(asset.image, root_ / relative_path);
    nlohmann::json entry = {{"path", relative_path},
                            {"hash", to_hex(asset.content_hash)},
                            {"cache_key", cache_key},
                            {"role", asset.role},
                            {"owner_id", asset.owner_id}};
    if (asset.view_index) entry["view_index"] = *asset.view_index;
    std::lock_guard lock(mutex_);
    manifest_[asset.id] = entry;
}

bool AssetStore::contains(const std::string& asset_id) const {
    std::lock_guard lock(mutex_);
    return manifest_.contains(asset_id);
}

ImageAsset AssetStore::load(const std::string& asset_id) const {
    nlohmann::json entry;
    {
        std::lock_guard lock(mutex_);
        if (!manifest_.contains(asset_id)) throw Error(Errc::AssetMissing, "no asset " + asset_id + " in manifest");
        entry = manifest_[asset_id];
    }
    auto path = root_ / entry.at("path").get<std::string>();
    if (!std::filesystem::exists(path)) throw Error(Errc::AssetMissing, path.string());
    Image image;
    try {
        image = load_png(path);
    } catch (const Error& e) {
        throw Error(Errc::AssetMissing, path.string() + ": " + e.what());
    }
    if (to_hex(image.content_hash()) != entry.at("hash").get<std::string>())
        throw Error(Errc::AssetMissing, path.string() + " does not match its recorded hash");
    std::optional<int> view;
    if (entry.contains("view_index")) view = entry["view_index"].get<int>();
    return make_asset(asset_id, entry.at("role").get<AssetRole>(), entry.at("owner_id").get<std::string>(), view,
                      std::move(image));
}

void AssetStore::save_manifest() const {
    std::lock_guard lock(mutex_);
    write_file(root_ / "assets" / "manifest.json", manifest_.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Generation

namespace {

bool backend_failure(Errc c) {
    return c == Errc::BackendError || c == Errc::Timeout || c == Errc::AuthMissing || c == Errc::NonRetryableStatus ||
           c == Errc::MalformedResponse || c == Errc::DecodeError || c == Errc::DimensionRejected ||
           c == Errc::WrongCount;
}

struct Job {
    std::string asset_id;
    std::string owner;
    AssetRole role;
    ImageRequest request;
    std::string path;
};

} // namespace

ReferenceAssets generate_reference_images(const ScriptIR& ir, const BasePromptConfig& character_config,
                                          const BasePromptConfig& spot_config, const ImageBackend& backend,
                                          AssetStore& store, std::uint64_t seed) {
    std::vector<Job> jobs;
    for (const auto& c : ir.characters) {
        ImageRequest r;
        r.prompt = build_base_prompt(c, character_config);
        r.negative_prompt = negative_prompt(character_config);
        r.seed = derive_seed(seed, character_ref(c.id));
        r.width = character_config.width();
        r.height = character_config.height();
        r.role = AssetRole::character_ref;
        r.owner_id = c.id;
        jobs.push_back({"character:" + c.id, c.id, AssetRole::character_ref, r, AssetStore::character_ref_path(c.id)});
    }
    for (const auto& s : ir.spots) {
        ImageRequest r;
        r.prompt = build_base_prompt(s, spot_config);
        r.negative_prompt = negative_prompt(spot_config);
        r.seed = derive_seed(seed, spot_ref(s.id));
        r.width = spot_config.width();
        r.height = spot_config.height();
        r.role = AssetRole::spot_ref;
        r.owner_id = s.id;
        jobs.push_back({"spot:" + s.id, s.id, AssetRole::spot_ref, r, AssetStore::spot_ref_path(s.id)});
    }

    struct Outcome {
        std::optional<ImageAsset> asset;
        bool cached = false;
        std::string failure;
    };
    std::vector<std::future<Outcome>> tasks;
    for (const auto& job : jobs) {
        tasks.push_back(std::async(std::launch::async, [&job, &backend, &store] {
            Outcome o;
            const auto& r = job.request;
            const std::string key = digest_hex(backend.identity() + "\n" + r.prompt + "\n" + r.negative_prompt + "\n" +
                                               std::to_string(r.seed) + "\n" + std::to_string(r.width) + "x" +
                                               std::to_string(r.height));
            if (auto hit = store.find(job.asset_id, key)) {
                o.asset = std::move(hit);
                o.cached = true;
                return o;
            }
            try {
                ImageAsset a = backend.text_to_image(r);
                a.id = job.asset_id;
                store.put(a, job.path, key);
                o.asset = std::move(a);
            } catch (const Error& e) {
                if (!backend_failure(e.code())) throw;
                o.failure = job.asset_id + " (" + e.what() + ")";
            }
            return o;
        }));
    }
    ReferenceAssets out;
    std::vector<std::string> failed;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        Outcome o = tasks[i].get();
        if (!o.asset) {
            failed.push_back(o.failure);
            continue;
        }
        (o.cached ? out.cache_hits : out.generated)++;
        auto& target = jobs[i].role == AssetRole::spot_ref ? out.spots : out.characters;
        target.emplace(jobs[i].owner, std::move(*o.asset));
    }
    store.save_manifest();
    if (!failed.empty()) {
        std::string list;
        for (const auto& f : failed) list += (list.empty() ? "" : "; ") + f;
        throw Error(Errc::BackendError, "reference generation failed for: " + list);
    }
    return out;
}

void MultiViewSet::validate() const {
    for (int x = 0; x < kViewCount; ++x) {
        const auto& v = views[static_cast<std::size_t>(x)];
        if (v.role != AssetRole::character_view || v.view_index != x || v.owner_id != character_id)
            throw Error(Errc::InvariantBreach, "multi-view set of " + character_id + " is inconsistent at view " +
                                                   std::to_string(x));
        v.validate();
    }
}

std::map<std::string, MultiViewSet> generate_multiview(const std::map<std::string, ImageAsset>& character_refs,
                                                       const MultiviewBackend& backend, AssetStore& store) {
    std::vector<std::pair<std::string, std::future<MultiViewSet>>> tasks;
    for (const auto& [id, ref] : character_refs) {
        tasks.emplace_back(id, std::async(std::launch::async, [&id = id, &ref = ref, &backend, &store] {
            if (ref.role != AssetRole::character_ref)
                throw Error(Errc::InvalidInput, "asset " + ref.id + " is not a character reference");
            const std::string key = digest_hex(backend.identity() + "\n" + to_hex(ref.content_hash));
            MultiViewSet set;
            set.character_id = id;
            bool cached = true;
            for (int x = 0; x < kViewCount && cached; ++x) {
                auto hit = store.find("character:" + id + "/view_" + std::to_string(x), key);
                if (!hit) cached = false;
                else set.views[static_cast<std::size_t>(x)] = std::move(*hit);
            }
            if (!cached) {
                auto views = backend.image_to_multiview(ref);
                if (views.size() != kViewCount)
                    throw Error(Errc::WrongCount, "expected 8 views for " + id + ", got " + std::to_string(views.size()));
                for (int x = 0; x < kViewCount; ++x) {
                    ImageAsset v = std::move(views[static_cast<std::size_t>(x)]);
                    v.id = "character:" + id + "/view_" + std::to_string(x);
                    v.owner_id = id;
                    store.put(v, AssetStore::character_view_path(id, x), key);
                    set.views[static_cast<std::size_t>(x)] = std::move(v);
                }
            }
            set.validate();
            return set;
        }));
    }
    std::map<std::string, MultiViewSet> out;
    std::exception_ptr first_error;
    for (auto& [id, task] : tasks) {
        try {
            out.emplace(id, task.get());
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    store.save_manifest();
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

ReferenceAssets load_reference_assets(const ScriptIR& ir, const AssetStore& store) {
    ReferenceAssets out;
    for (const auto& c : ir.characters) out.characters.emplace(c.id, store.load("character:" + c.id));
    for (const auto& s : ir.spots) out.spots.emplace(s.id, store.load("spot:" + s.id));
    return out;
}

std::map<std::string, MultiViewSet> load_multiview_sets(const ScriptIR& ir, const AssetStore& store) {
    std::map<std::string, MultiViewSet> out;
    for (const auto& c : ir.characters) {
        MultiViewSet set;
        set.character_id = c.id;
        for (int x = 0; x < kViewCount; ++x)
            set.views[static_cast<std::size_t>(x)] = store.load("character:" + c.id + "/view_" + std::to_string(x));
        set.validate();
        out.emplace(c.id, std::move(set));
    }
    return out;
}

} // namespace scriptboard
