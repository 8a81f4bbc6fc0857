#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scriptboard/backends.hpp"
#include "scriptboard/script_ir.hpp"

namespace scriptboard {

enum class Orientation { portrait, landscape };
enum class Framing { full_body, half_body, head_and_shoulders };
NLOHMANN_JSON_SERIALIZE_ENUM(Orientation, {{Orientation::portrait, "portrait"}, {Orientation::landscape, "landscape"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Framing, {{Framing::full_body, "full_body"},
                                       {Framing::half_body, "half_body"},
                                       {Framing::head_and_shoulders, "head_and_shoulders"}})

struct BasePromptConfig {
    Orientation orientation = Orientation::portrait;
    Framing framing = Framing::full_body;
    std::string style_suffix = "clean storyboard illustration, consistent character design";
    std::vector<std::string> negative_terms{"background clutter", "scenery", "props", "text", "watermark",
                                            "extra people"};

    static BasePromptConfig characters();
    static BasePromptConfig spots();
    int width() const;
    int height() const;
};

inline constexpr std::size_t kMaxPromptLength = 500;

/// Profile fields in fixed order, then the framing clause, then the style
/// suffix; at most 500 characters, the suffix being cut first.
std::string build_base_prompt(const CharacterRecord& record, const BasePromptConfig& config);
std::string build_base_prompt(const SpotRecord& record, const BasePromptConfig& config);
std::string negative_prompt(const BasePromptConfig& config);

/// Workspace asset tree with a manifest of id -> {path, hash, cache key}.
class AssetStore {
public:
    explicit AssetStore(std::filesystem::path workspace_root);

    static std::string character_ref_path(const std::string& id);
    static std::string character_view_path(const std::string& id, int view);
    static std::string spot_ref_path(const std::string& id);

    /// Cached asset when the manifest entry has the same cache key and the
    /// file still hashes to the recorded value.
    std::optional<ImageAsset> find(const std::string& asset_id, const std::string& cache_key) const;
    void put(const ImageAsset& asset, const std::string& relative_path, const std::string& cache_key);
    /// Loads a recorded asset; AssetMissing when absent or corrupt.
    ImageAsset load(const std::string& asset_id) const;
    bool contains(const std::string& asset_id) const;
    void save_manifest() const;

private:
    std::filesystem::path root_;
    mutable std::mutex mutex_;
    nlohmann::json manifest_;
};

struct ReferenceAssets {
    std::map<std::string, ImageAsset> characters; ///< by character id
    std::map<std::string, ImageAsset> spots;      ///< by spot id
    std::size_t cache_hits = 0;
    std::size_t generated = 0;
};

/// One character_ref per character and one spot_ref per spot. Per-entity
/// failures are collected; the manifest is saved with the successful ones
/// before BackendError lists the failed entities.
ReferenceAssets generate_reference_images(const ScriptIR& ir, const BasePromptConfig& character_config,
                                          const BasePromptConfig& spot_config, const ImageBackend& backend,
                                          AssetStore& store, std::uint64_t seed);

struct MultiViewSet {
    std::string character_id;
    std::array<ImageAsset, kViewCount> views;

    /// Throws InvariantBreach unless views[x] is a character_view of this
    /// character with view_index x.
    void validate() const;
};

std::map<std::string, MultiViewSet> generate_multiview(const std::map<std::string, ImageAsset>& character_refs,
                                                       const MultiviewBackend& backend, AssetStore& store);

/// Reloads assets recorded in the store for every record of `ir`.
ReferenceAssets load_reference_assets(const ScriptIR& ir, const AssetStore& store);
std::map<std::string, MultiViewSet> load_multiview_sets(const ScriptIR& ir, const AssetStore& store);

} // namespace scriptboard
