#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace scriptboard {

enum class SourceKind { screenplay, prose };
enum class InteriorExterior { INT, EXT, UNKNOWN };
enum class TimeOfDay { DAY, NIGHT, UNKNOWN };

NLOHMANN_JSON_SERIALIZE_ENUM(SourceKind, {{SourceKind::screenplay, "screenplay"},
                                          {SourceKind::prose, "prose"}})
NLOHMANN_JSON_SERIALIZE_ENUM(InteriorExterior, {{InteriorExterior::UNKNOWN, "UNKNOWN"},
                                                {InteriorExterior::INT, "INT"},
                                                {InteriorExterior::EXT, "EXT"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TimeOfDay, {{TimeOfDay::UNKNOWN, "UNKNOWN"},
                                         {TimeOfDay::DAY, "DAY"},
                                         {TimeOfDay::NIGHT, "NIGHT"}})

/// Script text plus page boundaries. `pages` holds the byte offset where each
/// page starts; the first entry is always 0.
struct RawScript {
    std::string text;
    SourceKind source_kind = SourceKind::screenplay;
    std::vector<std::size_t> pages{0};

    std::size_t page_count() const { return pages.size(); }
    std::size_t page_of(std::size_t offset) const;
    std::string_view page_text(std::size_t page) const;

    bool operator==(const RawScript&) const = default;
};

/// Fixed-order visual profile. Each field is a short free-text phrase.
struct CharacterProfile {
    std::string age_band;
    std::string hair;
    std::string clothing;
    std::string build;
    std::string distinguishing_features;

    static constexpr std::array<std::string_view, 5> field_names{
        "age_band", "hair", "clothing", "build", "distinguishing_features"};

    std::string& at(std::size_t i);
    const std::string& at(std::size_t i) const;
    bool complete() const;

    bool operator==(const CharacterProfile&) const = default;
};

struct SpotProfile {
    std::string setting;
    std::string lighting;
    std::string palette;
    std::string props;

    static constexpr std::array<std::string_view, 4> field_names{"setting", "lighting", "palette",
                                                                 "props"};

    std::string& at(std::size_t i);
    const std::string& at(std::size_t i) const;
    bool complete() const;

    bool operator==(const SpotProfile&) const = default;
};

struct CharacterRecord {
    std::string id;
    std::string name;
    std::vector<std::string> aliases;
    std::string coarse_description;
    CharacterProfile refined_profile;
    int refinement_round = 0;

    bool operator==(const CharacterRecord&) const = default;
};

struct SpotRecord {
    std::string id;
    std::string name;
    InteriorExterior interior_exterior = InteriorExterior::UNKNOWN;
    TimeOfDay time_of_day = TimeOfDay::UNKNOWN;
    std::string description;
    SpotProfile refined_profile;
    int refinement_round = 0;

    bool operator==(const SpotRecord&) const = default;
};

struct DialogueSegment {
    int id = 0;
    std::string speaker_id;
    std::string spot_id;
    std::vector<std::string> addressee_ids;
    std::string line;
    std::optional<std::string> parenthetical;
    int page = 0;
    /// Byte offset of `line` inside RawScript::text.
    std::size_t source_offset = 0;

    bool operator==(const DialogueSegment&) const = default;
};

struct ScriptIR {
    RawScript raw;
    std::vector<CharacterRecord> characters;
    std::vector<SpotRecord> spots;
    std::vector<DialogueSegment> dialogues;

    const CharacterRecord* find_character(std::string_view id) const;
    const SpotRecord* find_spot(std::string_view id) const;
    CharacterRecord* find_character(std::string_view id);
    SpotRecord* find_spot(std::string_view id);
    const DialogueSegment* find_segment(int id) const;

    /// Scene index per dialogue: a scene is a maximal run of consecutive
    /// segments sharing one spot.
    std::vector<int> scene_of_segments() const;
    int scene_count() const;

    bool operator==(const ScriptIR&) const = default;
};

/// Previous distinct speaker of the same spot run, else the next one.
std::optional<std::string> default_addressee(const std::vector<DialogueSegment>& dialogues, std::size_t index);

/// Lists every violated IR invariant; empty when valid.
std::vector<std::string> validate(const ScriptIR& ir);
/// Throws Error(Errc::InvariantBreach) listing violations.
void ensure_valid(const ScriptIR& ir);

struct ParseOptions {
    bool strict = false;
    /// When set, pages are cut by segment_pages with this budget.
    std::optional<int> max_segments_per_page;
};

ScriptIR parse_screenplay(std::string_view text, const ParseOptions& options = {});

/// Case-folded, ASCII-transliterated slug with words joined by '-'.
std::string normalize_name(std::string_view surface);

/// Splits text into pages at blank-line gaps so that no page holds more than
/// max_segments_per_page dialogue cues (a single oversized block is its own page).
RawScript segment_pages(std::string_view text, int max_segments_per_page,
                        SourceKind kind = SourceKind::screenplay);

/// Cue text with trailing extensions such as "(V.O.)" or "(CONT'D)" removed.
std::optional<std::string> cue_name(std::string_view trimmed_line);

struct SceneHeading {
    InteriorExterior interior_exterior = InteriorExterior::UNKNOWN;
    std::string name;
    TimeOfDay time_of_day = TimeOfDay::UNKNOWN;
};

std::optional<SceneHeading> parse_scene_heading(std::string_view trimmed_line);
bool looks_like_scene_heading(std::string_view trimmed_line);

void to_json(nlohmann::json& j, const RawScript& v);
void from_json(const nlohmann::json& j, RawScript& v);
void to_json(nlohmann::json& j, const CharacterProfile& v);
void from_json(const nlohmann::json& j, CharacterProfile& v);
void to_json(nlohmann::json& j, const SpotProfile& v);
void from_json(const nlohmann::json& j, SpotProfile& v);
void to_json(nlohmann::json& j, const CharacterRecord& v);
void from_json(const nlohmann::json& j, CharacterRecord& v);
void to_json(nlohmann::json& j, const SpotRecord& v);
void from_json(const nlohmann::json& j, SpotRecord& v);
void to_json(nlohmann::json& j, const DialogueSegment& v);
void from_json(const nlohmann::json& j, DialogueSegment& v);
void to_json(nlohmann::json& j, const ScriptIR& v);
void from_json(const nlohmann::json& j, ScriptIR& v);

std::string serialize(const ScriptIR& ir);
ScriptIR deserialize(std::string_view json_text);

} // namespace scriptboard
