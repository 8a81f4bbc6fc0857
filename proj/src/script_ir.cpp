#include "scriptboard/script_ir.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace scriptboard {

// ---------------------------------------------------------------------------
// RawScript / profiles

std::size_t RawScript::page_of(std::size_t offset) const {
    auto it = std::upper_bound(pages.begin(), pages.end(), offset);
    return it == pages.begin() ? 0 : static_cast<std::size_t>(it - pages.begin()) - 1;
}

std::string_view RawScript::page_text(std::size_t page) const {
    std::size_t begin = pages.at(page);
    std::size_t end = page + 1 < pages.size() ? pages[page + 1] : text.size();
    return std::string_view(text).substr(begin, end - begin);
}

std::string& CharacterProfile::at(std::size_t i) {
    switch (i) {
    case 0: return age_band;
    case 1: return hair;
    case 2: return clothing;
    case 3: return build;
    default: return distinguishing_features;
    }
}

const std::string& CharacterProfile::at(std::size_t i) const {
    return const_cast<CharacterProfile*>(this)->at(i);
}

bool CharacterProfile::complete() const {
    for (std::size_t i = 0; i < field_names.size(); ++i)
        if (trim(at(i)).empty()) return false;
    return true;
}

std::string& SpotProfile::at(std::size_t i) {
    switch (i) {
    case 0: return setting;
    case 1: return lighting;
    case 2: return palette;
    default: return props;
    }
}

const std::string& SpotProfile::at(std::size_t i) const {
    return const_cast<SpotProfile*>(this)->at(i);
}

bool SpotProfile::complete() const {
    for (std::size_t i = 0; i < field_names.size(); ++i)
        if (trim(at(i)).empty()) return false;
    return true;
}

// ---------------------------------------------------------------------------
// ScriptIR lookups

const CharacterRecord* ScriptIR::find_character(std::string_view id) const {
    for (const auto& c : characters)
        if (c.id == id) return &c;
    return nullptr;
}

const SpotRecord* ScriptIR::find_spot(std::string_view id) const {
    for (const auto& s : spots)
        if (s.id == id) return &s;
    return nullptr;
}

CharacterRecord* ScriptIR::find_character(std::string_view id) {
    return const_cast<CharacterRecord*>(std::as_const(*this).find_character(id));
}

SpotRecord* ScriptIR::find_spot(std::string_view id) {
    return const_cast<SpotRecord*>(std::as_const(*this).find_spot(id));
}

const DialogueSegment* ScriptIR::find_segment(int id) const {
    for (const auto& d : dialogues)
        if (d.id == id) return &d;
    return nullptr;
}

std::vector<int> ScriptIR::scene_of_segments() const {
    std::vector<int> scenes;
    scenes.reserve(dialogues.size());
    int scene = -1;
    const std::string* previous_spot = nullptr;
    for (const auto& d : dialogues) {
        if (previous_spot == nullptr || *previous_spot != d.spot_id) ++scene;
        previous_spot = &d.spot_id;
        scenes.push_back(scene);
    }
    return scenes;
}

int ScriptIR::scene_count() const {
    auto scenes = scene_of_segments();
    return scenes.empty() ? 0 : scenes.back() + 1;
}

std::vector<std::string> validate(const ScriptIR& ir) {
    std::vector<std::string> problems;
    const auto& pages = ir.raw.pages;
    if (pages.empty()) problems.push_back("raw script has no pages");
    for (std::size_t i = 0; i < pages.size(); ++i) {
        if (i > 0 && pages[i] <= pages[i - 1]) problems.push_back("page offsets not increasing");
        if (pages[i] > ir.raw.text.size()) problems.push_back("page offset beyond text");
    }
    if (!pages.empty() && pages.front() != 0) problems.push_back("first page must start at 0");

    std::set<std::string> ids;
    std::set<std::string> names;
    for (const auto& c : ir.characters) {
        if (!ids.insert(c.id).second) problems.push_back("duplicate character id " + c.id);
        if (trim(c.name).empty()) problems.push_back("character " + c.id + " has empty name");
        std::string key;
        try {
            key = normalize_name(c.name);
        } catch (const Error&) {
            key = c.id;
        }
        if (!names.insert(key).second)
            problems.push_back("two characters share normalized name " + key);
        if (c.refinement_round < 0) problems.push_back("negative refinement round on " + c.id);
        if (c.refinement_round >= 1 && !c.refined_profile.complete())
            problems.push_back("refined character " + c.id + " has empty profile fields");
    }
    std::set<std::string> spot_ids;
    for (const auto& s : ir.spots) {
        if (!spot_ids.insert(s.id).second) problems.push_back("duplicate spot id " + s.id);
        if (trim(s.name).empty()) problems.push_back("spot " + s.id + " has empty name");
        if (s.refinement_round >= 1 && !s.refined_profile.complete())
            problems.push_back("refined spot " + s.id + " has empty profile fields");
    }
    for (std::size_t i = 0; i < ir.dialogues.size(); ++i) {
        const auto& d = ir.dialogues[i];
        std::string tag = "segment " + std::to_string(d.id);
        if (d.id != static_cast<int>(i)) problems.push_back(tag + " has non-sequential id");
        if (!ir.find_character(d.speaker_id))
            problems.push_back(tag + " speaker '" + d.speaker_id + "' does not resolve");
        if (!ir.find_spot(d.spot_id))
            problems.push_back(tag + " spot '" + d.spot_id + "' does not resolve");
        for (const auto& a : d.addressee_ids) {
            if (!ir.find_character(a)) problems.push_back(tag + " addressee '" + a + "' does not resolve");
            if (a == d.speaker_id) problems.push_back(tag + " addresses its own speaker");
        }
        if (trim(d.line).empty()) problems.push_back(tag + " has empty line");
        if (i > 0 && d.page < ir.dialogues[i - 1].page) problems.push_back(tag + " page order broken");
        if (d.page < 0 || static_cast<std::size_t>(d.page) >= std::max<std::size_t>(1, pages.size()))
            problems.push_back(tag + " page out of range");
    }
    return problems;
}

void ensure_valid(const ScriptIR& ir) {
    auto problems = validate(ir);
    if (problems.empty()) return;
    std::string message;
    for (const auto& p : problems) {
        if (!message.empty()) message += "; ";
        message += p;
    }
    throw Error(Errc::InvariantBreach, message);
}

// ---------------------------------------------------------------------------
// Names

std::string normalize_name(std::string_view surface) {
    std::string out;
    bool pending_separator = false;
    auto emit = [&](std::string_view piece) {
        if (pending_separator && !out.empty()) out.push_back('-');
        pending_separator = false;
        out += piece;
    };
    for (char32_t cp : utf8_decode(surface)) {
        if (cp < 0x80) {
            auto c = static_cast<char>(cp);
            auto uc = static_cast<unsigned char>(c);
            if (std::isalnum(uc)) {
                char lower = static_cast<char>(std::tolower(uc));
                emit(std::string_view(&lower, 1));
            } else if (std::isspace(uc) || c == '-' || c == '_' || c == '/') {
                pending_separator = true;
            }
            // other punctuation is dropped without separating
        } else if (cp == 0xA0 || cp == 0x2013 || cp == 0x2014 || (cp >= 0x2000 && cp <= 0x200A)) {
            pending_separator = true;
        } else if (auto t = ascii_transliteration(cp); !t.empty()) {
            emit(ascii_lower(t));
        }
    }
    if (out.empty())
        throw Error(Errc::EmptyAfterNormalization, "name '" + std::string(surface) + "' normalizes to nothing");
    return out;
}

// ---------------------------------------------------------------------------
// Line grammar

namespace {

bool is_parenthetical(std::string_view t) {
    return t.size() >= 2 && t.front() == '(' && t.back() == ')';
}

TimeOfDay time_from(std::string_view raw) {
    static const std::set<std::string> day = {"DAY", "MORNING", "AFTERNOON", "NOON", "DAWN", "SUNRISE", "LATER DAY"};
    static const std::set<std::string> night = {"NIGHT", "EVENING", "DUSK", "MIDNIGHT", "SUNSET", "LATE NIGHT"};
    std::string key = ascii_upper(collapse_whitespace(raw));
    if (day.count(key)) return TimeOfDay::DAY;
    if (night.count(key)) return TimeOfDay::NIGHT;
    return TimeOfDay::UNKNOWN;
}

struct HeadingPrefix {
    std::string_view text;
    InteriorExterior kind;
};

constexpr HeadingPrefix kHeadingPrefixes[] = {
    {"INT./EXT.", InteriorExterior::UNKNOWN}, {"EXT./INT.", InteriorExterior::UNKNOWN},
    {"INT/EXT.", InteriorExterior::UNKNOWN},  {"I/E.", InteriorExterior::UNKNOWN},
    {"INT.", InteriorExterior::INT},          {"EXT.", InteriorExterior::EXT},
};

bool only_cue_chars(std::string_view s) {
    bool has_upper = false;
    for (char c : s) {
        auto uc = static_cast<unsigned char>(c);
        if (uc >= 0x80) continue; // non-ASCII letters such as É
        if (c >= 'a' && c <= 'z') return false;
        if (c >= 'A' && c <= 'Z') {
            has_upper = true;
            continue;
        }
        if (std::isdigit(uc) || c == ' ' || c == '.' || c == '\'' || c == '-' || c == '&') continue;
        return false;
    }
    return has_upper;
}

} // namespace

bool looks_like_scene_heading(std::string_view t) {
    for (std::string_view p : {"INT", "EXT", "I/E"}) {
        if (starts_with_ci(t, p) && (t.size() == p.size() || t[p.size()] == '.' || t[p.size()] == ' ' ||
                                     t[p.size()] == '/'))
            return true;
    }
    return false;
}

std::optional<SceneHeading> parse_scene_heading(std::string_view t) {
    for (const auto& prefix : kHeadingPrefixes) {
        if (!starts_with_ci(t, prefix.text)) continue;
        std::string_view rest = t.substr(prefix.text.size());
        if (rest.empty() || (rest.front() != ' ' && rest.front() != '\t')) return std::nullopt;
        rest = trim(rest);
        SceneHeading heading;
        heading.interior_exterior = prefix.kind;
        std::size_t sep = std::string_view::npos;
        std::size_t sep_len = 0;
        for (std::string_view s : {" - ", " -- ", " \xE2\x80\x93 ", " \xE2\x80\x94 "}) {
            auto pos = rest.rfind(s);
            if (pos != std::string_view::npos && (sep == std::string_view::npos || pos > sep)) {
                sep = pos;
                sep_len = s.size();
            }
        }
        std::string_view name = rest;
        if (sep != std::string_view::npos) {
            name = trim(rest.substr(0, sep));
            heading.time_of_day = time_from(rest.substr(sep + sep_len));
        }
        if (name.empty()) return std::nullopt;
        try {
            (void)normalize_name(name);
        } catch (const Error&) {
            return std::nullopt;
        }
        heading.name = std::string(name);
        return heading;
    }
    return std::nullopt;
}

std::optional<std::string> cue_name(std::string_view t) {
    if (t.empty() || t.size() > 48 || t.back() == ':') return std::nullopt;
    if (looks_like_scene_heading(t)) return std::nullopt;
    std::string_view body = t;
    if (!body.empty() && body.back() == '^') body = trim(body.substr(0, body.size() - 1));
    while (!body.empty() && body.back() == ')') {
        auto open = body.rfind('(');
        if (open == std::string_view::npos) return std::nullopt;
        body = trim(body.substr(0, open));
    }
    if (body.empty() || !only_cue_chars(body)) return std::nullopt;
    try {
        (void)normalize_name(body);
    } catch (const Error&) {
        return std::nullopt;
    }
    return std::string(body);
}

// ---------------------------------------------------------------------------
// Paging

RawScript segment_pages(std::string_view text, int max_segments_per_page, SourceKind kind) {
    if (max_segments_per_page < 1)
        throw Error(Errc::InvalidInput, "max_segments_per_page must be >= 1");
    RawScript raw;
    raw.text = std::string(text);
    raw.source_kind = kind;
    raw.pages = {0};

    struct Block {
        std::size_t begin;
        int cues;
    };
    std::vector<Block> blocks;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_blank(lines[i].text)) continue;
        Block block{lines[i].begin, 0};
        std::size_t j = i;
        for (; j < lines.size() && !is_blank(lines[j].text); ++j) {
            auto t = trim(lines[j].text);
            if (kind == SourceKind::screenplay) {
                bool followed = j + 1 < lines.size() && !is_blank(lines[j + 1].text);
                if (followed && cue_name(t)) ++block.cues;
            } else {
                std::size_t straight = std::count(t.begin(), t.end(), '"');
                std::size_t curly = 0;
                for (std::size_t p = t.find("\xE2\x80\x9C"); p != std::string_view::npos;
                     p = t.find("\xE2\x80\x9C", p + 1))
                    ++curly;
                block.cues += static_cast<int>(straight / 2 + curly);
            }
        }
        blocks.push_back(block);
        i = j;
    }

    // Greedy fill; a new page starts at the first of the cue-less blocks (scene
    // headings, action) that directly precede the overflowing block.
    int on_page = 0;
    std::optional<std::size_t> lead_in;
    for (const auto& block : blocks) {
        if (block.cues == 0) {
            if (!lead_in) lead_in = block.begin;
            continue;
        }
        if (on_page > 0 && on_page + block.cues > max_segments_per_page) {
            std::size_t start = lead_in.value_or(block.begin);
            if (start <= raw.pages.back()) start = block.begin;
            raw.pages.push_back(start);
            on_page = 0;
        }
        on_page += block.cues;
        lead_in.reset();
    }
    return raw;
}

std::optional<std::string> default_addressee(const std::vector<DialogueSegment>& dialogues, std::size_t i) {
    const auto& d = dialogues[i];
    for (std::size_t k = i; k-- > 0 && dialogues[k].spot_id == d.spot_id;)
        if (dialogues[k].speaker_id != d.speaker_id) return dialogues[k].speaker_id;
    for (std::size_t k = i + 1; k < dialogues.size() && dialogues[k].spot_id == d.spot_id; ++k)
        if (dialogues[k].speaker_id != d.speaker_id) return dialogues[k].speaker_id;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class ScreenplayParser {
public:
    ScreenplayParser(std::string text, const ParseOptions& options) : options_(options) {
        if (options.max_segments_per_page)
            ir_.raw = segment_pages(text, *options.max_segments_per_page, SourceKind::screenplay);
        else {
            ir_.raw.text = std::move(text);
            ir_.raw.pages = {0};
        }
        ir_.raw.source_kind = SourceKind::screenplay;
    }

    ScriptIR run() {
        lines_ = split_lines(ir_.raw.text);
        for (line_no_ = 0; line_no_ < lines_.size(); ++line_no_) step();
        close_block();
        return std::move(ir_);
    }

private:
    void step() {
        const auto& line = lines_[line_no_];
        std::string_view t = trim(line.text);
        if (t.empty()) {
            close_block();
            return;
        }
        if (auto heading = parse_scene_heading(t)) {
            close_block();
            enter_spot(*heading);
            return;
        }
        if (in_block_) {
            dialogue_line(line, t);
            return;
        }
        bool followed = line_no_ + 1 < lines_.size() && !is_blank(lines_[line_no_ + 1].text);
        if (followed) {
            if (auto name = cue_name(t)) {
                if (!current_spot_)
                    throw Error(Errc::DialogueBeforeScene,
                                "line " + std::to_string(line_no_ + 1) + ": cue '" + *name +
                                    "' before any scene heading");
                open_block(*name);
                return;
            }
        }
        action_line(t, followed);
    }

    void unparsable(std::string_view why) const {
        throw Error(Errc::UnparsableLine,
                    "line " + std::to_string(line_no_ + 1) + ": " + std::string(why) + ": '" +
                        std::string(trim(lines_[line_no_].text)) + "'");
    }

    void action_line(std::string_view t, bool followed) {
        if (options_.strict) {
            if (looks_like_scene_heading(t)) unparsable("malformed scene heading");
            if (is_parenthetical(t)) unparsable("parenthetical outside dialogue");
            if (!followed && cue_name(t)) unparsable("character cue without dialogue");
            if (!current_spot_) unparsable("text before the first scene heading");
        }
        if (!current_spot_) return;
        auto& spot = ir_.spots[*current_spot_];
        if (!spot.description.empty()) spot.description += ' ';
        spot.description += collapse_whitespace(t);
    }

    void enter_spot(const SceneHeading& heading) {
        std::string id = normalize_name(heading.name);
        for (std::size_t i = 0; i < ir_.spots.size(); ++i) {
            if (ir_.spots[i].id == id) {
                current_spot_ = i;
                return;
            }
        }
        SpotRecord spot;
        spot.id = id;
        spot.name = heading.name;
        spot.interior_exterior = heading.interior_exterior;
        spot.time_of_day = heading.time_of_day;
        ir_.spots.push_back(std::move(spot));
        current_spot_ = ir_.spots.size() - 1;
    }

    void open_block(const std::string& surface) {
        std::string id = normalize_name(surface);
        auto* existing = ir_.find_character(id);
        if (!existing) {
            CharacterRecord c;
            c.id = id;
            c.name = surface;
            ir_.characters.push_back(std::move(c));
        } else if (existing->name != surface &&
                   std::find(existing->aliases.begin(), existing->aliases.end(), surface) ==
                       existing->aliases.end()) {
            existing->aliases.push_back(surface);
        }
        in_block_ = true;
        speaker_ = id;
        pending_parenthetical_.reset();
        segment_open_ = false;
    }

    void dialogue_line(const LineSpan& line, std::string_view t) {
        if (is_parenthetical(t)) {
            close_segment();
            pending_parenthetical_ = collapse_whitespace(t.substr(1, t.size() - 2));
            return;
        }
        std::size_t lead = static_cast<std::size_t>(t.data() - line.text.data());
        std::size_t begin = line.begin + lead;
        std::size_t end = begin + t.size();
        if (!segment_open_) {
            segment_open_ = true;
            segment_begin_ = begin;
        }
        segment_end_ = end;
    }

    void close_segment() {
        if (!segment_open_) return;
        segment_open_ = false;
        DialogueSegment d;
        d.id = static_cast<int>(ir_.dialogues.size());
        d.speaker_id = speaker_;
        d.spot_id = ir_.spots[*current_spot_].id;
        d.line = ir_.raw.text.substr(segment_begin_, segment_end_ - segment_begin_);
        d.parenthetical = pending_parenthetical_;
        pending_parenthetical_.reset();
        d.source_offset = segment_begin_;
        d.page = static_cast<int>(ir_.raw.page_of(segment_begin_));

        ir_.dialogues.push_back(std::move(d));
    }

    void close_block() {
        close_segment();
        in_block_ = false;
        pending_parenthetical_.reset();
    }

    ParseOptions options_;
    ScriptIR ir_;
    std::vector<LineSpan> lines_;
    std::size_t line_no_ = 0;
    std::optional<std::size_t> current_spot_;
    bool in_block_ = false;
    std::string speaker_;
    std::optional<std::string> pending_parenthetical_;
    bool segment_open_ = false;
    std::size_t segment_begin_ = 0;
    std::size_t segment_end_ = 0;
};

} // namespace

ScriptIR parse_screenplay(std::string_view text, const ParseOptions& options) {
    if (is_blank(text)) throw Error(Errc::InvalidInput, "script text is empty");
    ScreenplayParser parser(normalize_newlines(text), options);
    ScriptIR ir = parser.run();
    for (std::size_t i = 0; i < ir.dialogues.size(); ++i)
        if (auto a = default_addressee(ir.dialogues, i)) ir.dialogues[i].addressee_ids.push_back(*a);
    ensure_valid(ir);
    return ir;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const RawScript& v) {
    j = {{"text", v.text}, {"source_kind", v.source_kind}, {"pages", v.pages}};
}

void from_json(const nlohmann::json& j, RawScript& v) {
    j.at("text").get_to(v.text);
    j.at("source_kind").get_to(v.source_kind);
    j.at("pages").get_to(v.pages);
}

void to_json(nlohmann::json& j, const CharacterProfile& v) {
    j = nlohmann::json::object();
    for (std::size_t i = 0; i < CharacterProfile::field_names.size(); ++i)
        j[std::string(CharacterProfile::field_names[i])] = v.at(i);
}

void from_json(const nlohmann::json& j, CharacterProfile& v) {
    for (std::size_t i = 0; i < CharacterProfile::field_names.size(); ++i)
        v.at(i) = j.value(std::string(CharacterProfile::field_names[i]), std::string{});
}

void to_json(nlohmann::json& j, const SpotProfile& v) {
    j = nlohmann::json::object();
    for (std::size_t i = 0; i < SpotProfile::field_names.size(); ++i)
        j[std::string(SpotProfile::field_names[i])] = v.at(i);
}

void from_json(const nlohmann::json& j, SpotProfile& v) {
    for (std::size_t i = 0; i < SpotProfile::field_names.size(); ++i)
        v.at(i) = j.value(std::string(SpotProfile::field_names[i]), std::string{});
}

void to_json(nlohmann::json& j, const CharacterRecord& v) {
    j = {{"id", v.id},
         {"name", v.name},
         {"aliases", v.aliases},
         {"coarse_description", v.coarse_description},
         {"refined_profile", v.refined_profile},
         {"refinement_round", v.refinement_round}};
}

void from_json(const nlohmann::json& j, CharacterRecord& v) {
    j.at("id").get_to(v.id);
    j.at("name").get_to(v.name);
    v.aliases = j.value("aliases", std::vector<std::string>{});
    v.coarse_description = j.value("coarse_description", std::string{});
    if (j.contains("refined_profile")) j.at("refined_profile").get_to(v.refined_profile);
    v.refinement_round = j.value("refinement_round", 0);
}

void to_json(nlohmann::json& j, const SpotRecord& v) {
    j = {{"id", v.id},
         {"name", v.name},
         {"interior_exterior", v.interior_exterior},
         {"time_of_day", v.time_of_day},
         {"description", v.description},
         {"refined_profile", v.refined_profile},
         {"refinement_round", v.refinement_round}};
}

void from_json(const nlohmann::json& j, SpotRecord& v) {
    j.at("id").get_to(v.id);
    j.at("name").get_to(v.name);
    v.interior_exterior = j.value("interior_exterior", InteriorExterior::UNKNOWN);
    v.time_of_day = j.value("time_of_day", TimeOfDay::UNKNOWN);
    v.description = j.value("description", std::string{});
    if (j.contains("refined_profile")) j.at("refined_profile").get_to(v.refined_profile);
    v.refinement_round = j.value("refinement_round", 0);
}

void to_json(nlohmann::json& j, const DialogueSegment& v) {
    j = {{"id", v.id},
         {"speaker_id", v.speaker_id},
         {"spot_id", v.spot_id},
         {"addressee_ids", v.addressee_ids},
         {"line", v.line},
         {"parenthetical", v.parenthetical ? nlohmann::json(*v.parenthetical) : nlohmann::json()},
         {"page", v.page},
         {"source_offset", v.source_offset}};
}

void from_json(const nlohmann::json& j, DialogueSegment& v) {
    j.at("id").get_to(v.id);
    j.at("speaker_id").get_to(v.speaker_id);
    j.at("spot_id").get_to(v.spot_id);
    v.addressee_ids = j.value("addressee_ids", std::vector<std::string>{});
    j.at("line").get_to(v.line);
    if (j.contains("parenthetical") && !j.at("parenthetical").is_null())
        v.parenthetical = j.at("parenthetical").get<std::string>();
    else
        v.parenthetical.reset();
    v.page = j.value("page", 0);
    v.source_offset = j.value("source_offset", std::size_t{0});
}

void to_json(nlohmann::json& j, const ScriptIR& v) {
    j = {{"raw", v.raw}, {"characters", v.characters}, {"spots", v.spots}, {"dialogues", v.dialogues}};
}

void from_json(const nlohmann::json& j, ScriptIR& v) {
    j.at("raw").get_to(v.raw);
    j.at("characters").get_to(v.characters);
    j.at("spots").get_to(v.spots);
    j.at("dialogues").get_to(v.dialogues);
}

std::string serialize(const ScriptIR& ir) { return nlohmann::json(ir).dump(2) + "\n"; }

ScriptIR deserialize(std::string_view json_text) {
    try {
        return nlohmann::json::parse(json_text).get<ScriptIR>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaViolation, std::string("script IR: ") + e.what());
    }
}

} // namespace scriptboard
