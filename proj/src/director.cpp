#include "scriptboard/director.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/grounding.hpp"
#include "scriptboard/text_util.hpp"

#include <algorithm>
#include <future>
#include <set>

namespace scriptboard {

// ---------------------------------------------------------------------------
// Log

void DirectorLog::event(std::string_view kind, std::string_view detail) {
    std::lock_guard lock(mutex_);
    lines_.push_back("[" + std::string(kind) + "] " + std::string(detail));
    kinds_.emplace_back(kind);
}

void DirectorLog::reasoning(std::string_view label, std::string_view text) {
    std::string body = std::string(trim(text));
    std::string indented;
    for (const auto& line : split_lines(body)) indented += "\n    " + std::string(line.text);
    event("reasoning", std::string(label) + ":" + indented);
}

void DirectorLog::append(const DirectorLog& other) {
    if (&other == this) return;
    std::scoped_lock lock(mutex_, other.mutex_);
    lines_.insert(lines_.end(), other.lines_.begin(), other.lines_.end());
    kinds_.insert(kinds_.end(), other.kinds_.begin(), other.kinds_.end());
}

std::vector<std::string> DirectorLog::lines() const {
    std::lock_guard lock(mutex_);
    return lines_;
}

std::size_t DirectorLog::count(std::string_view kind) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(std::count(kinds_.begin(), kinds_.end(), kind));
}

std::string DirectorLog::text() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& l : lines_) out += l + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Structured replies

std::optional<nlohmann::json> last_fenced_json(std::string_view reply, std::string* before) {
    const std::string_view open = "```json";
    auto start = reply.rfind(open);
    if (start == std::string_view::npos) {
        if (before) *before = std::string(reply);
        return std::nullopt;
    }
    auto body_begin = start + open.size();
    auto close = reply.find("```", body_begin);
    std::string_view body =
        reply.substr(body_begin, close == std::string_view::npos ? std::string_view::npos : close - body_begin);
    if (before) {
        *before = std::string(reply.substr(0, start));
        if (close != std::string_view::npos) *before += std::string(reply.substr(close + 3));
    }
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

std::string wrap_payload(std::string_view tag, std::string_view body) {
    return "<<<" + std::string(tag) + "\n" + std::string(body) + "\n" + std::string(tag) + ">>>";
}

std::optional<std::string> unwrap_payload(std::string_view text, std::string_view tag) {
    const std::string open = "<<<" + std::string(tag) + "\n";
    const std::string close = "\n" + std::string(tag) + ">>>";
    auto b = text.find(open);
    if (b == std::string_view::npos) return std::nullopt;
    b += open.size();
    auto e = text.find(close, b);
    if (e == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(b, e - b));
}

nlohmann::json request_structured(const ChatBackend& backend, const PromptTemplate& prompt,
                                  const std::map<std::string, std::string>& slots, DirectorLog& log,
                                  const std::string& label,
                                  const std::function<void(const nlohmann::json&)>& check) {
    const auto rendered = prompt.render(slots);
    std::string user = rendered.user;
    std::string problem;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::string reply = backend.complete(rendered.system, user);
        std::string before;
        auto parsed = last_fenced_json(reply, &before);
        if (!is_blank(before)) log.reasoning(label, before);
        if (!parsed) {
            problem = "no parsable ```json block";
        } else if (!parsed->is_object()) {
            problem = "reply is not a JSON object";
        } else {
            try {
                if (check) check(*parsed);
                return *parsed;
            } catch (const Error& e) {
                if (e.code() != Errc::SchemaViolation) throw;
                problem = e.what();
            }
        }
        log.event("SchemaRetry", label + ": " + problem);
        user = rendered.user + "\n\nYour previous reply was rejected (" + problem +
               "). Reply again with exactly one ```json fenced object.";
    }
    throw Error(Errc::SchemaViolation, label + ": " + problem);
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

void schema_fail(const std::string& what) { throw Error(Errc::SchemaViolation, what); }

std::string string_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return {};
    if (!j[key].is_string()) schema_fail(std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
    std::vector<std::string> out;
    if (!j.contains(key) || j[key].is_null()) return out;
    if (!j[key].is_array()) schema_fail(std::string("field '") + key + "' must be an array");
    for (const auto& v : j[key]) {
        if (!v.is_string()) schema_fail(std::string("field '") + key + "' must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

const nlohmann::json& array_field(const nlohmann::json& j, const char* key) {
    static const nlohmann::json empty = nlohmann::json::array();
    if (!j.contains(key) || j[key].is_null()) return empty;
    if (!j[key].is_array()) schema_fail(std::string("field '") + key + "' must be an array");
    for (const auto& v : j[key])
        if (!v.is_object()) schema_fail(std::string("entries of '") + key + "' must be objects");
    return j[key];
}

std::optional<std::string> try_normalize(std::string_view s) {
    try {
        return normalize_name(s);
    } catch (const Error&) {
        return std::nullopt;
    }
}

/// Resolves a surface form against character names and aliases.
std::optional<std::string> resolve_character(const ScriptIR& ir, std::string_view surface) {
    auto key = try_normalize(surface);
    if (!key) return std::nullopt;
    for (const auto& c : ir.characters)
        if (c.id == *key) return c.id;
    for (const auto& c : ir.characters)
        for (const auto& a : c.aliases)
            if (try_normalize(a) == key) return c.id;
    // Leading article, as in "the little prince".
    for (std::string_view article : {"the-", "a-", "an-"})
        if (key->rfind(article, 0) == 0) return resolve_character(ir, key->substr(article.size()));
    return std::nullopt;
}

std::optional<std::string> resolve_spot(const ScriptIR& ir, std::string_view surface) {
    auto key = try_normalize(surface);
    if (!key) return std::nullopt;
    for (const auto& s : ir.spots)
        if (s.id == *key) return s.id;
    return std::nullopt;
}

InteriorExterior parse_ie(const std::string& s) {
    if (s == "INT") return InteriorExterior::INT;
    if (s == "EXT") return InteriorExterior::EXT;
    return InteriorExterior::UNKNOWN;
}

TimeOfDay parse_tod(const std::string& s) {
    if (s == "DAY") return TimeOfDay::DAY;
    if (s == "NIGHT") return TimeOfDay::NIGHT;
    return TimeOfDay::UNKNOWN;
}

void add_default_addressees(ScriptIR& ir) {
    for (std::size_t i = 0; i < ir.dialogues.size(); ++i)
        if (ir.dialogues[i].addressee_ids.empty())
            if (auto a = default_addressee(ir.dialogues, i)) ir.dialogues[i].addressee_ids.push_back(*a);
}

void check_extraction_shape(const nlohmann::json& reply) {
    for (const auto& c : array_field(reply, "characters")) {
        string_field(c, "name");
        string_list(c, "aliases");
        string_field(c, "description");
    }
    for (const auto& s : array_field(reply, "spots")) {
        string_field(s, "name");
        string_field(s, "description");
    }
    for (const auto& d : array_field(reply, "dialogues")) string_list(d, "addressees");
}

void reconcile_screenplay(ScriptIR& ir, const nlohmann::json& reply, DirectorLog& log) {
    for (const auto& c : array_field(reply, "characters")) {
        const std::string name = string_field(c, "name");
        auto id = resolve_character(ir, name);
        if (!id) {
            log.event("IgnoredEntity", "backend proposed unknown character '" + name + "'");
            continue;
        }
        auto* rec = ir.find_character(*id);
        for (const auto& alias : string_list(c, "aliases")) {
            if (is_blank(alias) || alias == rec->name) continue;
            if (std::find(rec->aliases.begin(), rec->aliases.end(), alias) != rec->aliases.end()) continue;
            auto owner = resolve_character(ir, alias);
            if (owner && *owner != rec->id) continue;
            rec->aliases.push_back(alias);
        }
        if (rec->coarse_description.empty()) rec->coarse_description = collapse_whitespace(string_field(c, "description"));
    }
    for (const auto& s : array_field(reply, "spots")) {
        const std::string name = string_field(s, "name");
        auto id = resolve_spot(ir, name);
        if (!id) {
            log.event("IgnoredEntity", "backend proposed unknown spot '" + name + "'");
            continue;
        }
        auto* rec = ir.find_spot(*id);
        if (rec->description.empty()) rec->description = collapse_whitespace(string_field(s, "description"));
    }
    for (const auto& d : array_field(reply, "dialogues")) {
        if (!d.contains("id") || !d["id"].is_number_integer()) continue;
        int sid = d["id"].get<int>();
        if (sid < 0 || sid >= static_cast<int>(ir.dialogues.size())) continue;
        auto& seg = ir.dialogues[static_cast<std::size_t>(sid)];
        for (const auto& name : string_list(d, "addressees")) {
            auto id = resolve_character(ir, name);
            if (!id || *id == seg.speaker_id) continue;
            if (std::find(seg.addressee_ids.begin(), seg.addressee_ids.end(), *id) == seg.addressee_ids.end())
                seg.addressee_ids.push_back(*id);
        }
    }
}

CharacterRecord& ensure_character(ScriptIR& ir, const std::string& surface) {
    if (auto id = resolve_character(ir, surface)) return *ir.find_character(*id);
    auto key = try_normalize(surface);
    if (!key) schema_fail("character name '" + surface + "' normalizes to nothing");
    CharacterRecord c;
    c.id = *key;
    c.name = std::string(trim(surface));
    ir.characters.push_back(std::move(c));
    return ir.characters.back();
}

ScriptIR build_prose_ir(const RawScript& script, const nlohmann::json& reply) {
    ScriptIR ir;
    ir.raw = script;
    for (const auto& c : array_field(reply, "characters")) {
        const std::string name = string_field(c, "name");
        if (is_blank(name)) schema_fail("character without a name");
        auto& rec = ensure_character(ir, name);
        for (const auto& alias : string_list(c, "aliases"))
            if (!is_blank(alias) && alias != rec.name &&
                std::find(rec.aliases.begin(), rec.aliases.end(), alias) == rec.aliases.end())
                rec.aliases.push_back(alias);
        if (rec.coarse_description.empty()) rec.coarse_description = collapse_whitespace(string_field(c, "description"));
    }
    for (const auto& s : array_field(reply, "spots")) {
        const std::string name = string_field(s, "name");
        if (is_blank(name)) schema_fail("spot without a name");
        auto key = try_normalize(name);
        if (!key) schema_fail("spot name '" + name + "' normalizes to nothing");
        if (ir.find_spot(*key)) continue;
        SpotRecord rec;
        rec.id = *key;
        rec.name = std::string(trim(name));
        rec.interior_exterior = parse_ie(string_field(s, "interior_exterior"));
        rec.time_of_day = parse_tod(string_field(s, "time_of_day"));
        rec.description = collapse_whitespace(string_field(s, "description"));
        ir.spots.push_back(std::move(rec));
    }
    if (ir.spots.empty()) {
        SpotRecord rec;
        rec.id = "story";
        rec.name = "STORY";
        ir.spots.push_back(std::move(rec));
    }

    std::size_t cursor = 0;
    std::string current_spot = ir.spots.front().id;
    for (const auto& d : array_field(reply, "dialogues")) {
        const std::string line = string_field(d, "line");
        if (is_blank(line)) schema_fail("dialogue with an empty line");
        auto pos = script.text.find(line, cursor);
        if (pos == std::string::npos) pos = script.text.find(line);
        if (pos == std::string::npos) schema_fail("line is not a verbatim substring of the source: '" + line + "'");
        cursor = pos + line.size();

        const std::string speaker = string_field(d, "speaker");
        if (is_blank(speaker))
            throw Error(Errc::UnattributableDialogue, "no speaker for quote '" + line + "' at byte " + std::to_string(pos));
        DialogueSegment seg;
        seg.speaker_id = ensure_character(ir, speaker).id;
        const std::string spot = string_field(d, "spot");
        if (!is_blank(spot)) {
            auto id = resolve_spot(ir, spot);
            if (!id) schema_fail("dialogue names unknown spot '" + spot + "'");
            current_spot = *id;
        }
        seg.spot_id = current_spot;
        for (const auto& a : string_list(d, "addressees")) {
            auto id = resolve_character(ir, a);
            if (id && *id != seg.speaker_id &&
                std::find(seg.addressee_ids.begin(), seg.addressee_ids.end(), *id) == seg.addressee_ids.end())
                seg.addressee_ids.push_back(*id);
        }
        seg.line = line;
        seg.source_offset = pos;
        seg.page = static_cast<int>(script.page_of(pos));
        ir.dialogues.push_back(std::move(seg));
    }
    std::stable_sort(ir.dialogues.begin(), ir.dialogues.end(),
                     [](const auto& a, const auto& b) { return a.source_offset < b.source_offset; });
    for (std::size_t i = 0; i < ir.dialogues.size(); ++i) ir.dialogues[i].id = static_cast<int>(i);
    add_default_addressees(ir);

    auto problems = validate(ir);
    if (!problems.empty()) schema_fail("extraction violates IR invariants: " + problems.front());
    return ir;
}

} // namespace

ScriptIR extract_elements(const RawScript& script, const PromptTemplate& instruction, const ChatBackend& backend,
                          DirectorLog& log, const ParseOptions& options) {
    if (is_blank(script.text)) throw Error(Errc::InvalidInput, "script text is empty");
    if (instruction.id != PromptId::I0_extract) throw Error(Errc::InvalidInput, "extraction needs the I0 template");
    const bool prose = script.source_kind == SourceKind::prose;
    std::map<std::string, std::string> slots = {{"kind", prose ? "prose" : "screenplay"},
                                                {"script", wrap_payload("SCRIPT", script.text)}};
    if (!prose) {
        ParseOptions parse_options = options;
        parse_options.max_segments_per_page.reset();
        ScriptIR ir = parse_screenplay(script.text, parse_options);
        if (ir.raw.text == script.text) ir.raw = script;
        ir.raw.source_kind = SourceKind::screenplay;
        for (auto& d : ir.dialogues) d.page = static_cast<int>(ir.raw.page_of(d.source_offset));

        auto reply = request_structured(backend, instruction, slots, log, "I0_extract screenplay",
                                        check_extraction_shape);
        reconcile_screenplay(ir, reply, log);
        for (auto& c : ir.characters)
            if (c.coarse_description.empty()) c.coarse_description = coarse_description(ir, c);
        ensure_valid(ir);
        return ir;
    }
    std::optional<ScriptIR> built;
    request_structured(backend, instruction, slots, log, "I0_extract prose", [&](const nlohmann::json& reply) {
        check_extraction_shape(reply);
        built = build_prose_ir(script, reply);
    });
    for (auto& c : built->characters)
        if (c.coarse_description.empty()) c.coarse_description = coarse_description(*built, c);
    if (built->dialogues.empty()) log.event("Narration", "no quoted dialogue found; narration kept in spot descriptions");
    return std::move(*built);
}

// ---------------------------------------------------------------------------
// Refinement

std::string character_ref(std::string_view id) { return "character:" + std::string(id); }
std::string spot_ref(std::string_view id) { return "spot:" + std::string(id); }

std::vector<std::string> all_record_refs(const ScriptIR& ir) {
    std::vector<std::string> out;
    for (const auto& c : ir.characters) out.push_back(character_ref(c.id));
    for (const auto& s : ir.spots) out.push_back(spot_ref(s.id));
    return out;
}

namespace {

bool is_gap(const std::string& v) { return is_blank(v) || v == kUnspecified; }

void check_refinement_shape(const nlohmann::json& reply) {
    if (!reply.contains("profile") || reply["profile"].is_null()) return;
    if (!reply["profile"].is_object()) schema_fail("'profile' must be an object");
    for (auto& [k, v] : reply["profile"].items())
        if (!v.is_string() && !v.is_null()) schema_fail("profile field '" + k + "' must be a string");
}

template <typename Profile>
std::string field_list(const Profile& p, bool gaps) {
    std::string out;
    for (std::size_t i = 0; i < Profile::field_names.size(); ++i) {
        if (is_gap(p.at(i)) != gaps) continue;
        if (!out.empty()) out += ", ";
        out += Profile::field_names[i];
    }
    return out;
}

template <typename Record, typename Profile>
void refine_record(Record& rec, const std::string& ref, const Profile& grounded, const std::string& source,
                   const PromptTemplate& instruction, int rounds, const ChatBackend& backend, DirectorLog& log) {
    Profile& profile = rec.refined_profile;
    for (std::size_t i = 0; i < Profile::field_names.size(); ++i)
        if (is_gap(profile.at(i)) && !grounded.at(i).empty()) profile.at(i) = grounded.at(i);

    for (int round = 1; round <= rounds; ++round) {
        const std::string missing = field_list(profile, true);
        if (!missing.empty()) {
            const std::string label = "I1_refine " + ref + " round " + std::to_string(round);
            auto reply = request_structured(backend, instruction,
                                            {{"source_excerpt", wrap_payload("SOURCE", source)},
                                             {"record_json", wrap_payload("RECORD", nlohmann::json(rec).dump(2))},
                                             {"round", std::to_string(round)},
                                             {"missing_fields", wrap_payload("MISSING", missing)}},
                                            log, label, check_refinement_shape);
            if (reply.contains("profile") && reply["profile"].is_object()) {
                for (auto& [key, value] : reply["profile"].items()) {
                    auto it = std::find(Profile::field_names.begin(), Profile::field_names.end(), key);
                    if (it == Profile::field_names.end() || !value.is_string()) continue;
                    auto idx = static_cast<std::size_t>(it - Profile::field_names.begin());
                    std::string proposed = utf8_truncate(collapse_whitespace(value.template get<std::string>()), 120);
                    std::string& current = profile.at(idx);
                    if (is_gap(current)) {
                        if (!proposed.empty()) current = proposed;
                    } else if (!grounded.at(idx).empty() && !proposed.empty() && proposed != current) {
                        log.event("ContradictionDetected", ref + "." + key + ": text says '" + current +
                                                               "', backend proposed '" + proposed + "'; kept text value");
                    }
                }
            }
            if constexpr (std::is_same_v<Record, CharacterRecord>) {
                if (rec.coarse_description.empty() && reply.contains("coarse_description") &&
                    reply["coarse_description"].is_string())
                    rec.coarse_description = collapse_whitespace(reply["coarse_description"].template get<std::string>());
            }
        }
        ++rec.refinement_round;
    }
    for (std::size_t i = 0; i < Profile::field_names.size(); ++i) {
        if (is_blank(profile.at(i))) {
            profile.at(i) = kUnspecified;
            log.event("UnfilledField", ref + "." + std::string(Profile::field_names[i]) + " left unspecified");
        }
    }
}

} // namespace

ScriptIR refine_entities(const ScriptIR& ir, const std::vector<std::string>& targets,
                         const PromptTemplate& instruction, int rounds, const ChatBackend& backend,
                         DirectorLog& log) {
    if (rounds < 1) throw Error(Errc::InvalidInput, "refinement needs at least one round");
    if (instruction.id != PromptId::I1_refine) throw Error(Errc::InvalidInput, "refinement needs the I1 template");
    struct Target {
        bool character;
        std::size_t index;
        std::string ref;
    };
    std::vector<Target> resolved;
    for (const auto& t : targets) {
        std::string_view id = t;
        bool want_char = true, want_spot = true;
        if (id.rfind("character:", 0) == 0) {
            id.remove_prefix(10);
            want_spot = false;
        } else if (id.rfind("spot:", 0) == 0) {
            id.remove_prefix(5);
            want_char = false;
        }
        std::optional<Target> found;
        for (std::size_t i = 0; want_char && !found && i < ir.characters.size(); ++i)
            if (ir.characters[i].id == id) found = Target{true, i, character_ref(id)};
        for (std::size_t i = 0; want_spot && !found && i < ir.spots.size(); ++i)
            if (ir.spots[i].id == id) found = Target{false, i, spot_ref(id)};
        if (!found) throw Error(Errc::UnknownRecord, "refinement target '" + t + "' does not resolve");
        resolved.push_back(*found);
    }

    ScriptIR out = ir;
    std::vector<DirectorLog> logs(resolved.size());
    std::vector<std::future<void>> tasks;
    for (std::size_t k = 0; k < resolved.size(); ++k) {
        tasks.push_back(std::async(std::launch::async, [&, k] {
            const auto& t = resolved[k];
            if (t.character) {
                auto& rec = out.characters[t.index];
                std::string source;
                for (const auto& s : evidence_sentences(ir, ir.characters[t.index])) source += s + "\n";
                refine_record(rec, t.ref, ground_character(ir, ir.characters[t.index]), source, instruction, rounds,
                              backend, logs[k]);
            } else {
                auto& rec = out.spots[t.index];
                refine_record(rec, t.ref, ground_spot(ir, ir.spots[t.index]), ir.spots[t.index].description,
                              instruction, rounds, backend, logs[k]);
            }
        }));
    }
    std::exception_ptr first_error;
    for (auto& task : tasks) {
        try {
            task.get();
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    for (const auto& l : logs) log.append(l);
    if (first_error) std::rethrow_exception(first_error);
    ensure_valid(out);
    return out;
}

// ---------------------------------------------------------------------------
// Database

namespace {

void add_alias(ElementDatabase& db, const std::string& surface, const std::string& ref, DirectorLog* log) {
    auto key = try_normalize(surface);
    if (!key) return;
    std::vector<std::string> keys{*key};
    for (std::string_view article : {"the-", "a-", "an-"})
        if (key->rfind(article, 0) == 0 && key->size() > article.size()) keys.push_back(key->substr(article.size()));
    for (const auto& k : keys) {
        auto [it, inserted] = db.alias_index.emplace(k, ref);
        if (!inserted && it->second != ref) {
            std::string note = "'" + k + "' claimed by " + it->second + " and " + ref + "; " + it->second + " kept";
            if (std::find(db.duplicate_aliases.begin(), db.duplicate_aliases.end(), note) == db.duplicate_aliases.end()) {
                db.duplicate_aliases.push_back(note);
                if (log) log->event("DuplicateAlias", note);
            }
        }
    }
}

void add_tokens(ElementDatabase& db, std::string_view text, const std::string& ref) {
    for (const auto& tok : content_tokens(text)) {
        auto& refs = db.lexical_index[tok];
        if (std::find(refs.begin(), refs.end(), ref) == refs.end()) refs.push_back(ref);
    }
}

} // namespace

const CharacterRecord* ElementDatabase::find_character(std::string_view id) const {
    for (const auto& c : characters)
        if (c.id == id) return &c;
    return nullptr;
}

const SpotRecord* ElementDatabase::find_spot(std::string_view id) const {
    for (const auto& s : spots)
        if (s.id == id) return &s;
    return nullptr;
}

ScriptIR ElementDatabase::to_ir(const RawScript& raw) const {
    ScriptIR ir;
    ir.raw = raw;
    ir.characters = characters;
    ir.spots = spots;
    ir.dialogues = dialogues;
    return ir;
}

ElementDatabase index_records(const ScriptIR& ir, DirectorLog* log) {
    ElementDatabase db;
    db.characters = ir.characters;
    db.spots = ir.spots;
    db.dialogues = ir.dialogues;
    for (const auto& c : db.characters) {
        const std::string ref = character_ref(c.id);
        add_alias(db, c.id, ref, log);
        add_alias(db, c.name, ref, log);
        for (const auto& a : c.aliases) add_alias(db, a, ref, log);
    }
    for (const auto& s : db.spots) {
        const std::string ref = spot_ref(s.id);
        add_alias(db, s.id, ref, log);
        add_alias(db, s.name, ref, log);
    }
    for (const auto& c : db.characters) {
        const std::string ref = character_ref(c.id);
        add_tokens(db, c.name, ref);
        for (const auto& a : c.aliases) add_tokens(db, a, ref);
        add_tokens(db, c.coarse_description, ref);
        for (std::size_t i = 0; i < CharacterProfile::field_names.size(); ++i)
            add_tokens(db, c.refined_profile.at(i), ref);
    }
    for (const auto& s : db.spots) {
        const std::string ref = spot_ref(s.id);
        add_tokens(db, s.name, ref);
        add_tokens(db, s.description, ref);
        for (std::size_t i = 0; i < SpotProfile::field_names.size(); ++i) add_tokens(db, s.refined_profile.at(i), ref);
    }
    for (const auto& d : db.dialogues) add_tokens(db, d.line, "dialogue:" + std::to_string(d.id));
    return db;
}

ElementDatabase rebuild(const ElementDatabase& db) {
    ScriptIR ir;
    ir.characters = db.characters;
    ir.spots = db.spots;
    ir.dialogues = db.dialogues;
    return index_records(ir);
}

void save_database(const ElementDatabase& db, const std::filesystem::path& dir) {
    write_file(dir / "characters.json", nlohmann::json(db.characters).dump(2) + "\n");
    write_file(dir / "spots.json", nlohmann::json(db.spots).dump(2) + "\n");
    write_file(dir / "dialogues.json", nlohmann::json(db.dialogues).dump(2) + "\n");
}

ElementDatabase load_database(const std::filesystem::path& dir) {
    ScriptIR ir;
    try {
        ir.characters = nlohmann::json::parse(read_text_file(dir / "characters.json")).get<std::vector<CharacterRecord>>();
        ir.spots = nlohmann::json::parse(read_text_file(dir / "spots.json")).get<std::vector<SpotRecord>>();
        ir.dialogues = nlohmann::json::parse(read_text_file(dir / "dialogues.json")).get<std::vector<DialogueSegment>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaViolation, "database in " + dir.string() + ": " + e.what());
    }
    return index_records(ir);
}

RetrievedContext retrieve_context(const ElementDatabase& db, int segment_id, int window) {
    if (window < 0) throw Error(Errc::InvalidInput, "window must be >= 0");
    auto it = std::find_if(db.dialogues.begin(), db.dialogues.end(), [&](const auto& d) { return d.id == segment_id; });
    if (it == db.dialogues.end()) throw Error(Errc::UnknownSegment, "segment " + std::to_string(segment_id));
    const auto& seg = *it;
    RetrievedContext ctx;
    ctx.segment_id = segment_id;
    const auto* speaker = db.find_character(seg.speaker_id);
    const auto* spot = db.find_spot(seg.spot_id);
    if (!speaker) throw Error(Errc::UnknownRecord, "speaker " + seg.speaker_id);
    if (!spot) throw Error(Errc::UnknownRecord, "spot " + seg.spot_id);
    ctx.speaker = *speaker;
    ctx.spot = *spot;

    std::vector<std::string> addressees = seg.addressee_ids;
    if (addressees.empty())
        if (auto a = default_addressee(db.dialogues, static_cast<std::size_t>(it - db.dialogues.begin())))
            addressees.push_back(*a);
    for (const auto& a : addressees) {
        if (a == seg.speaker_id) continue;
        const auto* rec = db.find_character(a);
        if (!rec) throw Error(Errc::UnknownRecord, "addressee " + a);
        ctx.addressees.push_back(*rec);
    }
    for (auto p = std::make_reverse_iterator(it);
         p != db.dialogues.rend() && p->spot_id == seg.spot_id && static_cast<int>(ctx.recent_segments.size()) < window;
         ++p)
        ctx.recent_segments.push_back(*p);
    std::reverse(ctx.recent_segments.begin(), ctx.recent_segments.end());
    return ctx;
}

std::vector<LookupHit> lookup(const ElementDatabase& db, std::string_view query) {
    std::set<std::string> exact_refs;
    if (auto key = try_normalize(query)) {
        std::vector<std::string> keys{*key};
        for (std::string_view article : {"the-", "a-", "an-"})
            if (key->rfind(article, 0) == 0 && key->size() > article.size()) keys.push_back(key->substr(article.size()));
        for (const auto& k : keys)
            if (auto a = db.alias_index.find(k); a != db.alias_index.end()) exact_refs.insert(a->second);
    }
    std::set<std::string> tokens;
    for (const auto& t : content_tokens(query)) tokens.insert(t);

    std::vector<LookupHit> hits;
    int ordinal = 0;
    auto consider = [&](const std::string& ref) {
        LookupHit h;
        h.ref = ref;
        h.ordinal = ordinal++;
        h.exact_alias = exact_refs.count(ref) > 0;
        for (const auto& t : tokens) {
            auto e = db.lexical_index.find(t);
            if (e != db.lexical_index.end() && std::find(e->second.begin(), e->second.end(), ref) != e->second.end())
                ++h.overlap;
        }
        if (h.exact_alias || h.overlap > 0) hits.push_back(std::move(h));
    };
    for (const auto& c : db.characters) consider(character_ref(c.id));
    for (const auto& s : db.spots) consider(spot_ref(s.id));
    std::stable_sort(hits.begin(), hits.end(), [](const LookupHit& a, const LookupHit& b) {
        if (a.exact_alias != b.exact_alias) return a.exact_alias;
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        return a.ordinal < b.ordinal;
    });
    return hits;
}

} // namespace scriptboard
