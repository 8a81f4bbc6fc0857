#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scriptboard/backends.hpp"
#include "scriptboard/prompts.hpp"
#include "scriptboard/script_ir.hpp"

namespace scriptboard {

/// Append-only audit log shared by the model-backed stages. Lines carry no
/// timestamps so that logs are reproducible.
class DirectorLog {
public:
    void event(std::string_view kind, std::string_view detail);
    void reasoning(std::string_view label, std::string_view text);
    void append(const DirectorLog& other);

    std::vector<std::string> lines() const;
    std::size_t count(std::string_view kind) const;
    std::string text() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> lines_;
    std::vector<std::string> kinds_;
};

/// Sends a rendered prompt and returns the last ```json fenced object of the
/// reply. Text outside the fence is logged as reasoning. A reply that has no
/// parsable fence, or that `check` rejects by throwing Error, is retried
/// once with a repair note; a second failure raises SchemaViolation.
nlohmann::json request_structured(const ChatBackend& backend, const PromptTemplate& prompt,
                                  const std::map<std::string, std::string>& slots, DirectorLog& log,
                                  const std::string& label,
                                  const std::function<void(const nlohmann::json&)>& check = {});

/// Extracts the last ```json fenced block; nullopt when none parses.
std::optional<nlohmann::json> last_fenced_json(std::string_view reply, std::string* before = nullptr);

/// Wraps a structured slot payload in <<<TAG ... TAG>>> markers.
std::string wrap_payload(std::string_view tag, std::string_view body);
std::optional<std::string> unwrap_payload(std::string_view text, std::string_view tag);

/// Screenplays are parsed by the grammar and reconciled with the backend's
/// additions; prose is extracted by the backend and validated.
ScriptIR extract_elements(const RawScript& script, const PromptTemplate& instruction, const ChatBackend& backend,
                          DirectorLog& log, const ParseOptions& options = {});

/// Record references: "character:<id>" or "spot:<id>".
std::string character_ref(std::string_view id);
std::string spot_ref(std::string_view id);
std::vector<std::string> all_record_refs(const ScriptIR& ir);

inline constexpr const char* kUnspecified = "unspecified";

/// Coarse-to-fine gap filling. Text-grounded values are set first and never
/// replaced; the backend fills remaining empty fields; any field still empty
/// after all rounds becomes "unspecified" with a warning.
ScriptIR refine_entities(const ScriptIR& ir, const std::vector<std::string>& targets,
                         const PromptTemplate& instruction, int rounds, const ChatBackend& backend,
                         DirectorLog& log);

struct ElementDatabase {
    std::vector<CharacterRecord> characters;
    std::vector<SpotRecord> spots;
    std::vector<DialogueSegment> dialogues;
    /// Normalized surface form -> record reference.
    std::map<std::string, std::string> alias_index;
    /// Content token -> record references ("character:", "spot:", "dialogue:").
    std::map<std::string, std::vector<std::string>> lexical_index;
    /// Aliases claimed by more than one record; the first declaration won.
    std::vector<std::string> duplicate_aliases;

    const CharacterRecord* find_character(std::string_view id) const;
    const SpotRecord* find_spot(std::string_view id) const;
    ScriptIR to_ir(const RawScript& raw) const;

    bool operator==(const ElementDatabase&) const = default;
};

ElementDatabase index_records(const ScriptIR& ir, DirectorLog* log = nullptr);
/// Rebuilds indices from the records alone.
ElementDatabase rebuild(const ElementDatabase& db);

void save_database(const ElementDatabase& db, const std::filesystem::path& dir);
ElementDatabase load_database(const std::filesystem::path& dir);

struct RetrievedContext {
    int segment_id = 0;
    CharacterRecord speaker;
    std::vector<CharacterRecord> addressees;
    SpotRecord spot;
    std::vector<DialogueSegment> recent_segments;
};

RetrievedContext retrieve_context(const ElementDatabase& db, int segment_id, int window = 6);

struct LookupHit {
    std::string ref;
    bool exact_alias = false;
    int overlap = 0;
    int ordinal = 0;
};

/// Characters and spots ranked by exact alias match, then token overlap,
/// then declaration order. Records with neither signal are omitted.
std::vector<LookupHit> lookup(const ElementDatabase& db, std::string_view query);

struct DirectorOptions {
    int rounds = 2;
    int window = 6;
};

} // namespace scriptboard
