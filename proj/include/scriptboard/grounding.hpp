#pragma once

#include <string>
#include <vector>

#include "scriptboard/script_ir.hpp"

namespace scriptboard {

/// Sentences of narration (dialogue lines excluded) that mention a record,
/// including pronoun-led follow-up sentences in the same paragraph.
std::vector<std::string> evidence_sentences(const ScriptIR& ir, const CharacterRecord& character);

/// Profile values stated outright in the source text. Every non-empty value
/// is a verbatim substring of the script.
CharacterProfile ground_character(const ScriptIR& ir, const CharacterRecord& character);
SpotProfile ground_spot(const ScriptIR& ir, const SpotRecord& spot);

/// Short free-text summary assembled from evidence sentences.
std::string coarse_description(const ScriptIR& ir, const CharacterRecord& character);

} // namespace scriptboard
