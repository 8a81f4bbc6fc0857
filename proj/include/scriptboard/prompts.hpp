#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace scriptboard {

enum class PromptId { I0_extract, I1_refine, I2_view_select, I3_boundary, I4_compose };

std::string_view prompt_id_name(PromptId id);
PromptId prompt_id_from_name(std::string_view name);

/// Slot names each template must use, no more and no fewer.
const std::set<std::string>& documented_slots(PromptId id);

/// Schema tag of the structured reply expected for a template.
std::string_view prompt_schema(PromptId id);

/// Instruction template. Text files start with a "# requires_cot: true|false"
/// line followed by "[system]" and "[user]" sections; `{name}` marks a slot.
struct PromptTemplate {
    PromptId id = PromptId::I0_extract;
    std::string system;
    std::string user;
    bool requires_cot = false;

    /// Throws InvalidInput when the text is malformed or its slots differ
    /// from documented_slots(id), or when I0/I1 lack requires_cot.
    static PromptTemplate parse(PromptId id, std::string_view text);

    std::set<std::string> placeholders() const;

    struct Rendered {
        std::string system;
        std::string user;
    };
    /// Substitutes every slot; the schema instruction is appended to the
    /// system message. Throws InvalidInput for missing or unknown values.
    Rendered render(const std::map<std::string, std::string>& values) const;
};

/// Loads `<dir>/<id>.txt` when `dir` is given and the file exists, else the
/// built-in copy of the shipped template.
PromptTemplate load_prompt(PromptId id, const std::optional<std::filesystem::path>& dir = std::nullopt);

struct PromptSet {
    PromptTemplate extract;
    PromptTemplate refine;
    PromptTemplate view_select;
    PromptTemplate boundary;
    PromptTemplate compose;

    static PromptSet load(const std::optional<std::filesystem::path>& dir = std::nullopt);
};

} // namespace scriptboard
