#include "scriptboard/prompts.hpp"

#include "embedded_prompts.hpp"
#include "scriptboard/backends.hpp"
#include "scriptboard/error.hpp"
#include "scriptboard/text_util.hpp"

#include <regex>

namespace scriptboard {

namespace {

constexpr std::pair<PromptId, std::string_view> kNames[] = {
    {PromptId::I0_extract, "I0_extract"},         {PromptId::I1_refine, "I1_refine"},
    {PromptId::I2_view_select, "I2_view_select"}, {PromptId::I3_boundary, "I3_boundary"},
    {PromptId::I4_compose, "I4_compose"},
};

const std::regex& slot_regex() {
    static const std::regex re(R"(\{([a-z_]+)\})");
    return re;
}

void collect_slots(const std::string& text, std::set<std::string>& out) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), slot_regex()); it != std::sregex_iterator(); ++it)
        out.insert((*it)[1].str());
}

std::string substitute(const std::string& text, const std::map<std::string, std::string>& values) {
    std::string out;
    std::size_t last = 0;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), slot_regex()); it != std::sregex_iterator(); ++it) {
        out.append(text, last, static_cast<std::size_t>(it->position()) - last);
        out += values.at((*it)[1].str());
        last = static_cast<std::size_t>(it->position() + it->length());
    }
    out.append(text, last);
    return out;
}

std::string strip_section(std::string s) {
    while (!s.empty() && (s.front() == '\n')) s.erase(s.begin());
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
    return s;
}

} // namespace

std::string_view prompt_id_name(PromptId id) {
    for (auto& [k, name] : kNames)
        if (k == id) return name;
    return "?";
}

PromptId prompt_id_from_name(std::string_view name) {
    for (auto& [k, n] : kNames)
        if (n == name) return k;
    throw Error(Errc::InvalidInput, "unknown prompt id " + std::string(name));
}

const std::set<std::string>& documented_slots(PromptId id) {
    static const std::map<PromptId, std::set<std::string>> slots = {
        {PromptId::I0_extract, {"kind", "script"}},
        {PromptId::I1_refine, {"source_excerpt", "record_json", "round", "missing_fields"}},
        {PromptId::I2_view_select, {"shot", "context", "candidates"}},
        {PromptId::I3_boundary, {"shot", "selections", "boxes"}},
        {PromptId::I4_compose, {"caption", "panel"}},
    };
    return slots.at(id);
}

std::string_view prompt_schema(PromptId id) {
    switch (id) {
    case PromptId::I0_extract: return "extraction.v1";
    case PromptId::I1_refine: return "refinement.v1";
    case PromptId::I2_view_select: return "view_selection.v1";
    case PromptId::I3_boundary: return "boundary.v1";
    case PromptId::I4_compose: return "composition.v1";
    }
    return "";
}

PromptTemplate PromptTemplate::parse(PromptId id, std::string_view raw) {
    const std::string text = normalize_newlines(raw);
    const std::string name(prompt_id_name(id));
    static const std::regex header(R"(^# requires_cot: (true|false)\n)");
    std::smatch m;
    if (!std::regex_search(text, m, header))
        throw Error(Errc::InvalidInput, "prompt " + name + ": missing '# requires_cot:' header");
    PromptTemplate t;
    t.id = id;
    t.requires_cot = m[1].str() == "true";
    const auto sys = text.find("[system]\n");
    const auto usr = text.find("[user]\n");
    if (sys == std::string::npos || usr == std::string::npos || usr < sys)
        throw Error(Errc::InvalidInput, "prompt " + name + ": expected [system] then [user] sections");
    t.system = strip_section(text.substr(sys + 9, usr - sys - 9));
    t.user = strip_section(text.substr(usr + 7));

    const auto found = t.placeholders();
    const auto& expected = documented_slots(id);
    if (found != expected) {
        std::string detail;
        for (const auto& s : expected)
            if (!found.count(s)) detail += " missing {" + s + "}";
        for (const auto& s : found)
            if (!expected.count(s)) detail += " unknown {" + s + "}";
        throw Error(Errc::InvalidInput, "prompt " + name + ":" + detail);
    }
    if ((id == PromptId::I0_extract || id == PromptId::I1_refine) && !t.requires_cot)
        throw Error(Errc::InvalidInput, "prompt " + name + " must set requires_cot: true");
    return t;
}

std::set<std::string> PromptTemplate::placeholders() const {
    std::set<std::string> out;
    collect_slots(system, out);
    collect_slots(user, out);
    return out;
}

PromptTemplate::Rendered PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    const auto slots = placeholders();
    for (const auto& s : slots)
        if (!values.count(s))
            throw Error(Errc::InvalidInput, std::string(prompt_id_name(id)) + ": no value for {" + s + "}");
    for (const auto& [k, v] : values)
        if (!slots.count(k))
            throw Error(Errc::InvalidInput, std::string(prompt_id_name(id)) + ": unknown slot {" + k + "}");
    return {substitute(system, values) + schema_instruction(std::string(prompt_schema(id))), substitute(user, values)};
}

PromptTemplate load_prompt(PromptId id, const std::optional<std::filesystem::path>& dir) {
    const std::string name(prompt_id_name(id));
    if (dir) {
        auto path = *dir / (name + ".txt");
        if (std::filesystem::exists(path)) return PromptTemplate::parse(id, read_text_file(path));
    }
    for (auto& [n, body] : embedded::kPrompts)
        if (n == name) return PromptTemplate::parse(id, body);
    throw Error(Errc::InvalidInput, "no built-in prompt " + name);
}

PromptSet PromptSet::load(const std::optional<std::filesystem::path>& dir) {
    return {load_prompt(PromptId::I0_extract, dir), load_prompt(PromptId::I1_refine, dir),
            load_prompt(PromptId::I2_view_select, dir), load_prompt(PromptId::I3_boundary, dir),
            load_prompt(PromptId::I4_compose, dir)};
}

} // namespace scriptboard
