#include "scriptboard/grounding.hpp"

#include "scriptboard/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>
#include <set>

namespace scriptboard {

namespace {

struct Word {
    std::size_t begin;
    std::size_t end;
    std::string lower;
};

std::vector<Word> words_of(std::string_view s) {
    std::vector<Word> out;
    std::size_t i = 0;
    auto word_char = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-';
    };
    while (i < s.size()) {
        while (i < s.size() && !word_char(s[i])) ++i;
        std::size_t b = i;
        while (i < s.size() && word_char(s[i])) ++i;
        if (i > b) out.push_back({b, i, ascii_lower(s.substr(b, i - b))});
    }
    return out;
}

const std::set<std::string>& function_words() {
    static const std::set<std::string> w = {
        "a",     "an",    "the",   "his",  "her",   "their",   "its",   "my",   "your", "our",
        "in",    "with",  "wearing", "wears", "and", "of",     "on",    "to",   "is",   "was",
        "are",   "worn",  "dressed", "has", "had",  "at",      "by",    "from", "for",  "into",
        "under", "over",  "she",   "he",   "they",  "it",      "this",  "that", "these", "those",
        "who",   "still", "now",   "puts", "pulls", "adjusts", "grabs", "takes", "holds", "wear",
        "sports", "carries", "have", "be",  "as",   "like",    "but",   "or",   "not",  "no"};
    return w;
}

bool modifier(const Word& w) {
    if (function_words().count(w.lower)) return false;
    return std::all_of(w.lower.begin(), w.lower.end(),
                       [](char c) { return std::islower(static_cast<unsigned char>(c)) || c == '-' || c == '\''; });
}

/// First "<up to 2 modifiers> <noun>" phrase; requires `min_mods` modifiers.
std::optional<std::string> noun_phrase(std::string_view sentence, const std::set<std::string>& nouns, int min_mods) {
    auto words = words_of(sentence);
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!nouns.count(words[i].lower)) continue;
        std::size_t first = i;
        int mods = 0;
        while (mods < 2 && first > 0 && modifier(words[first - 1])) {
            // Modifiers must be adjacent words separated by spaces only.
            std::string_view gap = sentence.substr(words[first - 1].end, words[first].begin - words[first - 1].end);
            if (gap.find_first_not_of(' ') != std::string_view::npos) break;
            --first;
            ++mods;
        }
        if (mods < min_mods) continue;
        return std::string(sentence.substr(words[first].begin, words[i].end - words[first].begin));
    }
    return std::nullopt;
}

std::optional<std::string> first_word_of(std::string_view sentence, const std::set<std::string>& vocab) {
    for (const auto& w : words_of(sentence))
        if (vocab.count(w.lower)) return std::string(sentence.substr(w.begin, w.end - w.begin));
    return std::nullopt;
}

std::optional<std::string> first_regex(std::string_view sentence, const std::regex& re) {
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(sentence.begin(), sentence.end(), m, re)) return m[0].str();
    return std::nullopt;
}

const std::set<std::string> kClothing = {
    "dress",  "dresses", "coat",   "jacket",   "shirt",   "suit",     "hat",    "scarf",  "sweater",
    "jeans",  "skirt",   "uniform", "gown",    "cloak",   "blouse",   "hoodie", "boots",  "trousers",
    "overcoat", "raincoat", "cap",  "vest",    "t-shirt", "robe",     "tie",    "cardigan", "apron",
    "overalls", "tuxedo", "shawl", "beret",    "sneakers", "sandals", "pants",  "parka",  "blazer"};
const std::set<std::string> kHair = {"hair", "ponytail", "braid", "braids", "curls", "bun", "dreadlocks"};
const std::set<std::string> kBuild = {"tall",    "slender", "slim",   "lanky",  "stocky",  "broad-shouldered",
                                      "heavyset", "petite", "wiry",   "muscular", "thin",  "burly",
                                      "plump",   "skinny",  "gaunt",  "towering", "hulking", "willowy"};
const std::set<std::string> kFeatures = {"scar",   "beard",   "mustache", "moustache", "glasses",  "spectacles",
                                         "freckles", "tattoo", "earrings", "earring",  "eyepatch", "limp",
                                         "cane",   "birthmark", "stubble", "sunglasses", "dimples", "wrinkles",
                                         "necklace", "bracelet", "locket", "pendant"};
const std::set<std::string> kLighting = {"candlelit", "moonlit", "sunlit",   "dim",    "neon",  "fluorescent",
                                         "shadowy",   "lamplit", "firelit",  "gloomy", "bright", "sun-drenched",
                                         "dark",      "floodlit", "starlit", "hazy"};
const std::set<std::string> kColors = {"red",   "blue",   "green", "yellow", "orange", "purple", "pink",  "white",
                                       "black", "grey",   "gray",  "brown",  "golden", "silver", "amber", "crimson",
                                       "teal",  "beige",  "ochre", "violet", "turquoise"};
const std::set<std::string> kProps = {"table",  "tables", "booth",  "booths", "bench",   "counter", "rail",
                                      "bar",    "bookshelf", "piano", "car",   "boat",    "lamp",    "window",
                                      "windows", "bed",   "desk",   "fountain", "tree",   "trees",   "chair",
                                      "chairs", "sofa",   "stage",  "clock",  "fireplace", "bookshelves", "railing",
                                      "espresso", "machine", "shelves", "crates", "lanterns", "umbrellas"};

bool mentions(std::string_view sentence, const std::vector<std::string>& surfaces) {
    std::string lower = ascii_lower(sentence);
    for (const auto& s : surfaces) {
        std::string needle = ascii_lower(s);
        if (needle.empty()) continue;
        for (std::size_t pos = lower.find(needle); pos != std::string::npos; pos = lower.find(needle, pos + 1)) {
            bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(lower[pos - 1]));
            std::size_t e = pos + needle.size();
            bool right = e >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[e]));
            if (left && right) return true;
        }
    }
    return false;
}

bool pronoun_led(std::string_view sentence) {
    auto words = words_of(sentence);
    if (words.empty()) return false;
    static const std::set<std::string> p = {"he", "she", "they", "his", "her", "their"};
    return p.count(words.front().lower) > 0;
}

struct Sentence {
    std::string_view text;
    bool paragraph_start;
};

/// Narration sentences of the script: dialogue lines, cues, parentheticals
/// and scene headings removed.
std::vector<Sentence> narration_sentences(const ScriptIR& ir) {
    const std::string& text = ir.raw.text;
    std::vector<bool> masked(text.size(), false);
    for (const auto& d : ir.dialogues)
        for (std::size_t i = d.source_offset; i < d.source_offset + d.line.size() && i < text.size(); ++i)
            masked[i] = true;
    if (ir.raw.source_kind == SourceKind::screenplay) {
        auto lines = split_lines(text);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            auto t = trim(lines[i].text);
            bool next_text = i + 1 < lines.size() && !is_blank(lines[i + 1].text);
            bool drop = parse_scene_heading(t).has_value() || (t.size() >= 2 && t.front() == '(' && t.back() == ')') ||
                        (next_text && cue_name(t).has_value());
            if (drop)
                for (std::size_t k = lines[i].begin; k < lines[i].end; ++k) masked[k] = true;
        }
    }
    std::vector<Sentence> out;
    std::size_t start = std::string::npos;
    bool paragraph_start = true;
    auto flush = [&](std::size_t end) {
        if (start == std::string::npos) return;
        std::string_view s = trim(std::string_view(text).substr(start, end - start));
        if (!s.empty()) {
            out.push_back({s, paragraph_start});
            paragraph_start = false;
        }
        start = std::string::npos;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (masked[i]) {
            flush(i);
            continue;
        }
        char c = text[i];
        if (c == '\n' && i + 1 < text.size() && text[i + 1] == '\n') {
            flush(i);
            paragraph_start = true;
            continue;
        }
        if (start == std::string::npos) {
            if (std::isspace(static_cast<unsigned char>(c))) continue;
            start = i;
        }
        if ((c == '.' || c == '!' || c == '?') && (i + 1 >= text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))))
            flush(i + 1);
    }
    flush(text.size());
    return out;
}

std::vector<std::string> surfaces_of(const CharacterRecord& c) {
    std::vector<std::string> s{c.name};
    s.insert(s.end(), c.aliases.begin(), c.aliases.end());
    return s;
}

} // namespace

std::vector<std::string> evidence_sentences(const ScriptIR& ir, const CharacterRecord& character) {
    std::vector<std::string> out;
    const auto surfaces = surfaces_of(character);
    bool carrying = false;
    for (const auto& s : narration_sentences(ir)) {
        if (s.paragraph_start) carrying = false;
        if (mentions(s.text, surfaces)) {
            out.emplace_back(s.text);
            carrying = true;
        } else if (carrying && pronoun_led(s.text)) {
            out.emplace_back(s.text);
        } else {
            carrying = false;
        }
    }
    return out;
}

CharacterProfile ground_character(const ScriptIR& ir, const CharacterRecord& character) {
    static const std::regex decade(R"(\b(?:(?:early|mid|late)[- ])?[1-9]0s\b|\b\d{1,2}-year-old\b)",
                                   std::regex::icase);
    static const std::regex age_word(R"(\b(?:middle-aged|elderly|teenaged|teenage|adolescent|young|aging|ageing)\b)",
                                     std::regex::icase);
    CharacterProfile p;
    const auto sentences = evidence_sentences(ir, character);
    auto fill = [](std::string& field, std::optional<std::string> value) {
        if (field.empty() && value) field = std::move(*value);
    };
    for (const auto& s : sentences) {
        fill(p.age_band, first_regex(s, decade));
        fill(p.hair, noun_phrase(s, kHair, 1));
        fill(p.clothing, noun_phrase(s, kClothing, 0));
        fill(p.build, first_word_of(s, kBuild));
        fill(p.distinguishing_features, noun_phrase(s, kFeatures, 0));
    }
    if (p.age_band.empty())
        for (const auto& s : sentences) fill(p.age_band, first_regex(s, age_word));
    if (p.hair.empty())
        for (const auto& s : sentences) fill(p.hair, first_word_of(s, {"bald"}));
    return p;
}

SpotProfile ground_spot(const ScriptIR&, const SpotRecord& spot) {
    SpotProfile p;
    const std::string& d = spot.description;
    if (auto v = first_word_of(d, kLighting)) p.lighting = *v;
    if (auto v = first_word_of(d, kColors)) p.palette = *v;
    if (auto v = noun_phrase(d, kProps, 0)) p.props = *v;
    return p;
}

std::string coarse_description(const ScriptIR& ir, const CharacterRecord& character) {
    std::string out;
    for (const auto& s : evidence_sentences(ir, character)) {
        if (!out.empty()) out += ' ';
        out += collapse_whitespace(s);
        if (out.size() > 300) break;
    }
    return utf8_truncate(out, 300);
}

} // namespace scriptboard
