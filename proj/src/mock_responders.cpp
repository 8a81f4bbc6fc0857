#include "scriptboard/mock_responders.hpp"

#include "scriptboard/director.hpp"
#include "scriptboard/hashing.hpp"
#include "scriptboard/prompts.hpp"
#include "scriptboard/script_ir.hpp"
#include "scriptboard/text_util.hpp"

#include <random>
#include <regex>

namespace scriptboard {

namespace {

std::string fenced(const nlohmann::json& j, std::string_view preamble = {}) {
    std::string out(preamble);
    if (!out.empty()) out += "\n\n";
    return out + "```json\n" + j.dump(2) + "\n```\n";
}

const char* const kSpeechVerbs =
    "said|says|asked|asks|replied|replies|answered|cried|whispered|shouted|exclaimed|called|muttered|"
    "murmured|added|continued|repeated|insisted|declared|sighed|laughed|told";

struct Quote {
    std::size_t open;
    std::size_t close; // index of the closing quote mark
    std::string inner;
};

std::vector<Quote> find_quotes(std::string_view text) {
    std::vector<Quote> out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t open = std::string_view::npos;
        std::string_view close_mark;
        std::size_t open_len = 0;
        for (std::size_t k = i; k < text.size(); ++k) {
            if (text[k] == '"') {
                open = k, close_mark = "\"", open_len = 1;
                break;
            }
            if (text.substr(k, 3) == "\xE2\x80\x9C") {
                open = k, close_mark = "\xE2\x80\x9D", open_len = 3;
                break;
            }
        }
        if (open == std::string_view::npos) break;
        auto close = text.find(close_mark, open + open_len);
        if (close == std::string_view::npos) break;
        std::string inner(text.substr(open + open_len, close - open - open_len));
        if (!is_blank(inner)) out.push_back({open + open_len, close, inner});
        i = close + close_mark.size();
    }
    return out;
}

std::string clean_name(std::string name) {
    name = collapse_whitespace(name);
    static const std::regex article(R"(^(the|a|an)\s+)", std::regex::icase);
    name = std::regex_replace(name, article, "");
    static const std::regex adverb(R"(\s+\w+ly$)");
    name = std::regex_replace(name, adverb, "");
    static const std::set<std::string> pronouns = {"he", "she", "they", "i", "we", "you", "it", "one"};
    if (pronouns.count(ascii_lower(name))) return {};
    return name;
}

std::string attribute(std::string_view text, const Quote& q, std::size_t prev_end) {
    const std::string verbs = kSpeechVerbs;
    std::size_t after_begin = q.close + (text[q.close] == '"' ? 1 : 3);
    std::string after(text.substr(after_begin, std::min<std::size_t>(100, text.size() - after_begin)));
    if (auto cut = after.find('"'); cut != std::string::npos) after.resize(cut);
    if (auto cut = after.find("\n\n"); cut != std::string::npos) after.resize(cut);
    std::smatch m;
    const std::regex verb_first("^\\s*,?\\s*(?:" + verbs + ")\\s+((?:[A-Za-z][A-Za-z'-]*)(?:\\s+[A-Za-z][A-Za-z'-]*){0,3})\\s*(?:[.,;:!?]|$)");
    if (std::regex_search(after, m, verb_first)) {
        auto n = clean_name(m[1].str());
        if (!n.empty()) return n;
    }
    const std::regex name_first("^\\s*,?\\s*((?:the\\s+)?[A-Z][A-Za-z'-]*(?:\\s+[A-Za-z][A-Za-z'-]*){0,2})\\s+(?:" + verbs + ")\\b");
    if (std::regex_search(after, m, name_first)) {
        auto n = clean_name(m[1].str());
        if (!n.empty()) return n;
    }
    std::size_t open_mark = q.open - (text[q.open - 1] == '"' ? 1 : 3);
    std::size_t from = std::max(prev_end, open_mark > 100 ? open_mark - 100 : std::size_t{0});
    std::string before(text.substr(from, open_mark - from));
    if (auto cut = before.rfind("\n\n"); cut != std::string::npos) before = before.substr(cut + 2);
    const std::regex lead("((?:[A-Za-z][A-Za-z'-]*)(?:\\s+[A-Za-z][A-Za-z'-]*){0,3})\\s+(?:" + verbs + ")\\s*[,:]?\\s*$");
    if (std::regex_search(before, m, lead)) {
        // Keep only the trailing noun phrase ("Then the fox said" -> "fox").
        std::string phrase = m[1].str();
        static const std::regex tail(R"((?:^|\s)((?:the\s+)?(?:[A-Za-z][A-Za-z'-]*\s+)?[A-Za-z][A-Za-z'-]*)$)", std::regex::icase);
        std::smatch t;
        if (std::regex_search(phrase, t, tail)) phrase = t[1].str();
        auto n = clean_name(phrase);
        static const std::set<std::string> fillers = {"then", "and", "but", "so", "finally"};
        auto words = content_tokens(n);
        if (!n.empty() && !(words.size() == 1 && fillers.count(words[0]))) {
            // Drop a leading filler word such as "Then".
            auto sp = n.find(' ');
            if (sp != std::string::npos && fillers.count(ascii_lower(n.substr(0, sp)))) n = clean_name(n.substr(sp + 1));
            if (!n.empty()) return n;
        }
    }
    return {};
}

} // namespace

nlohmann::json mock_prose_extraction(std::string_view text) {
    auto quotes = find_quotes(text);
    nlohmann::json characters = nlohmann::json::array();
    nlohmann::json dialogues = nlohmann::json::array();
    std::vector<std::string> speakers_in_order;
    std::vector<std::string> names;
    std::size_t prev_end = 0;
    std::string narration;
    std::size_t cursor = 0;
    for (const auto& q : quotes) {
        std::size_t open_mark = q.open - (text[q.open - 1] == '"' ? 1 : 3);
        narration += std::string(text.substr(cursor, open_mark - cursor)) + " ";
        cursor = q.close + (text[q.close] == '"' ? 1 : 3);

        std::string speaker = attribute(text, q, prev_end);
        if (speaker.empty()) {
            // Unattributed turn in an exchange goes to the other party.
            std::vector<std::string> distinct;
            for (auto it = speakers_in_order.rbegin(); it != speakers_in_order.rend() && distinct.size() < 2; ++it)
                if (std::find(distinct.begin(), distinct.end(), *it) == distinct.end()) distinct.push_back(*it);
            if (distinct.size() == 2) speaker = distinct[1];
        }
        prev_end = cursor;
        nlohmann::json d = {{"line", q.inner}, {"addressees", nlohmann::json::array()}};
        if (speaker.empty()) {
            d["speaker"] = nullptr;
        } else {
            d["speaker"] = speaker;
            speakers_in_order.push_back(speaker);
            bool known = false;
            for (const auto& n : names) known = known || ascii_lower(n) == ascii_lower(speaker);
            if (!known) names.push_back(speaker);
        }
        dialogues.push_back(std::move(d));
    }
    narration += std::string(text.substr(cursor));
    for (const auto& n : names) characters.push_back({{"name", n}, {"aliases", nlohmann::json::array()}});
    nlohmann::json spots = nlohmann::json::array();
    spots.push_back({{"name", "STORY"},
                     {"interior_exterior", "UNKNOWN"},
                     {"time_of_day", "UNKNOWN"},
                     {"description", utf8_truncate(collapse_whitespace(narration), 1000)}});
    return {{"characters", characters}, {"spots", spots}, {"dialogues", dialogues}};
}

namespace {

std::string extract_reply(const MockChatRequest& req) {
    auto script = unwrap_payload(req.user, "SCRIPT").value_or("");
    if (req.user.find("Source kind: prose") != std::string::npos) {
        auto j = mock_prose_extraction(script);
        return fenced(j, "Step 1: list the speakers introduced by speech verbs.\n"
                         "Step 2: copy each quoted line verbatim and attach its speaker.");
    }
    nlohmann::json j = {{"characters", nlohmann::json::array()},
                        {"spots", nlohmann::json::array()},
                        {"dialogues", nlohmann::json::array()}};
    return fenced(j, "Step 1: the screenplay cues already name every speaker.\nStep 2: nothing to add.");
}

const std::map<std::string, std::vector<std::string>>& refine_vocab() {
    static const std::map<std::string, std::vector<std::string>> v = {
        {"age_band", {"early 20s", "late 20s", "30s", "40s", "50s", "60s"}},
        {"hair",
         {"short dark hair", "long auburn hair", "cropped grey hair", "curly black hair", "shoulder-length blond hair",
          "tied-back brown hair"}},
        {"clothing",
         {"navy wool coat", "grey hooded sweatshirt", "white linen shirt", "green field jacket", "black turtleneck",
          "striped cardigan"}},
        {"build", {"slender", "average build", "broad-shouldered", "wiry", "stocky", "tall and lean"}},
        {"distinguishing_features",
         {"round glasses", "thin scar on the chin", "freckles", "silver ring", "leather wristwatch", "knitted scarf"}},
        {"lighting", {"soft daylight", "warm lamplight", "overcast light", "low golden sun", "cool moonlight"}},
        {"palette", {"muted blues", "warm ochres", "cool greys", "sunset oranges", "deep greens"}},
        {"props", {"wooden tables", "long counter", "potted plants", "street lamps", "stacked crates"}},
    };
    return v;
}

std::string refine_reply(const MockChatRequest& req) {
    nlohmann::json record = nlohmann::json::object();
    if (auto r = unwrap_payload(req.user, "RECORD")) {
        try {
            record = nlohmann::json::parse(*r);
        } catch (const nlohmann::json::exception&) {
        }
    }
    const std::string id = record.value("id", std::string{});
    const std::string name = record.value("name", std::string{});
    nlohmann::json profile = nlohmann::json::object();
    std::string missing = unwrap_payload(req.user, "MISSING").value_or("");
    std::regex sep(",\\s*");
    for (std::sregex_token_iterator it(missing.begin(), missing.end(), sep, -1), end; it != end; ++it) {
        std::string field = std::string(trim(it->str()));
        if (field.empty()) continue;
        if (field == "setting") {
            bool ext = record.value("interior_exterior", std::string{}) == "EXT";
            profile[field] = std::string(ext ? "exterior, " : "interior, ") + ascii_lower(name);
            continue;
        }
        auto v = refine_vocab().find(field);
        if (v == refine_vocab().end()) continue;
        auto h = hash_combine(req.seed, fnv1a64(id + "/" + field));
        profile[field] = v->second[h % v->second.size()];
    }
    nlohmann::json reply = {{"profile", profile}};
    return fenced(reply, "Step 1: the passages describe " + (name.empty() ? std::string("the record") : name) +
                             " only briefly.\nStep 2: fill " + (missing.empty() ? std::string("nothing") : missing) +
                             " with drawable details.");
}

std::string view_reply(const MockChatRequest& req) {
    nlohmann::json reply = nlohmann::json::object();
    if (auto c = unwrap_payload(req.user, "CANDIDATES")) {
        try {
            auto candidates = nlohmann::json::parse(*c);
            if (candidates.is_array() && !candidates.empty()) reply["choice"] = candidates[0].at("view");
        } catch (const nlohmann::json::exception&) {
        }
    }
    return fenced(reply);
}

std::string boundary_reply(const MockChatRequest&) { return fenced({{"nudges", nlohmann::json::array()}}); }

std::string compose_reply(const MockChatRequest& req) {
    nlohmann::json panel = nlohmann::json::object();
    if (auto p = unwrap_payload(req.user, "PANEL")) {
        try {
            panel = nlohmann::json::parse(*p);
        } catch (const nlohmann::json::exception&) {
        }
    }
    std::string shot = panel.value("shot_type", std::string("shot"));
    std::string subjects;
    if (panel.contains("subjects") && panel["subjects"].is_array())
        for (const auto& s : panel["subjects"]) subjects += (subjects.empty() ? "" : " and ") + s.get<std::string>();
    std::string notes = subjects.empty() ? "Hold on the location long enough to read the space."
                                         : "Keep " + subjects + " readable in the " + shot + "; the caption carries the line.";
    std::replace(notes.begin(), notes.end(), '_', ' ');
    return fenced({{"notes", notes}});
}

} // namespace

MockResponderTable default_mock_responders() {
    return {
        {std::string(prompt_schema(PromptId::I0_extract)), extract_reply},
        {std::string(prompt_schema(PromptId::I1_refine)), refine_reply},
        {std::string(prompt_schema(PromptId::I2_view_select)), view_reply},
        {std::string(prompt_schema(PromptId::I3_boundary)), boundary_reply},
        {std::string(prompt_schema(PromptId::I4_compose)), compose_reply},
    };
}

MockResponder adversarial_refine_responder(std::uint64_t salt) {
    return [salt](const MockChatRequest& req) {
        std::mt19937_64 rng(hash_combine(hash_combine(salt, req.seed), fnv1a64(req.user)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const bool retry = req.user.find("previous reply was rejected") != std::string::npos;
        if (!retry && u(rng) < 0.15) return std::string("I think the character wears something blue.");
        static const std::vector<std::string> words = {"red",   "dress", "tall", "scarred", "blond", "hat",  "coat",
                                                       "young", "old",   "wiry", "pale",    "green", "boots", "neon",
                                                       "dim",   "grey",  "long", "bright",  "table", "rail"};
        static const std::vector<std::string> fields = {"age_band", "hair",    "clothing", "build",  "distinguishing_features",
                                                        "setting",  "lighting", "palette", "props", "mood"};
        nlohmann::json profile = nlohmann::json::object();
        for (const auto& f : fields) {
            double r = u(rng);
            if (r < 0.25) continue;
            if (r < 0.5) {
                profile[f] = "";
            } else if (r < 0.55) {
                profile[f] = "   ";
            } else {
                std::string v;
                int n = 1 + static_cast<int>(rng() % 3);
                for (int k = 0; k < n; ++k) v += (k ? " " : "") + words[rng() % words.size()];
                profile[f] = v;
            }
        }
        nlohmann::json reply = {{"profile", profile}};
        if (u(rng) < 0.3) reply["coarse_description"] = words[rng() % words.size()];
        return fenced(reply, "Reasoning: proposing arbitrary values.");
    };
}

} // namespace scriptboard
