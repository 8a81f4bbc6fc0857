#include <doctest.h>

#include "scriptboard/director.hpp"
#include "scriptboard/error.hpp"
#include "scriptboard/grounding.hpp"
#include "scriptboard/mock_responders.hpp"
#include "support.hpp"

using namespace scriptboard;

namespace {

class ScriptedChat final : public ChatBackend {
public:
    explicit ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string identity() const override { return "scripted"; }
    std::string complete(const std::string&, const std::string& user) const override {
        count_call();
        last_user = user;
        return replies_[std::min(next_++, replies_.size() - 1)];
    }
    mutable std::string last_user;

private:
    std::vector<std::string> replies_;
    mutable std::size_t next_ = 0;
};

const std::map<std::string, std::string> kComposeSlots = {{"caption", "A: hi"}, {"panel", "{}"}};

ScriptIR directed(const std::string& fixture, const std::string& kind = "screenplay", std::uint64_t seed = 0) {
    auto backends = testing::mock_backends(seed);
    auto prompts = PromptSet::load();
    DirectorLog log;
    RawScript raw;
    raw.text = normalize_newlines(testing::fixture_text(fixture));
    raw.source_kind = kind == "prose" ? SourceKind::prose : SourceKind::screenplay;
    auto ir = extract_elements(raw, prompts.extract, *backends.chat, log);
    return refine_entities(ir, all_record_refs(ir), prompts.refine, 2, *backends.chat, log);
}

} // namespace

TEST_SUITE("director") {

TEST_CASE("last fenced block wins and the rest is reasoning") {
    std::string before;
    auto j = last_fenced_json("think\n```json\n{\"a\": 1}\n```\nmore\n```json\n{\"a\": 2}\n```\n", &before);
    REQUIRE(j);
    CHECK((*j)["a"] == 2);
    CHECK(before.find("think") != std::string::npos);
    CHECK_FALSE(last_fenced_json("no fence here"));
    CHECK_FALSE(last_fenced_json("```json\n{broken\n```"));
}

TEST_CASE("payload markers round trip") {
    auto wrapped = wrap_payload("SHOT", "{\"x\": 1}");
    CHECK(unwrap_payload("prefix " + wrapped + " suffix", "SHOT") == std::optional<std::string>("{\"x\": 1}"));
    CHECK_FALSE(unwrap_payload(wrapped, "PANEL"));
}

TEST_CASE("request_structured repairs once") {
    auto prompt = load_prompt(PromptId::I4_compose);
    DirectorLog log;
    ScriptedChat chat({"no json at all", "ok\n```json\n{\"notes\": \"fine\"}\n```"});
    auto reply = request_structured(chat, prompt, kComposeSlots, log, "test");
    CHECK(reply["notes"] == "fine");
    CHECK(chat.call_count() == 2);
    CHECK(log.count("SchemaRetry") == 1);
    CHECK(chat.last_user.find("previous reply was rejected") != std::string::npos);
}

TEST_CASE("request_structured gives up after the second failure") {
    auto prompt = load_prompt(PromptId::I4_compose);
    DirectorLog log;
    ScriptedChat chat({"```json\n[1, 2]\n```"});
    try {
        request_structured(chat, prompt, kComposeSlots, log, "test");
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SchemaViolation);
    }
    CHECK(chat.call_count() == 2);
}

TEST_CASE("a check that rejects forces the retry") {
    auto prompt = load_prompt(PromptId::I4_compose);
    DirectorLog log;
    ScriptedChat chat({"```json\n{\"notes\": 3}\n```", "```json\n{\"notes\": \"x\"}\n```"});
    auto reply = request_structured(chat, prompt, kComposeSlots, log, "test", [](const nlohmann::json& j) {
        if (!j["notes"].is_string()) throw Error(Errc::SchemaViolation, "notes must be a string");
    });
    CHECK(reply["notes"] == "x");
}

TEST_CASE("screenplay extraction keeps the grammar's records and fills descriptions") {
    auto backends = testing::mock_backends();
    DirectorLog log;
    RawScript raw{testing::fixture_text("scripts/two_scene.fountain"), SourceKind::screenplay, {0}};
    auto ir = extract_elements(raw, load_prompt(PromptId::I0_extract), *backends.chat, log);
    REQUIRE(ir.characters.size() == 2);
    CHECK(ir.characters[1].coarse_description.find("red dress") != std::string::npos);
    CHECK(ir.dialogues.size() == 7);
}

TEST_CASE("backend additions for unknown screenplay entities are ignored") {
    DirectorLog log;
    ScriptedChat chat({"```json\n{\"characters\": [{\"name\": \"GHOST\", \"aliases\": []}], \"spots\": [], "
                       "\"dialogues\": []}\n```"});
    RawScript raw{testing::fixture_text("scripts/two_scene.fountain"), SourceKind::screenplay, {0}};
    auto ir = extract_elements(raw, load_prompt(PromptId::I0_extract), chat, log);
    CHECK(ir.characters.size() == 2);
    CHECK(log.count("IgnoredEntity") == 1);
}

TEST_CASE("prose extraction attributes quotes to speakers") {
    auto backends = testing::mock_backends();
    DirectorLog log;
    RawScript raw{testing::fixture_text("scripts/prose_story.txt"), SourceKind::prose, {0}};
    auto ir = extract_elements(raw, load_prompt(PromptId::I0_extract), *backends.chat, log);
    REQUIRE(ir.dialogues.size() == 4);
    CHECK(ir.dialogues[0].speaker_id == "keeper");
    CHECK(ir.dialogues[1].speaker_id == "mara");
    CHECK(ir.dialogues[2].speaker_id == "keeper");
    CHECK(ir.dialogues[3].speaker_id == "mara");
    CHECK(ir.dialogues[1].line == "I came to see the lamp,");
    for (const auto& d : ir.dialogues) CHECK(ir.raw.text.substr(d.source_offset, d.line.size()) == d.line);
    CHECK(validate(ir).empty());
}

TEST_CASE("prose lines that are not in the text are rejected") {
    DirectorLog log;
    std::string bad = "```json\n{\"characters\": [{\"name\": \"Mara\", \"aliases\": []}], \"spots\": [], "
                      "\"dialogues\": [{\"speaker\": \"Mara\", \"line\": \"invented words\", \"addressees\": []}]}\n```";
    ScriptedChat chat({bad});
    RawScript raw{testing::fixture_text("scripts/prose_story.txt"), SourceKind::prose, {0}};
    CHECK_THROWS_AS(extract_elements(raw, load_prompt(PromptId::I0_extract), chat, log), Error);
}

TEST_CASE("refinement keeps grounded values and completes every field") {
    auto ir = directed("scripts/two_scene.fountain");
    const auto* celine = ir.find_character("celine");
    REQUIRE(celine);
    CHECK(celine->refined_profile.clothing == "red dress");
    CHECK(celine->refined_profile.hair == "long blonde hair");
    CHECK(celine->refined_profile.age_band == "late 20s");
    CHECK(celine->refined_profile.distinguishing_features == "silver necklace");
    CHECK(celine->refinement_round == 2);
    for (const auto& c : ir.characters) CHECK(c.refined_profile.complete());
    for (const auto& s : ir.spots) CHECK(s.refined_profile.complete());
    CHECK(validate(ir).empty());
}

TEST_CASE("a conflicting proposal for a grounded field is logged, not applied") {
    auto backends = testing::mock_backends();
    DirectorLog log;
    RawScript raw{testing::fixture_text("scripts/two_scene.fountain"), SourceKind::screenplay, {0}};
    auto ir = extract_elements(raw, load_prompt(PromptId::I0_extract), *backends.chat, log);
    ScriptedChat chat({"```json\n{\"profile\": {\"clothing\": \"blue overalls\", \"age_band\": \"\", "
                       "\"hair\": \"x\", \"build\": \"slim\", \"distinguishing_features\": \"scar\"}}\n```"});
    auto out = refine_entities(ir, {"character:celine"}, load_prompt(PromptId::I1_refine), 1, chat, log);
    CHECK(out.find_character("celine")->refined_profile.clothing == "red dress");
    CHECK(out.find_character("celine")->refined_profile.build == "slim");
    CHECK(log.count("ContradictionDetected") >= 1);
}

TEST_CASE("fields nobody fills become unspecified") {
    DirectorLog log;
    ScriptIR ir = parse_screenplay("INT. VOID - DAY\n\nX\nHello.\n\nY\nHi.\n");
    ScriptedChat chat({"```json\n{\"profile\": {}}\n```"});
    auto out = refine_entities(ir, {"character:x"}, load_prompt(PromptId::I1_refine), 2, chat, log);
    const auto& p = out.find_character("x")->refined_profile;
    for (std::size_t i = 0; i < CharacterProfile::field_names.size(); ++i) CHECK(p.at(i) == kUnspecified);
    CHECK(log.count("UnfilledField") == 5);
    CHECK_THROWS_AS(refine_entities(ir, {"character:nobody"}, load_prompt(PromptId::I1_refine), 1, chat, log), Error);
}

TEST_CASE("refinement is deterministic under a fixed seed") {
    CHECK(serialize(directed("scripts/two_scene.fountain", "screenplay", 3)) ==
          serialize(directed("scripts/two_scene.fountain", "screenplay", 3)));
}

TEST_CASE("grounding pulls verbatim phrases from narration") {
    auto ir = parse_screenplay(testing::fixture_text("scripts/two_scene.fountain"));
    auto p = ground_character(ir, *ir.find_character("jesse"));
    CHECK(p.age_band == "early 30s");
    CHECK(p.hair == "messy brown hair");
    CHECK(p.clothing == "faded denim jacket");
    CHECK(p.build == "lanky");
}

TEST_CASE("database indices and lookup ranking") {
    auto ir = directed("scripts/two_scene.fountain");
    DirectorLog log;
    auto db = index_records(ir, &log);
    CHECK(db.alias_index.at("celine") == "character:celine");
    CHECK(db.alias_index.at("riverside-path") == "spot:riverside-path");
    auto hits = lookup(db, "CELINE");
    REQUIRE_FALSE(hits.empty());
    CHECK(hits[0].ref == "character:celine");
    CHECK(hits[0].exact_alias);
    auto dress = lookup(db, "who wears the red dress");
    REQUIRE_FALSE(dress.empty());
    CHECK(dress[0].ref == "character:celine");
    CHECK(lookup(db, "zebra xylophone").empty());
}

TEST_CASE("duplicate aliases keep the first declaration") {
    auto ir = parse_screenplay("INT. ROOM - DAY\n\nANNA\nHello.\n\nBOB\nHi.\n");
    ir.characters[1].aliases = {"Anna"};
    DirectorLog log;
    auto db = index_records(ir, &log);
    CHECK(db.alias_index.at("anna") == "character:anna");
    CHECK(db.duplicate_aliases.size() == 1);
    CHECK(log.count("DuplicateAlias") == 1);
}

TEST_CASE("retrieve_context returns the speaker, addressees and the recent window") {
    auto db = index_records(directed("scripts/two_scene.fountain"));
    auto ctx = retrieve_context(db, 3, 2);
    CHECK(ctx.speaker.id == "celine");
    REQUIRE(ctx.addressees.size() == 1);
    CHECK(ctx.addressees[0].id == "jesse");
    CHECK(ctx.spot.id == "cafe");
    REQUIRE(ctx.recent_segments.size() == 2);
    CHECK(ctx.recent_segments[0].id == 1);
    CHECK(ctx.recent_segments[1].id == 2);
    // The window never reaches back into another spot.
    CHECK(retrieve_context(db, 4, 6).recent_segments.empty());
    CHECK_THROWS_AS(retrieve_context(db, 99), Error);
}

TEST_CASE("database save and load round trip") {
    testing::TempDir dir("db");
    auto db = index_records(directed("scripts/two_scene.fountain"));
    save_database(db, dir.path());
    CHECK(load_database(dir.path()) == db);
    CHECK(rebuild(db) == db);
}

TEST_CASE("director log has no timestamps and merges in order") {
    DirectorLog a, b;
    a.event("One", "first");
    b.event("Two", "second");
    a.append(b);
    CHECK(a.text() == "[One] first\n[Two] second\n");
    CHECK(a.count("Two") == 1);
}

}
