#include <doctest.h>

#include "scriptboard/error.hpp"
#include "scriptboard/script_ir.hpp"
#include "support.hpp"

using namespace scriptboard;

TEST_SUITE("script_ir") {

TEST_CASE("two-scene fixture parses into characters, spots and segments") {
    auto ir = parse_screenplay(testing::fixture_text("scripts/two_scene.fountain"));
    REQUIRE(ir.characters.size() == 2);
    CHECK(ir.characters[0].id == "jesse");
    CHECK(ir.characters[1].id == "celine");
    REQUIRE(ir.spots.size() == 2);
    CHECK(ir.spots[0].id == "cafe");
    CHECK(ir.spots[0].interior_exterior == InteriorExterior::INT);
    CHECK(ir.spots[0].time_of_day == TimeOfDay::DAY);
    CHECK(ir.spots[1].id == "riverside-path");
    CHECK(ir.spots[1].time_of_day == TimeOfDay::NIGHT);
    REQUIRE(ir.dialogues.size() == 7);
    CHECK(ir.dialogues[1].parenthetical == std::optional<std::string>("smiling"));
    CHECK(ir.scene_count() == 2);
    CHECK(validate(ir).empty());
}

TEST_CASE("segment lines are verbatim slices of the source") {
    auto ir = parse_screenplay(testing::fixture_text("scripts/two_scene.fountain"));
    for (const auto& d : ir.dialogues)
        CHECK(ir.raw.text.substr(d.source_offset, d.line.size()) == d.line);
}

TEST_CASE("default addressee is the other party of the spot run") {
    auto ir = parse_screenplay(testing::fixture_text("scripts/two_scene.fountain"));
    // The opening line has no earlier speaker, so the next one is used.
    CHECK(ir.dialogues[0].addressee_ids == std::vector<std::string>{"celine"});
    CHECK(ir.dialogues[1].addressee_ids == std::vector<std::string>{"jesse"});
    CHECK(ir.dialogues[4].addressee_ids == std::vector<std::string>{"jesse"});
}

TEST_CASE("cue extensions are stripped and aliases recorded") {
    const char* text = "INT. ROOM - DAY\n\nANNA (V.O.)\nHello.\n\nBOB\nHi.\n\nANNA (CONT'D)\nAgain.\n";
    auto ir = parse_screenplay(text);
    REQUIRE(ir.characters.size() == 2);
    CHECK(ir.characters[0].name == "ANNA");
    CHECK(ir.dialogues[2].speaker_id == "anna");
}

TEST_CASE("scene headings") {
    auto h = parse_scene_heading("EXT. OLD MILL -- DUSK");
    REQUIRE(h);
    CHECK(h->interior_exterior == InteriorExterior::EXT);
    CHECK(h->name == "OLD MILL");
    CHECK(h->time_of_day == TimeOfDay::NIGHT);
    auto both = parse_scene_heading("INT./EXT. CAR - DAY");
    REQUIRE(both);
    CHECK(both->interior_exterior == InteriorExterior::UNKNOWN);
    CHECK_FALSE(parse_scene_heading("INTERIOR DESIGN IS HARD"));
    CHECK_FALSE(parse_scene_heading("EXT."));
}

TEST_CASE("normalize_name") {
    CHECK(normalize_name("Mary Kate") == "mary-kate");
    CHECK(normalize_name("O'NEIL") == "oneil");
    CHECK(normalize_name("JOSÉ") == "jose");
    CHECK(normalize_name("  Dr.  Who ") == "dr-who");
    CHECK_THROWS_AS(normalize_name("?!"), Error);
}

TEST_CASE("cue_name rejects transitions and mixed case") {
    CHECK(cue_name("CUT TO:") == std::nullopt);
    CHECK(cue_name("Hello there") == std::nullopt);
    CHECK(cue_name("GUARD 2") == std::optional<std::string>("GUARD 2"));
    CHECK(cue_name("BEN ^") == std::optional<std::string>("BEN"));
}

TEST_CASE("dialogue before any scene heading is an error") {
    try {
        parse_screenplay("ANNA\nHello.\n");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DialogueBeforeScene);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("strict mode names the offending line") {
    auto text = testing::fixture_text("scripts/malformed.fountain");
    CHECK_NOTHROW(parse_screenplay(text));
    ParseOptions strict;
    strict.strict = true;
    try {
        parse_screenplay(text, strict);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::UnparsableLine);
        CHECK(std::string(e.what()).find("line 8") != std::string::npos);
    }
}

TEST_CASE("pages split at blank-line gaps under the cue budget") {
    auto text = testing::fixture_text("scripts/two_scene.fountain");
    auto raw = segment_pages(text, 3);
    // Seven cues at three per page.
    CHECK(raw.page_count() == 3);
    for (std::size_t i = 1; i < raw.pages.size(); ++i) {
        CHECK(raw.pages[i] > raw.pages[i - 1]);
        CHECK(raw.text[raw.pages[i] - 1] == '\n');
    }
    ParseOptions paged;
    paged.max_segments_per_page = 3;
    auto ir = parse_screenplay(text, paged);
    CHECK(ir.dialogues.front().page == 0);
    CHECK(ir.dialogues.back().page == 2);
    CHECK_THROWS_AS(segment_pages(text, 0), Error);
}

TEST_CASE("the second scene heading starts a page when it leads the overflow") {
    auto raw = segment_pages(testing::fixture_text("scripts/two_scene.fountain"), 4);
    REQUIRE(raw.page_count() == 2);
    CHECK(raw.page_text(1).substr(0, 4) == "EXT.");
}

TEST_CASE("JSON round trip is exact") {
    auto ir = parse_screenplay(testing::fixture_text("scripts/two_scene.fountain"));
    auto again = deserialize(serialize(ir));
    CHECK(again == ir);
    CHECK(serialize(again) == serialize(ir));
}

TEST_CASE("validate reports broken references") {
    auto ir = parse_screenplay(testing::fixture_text("scripts/two_scene.fountain"));
    ir.dialogues[2].speaker_id = "nobody";
    ir.dialogues[3].addressee_ids = {ir.dialogues[3].speaker_id};
    auto problems = validate(ir);
    CHECK(problems.size() == 2);
    CHECK_THROWS_AS(ensure_valid(ir), Error);
}

TEST_CASE("empty script is rejected") {
    CHECK_THROWS_AS(parse_screenplay("   \n\n"), Error);
}

}
