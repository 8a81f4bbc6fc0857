#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "scriptboard/error.hpp"
#include "scriptboard/pipeline.hpp"
#include "scriptboard/workspace.hpp"
#include "support.hpp"

using namespace scriptboard;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output; ///< stdout and stderr interleaved
};

Outcome cli(const std::string& args) {
    std::string cmd = std::string(SCRIPTBOARD_CLI) + " " + args + " 2>&1";
    Outcome o;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) o.output.append(buf.data(), n);
    int status = ::pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string fixture(const std::string& rel) { return testing::repo_path("fixtures/" + rel).string(); }

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

} // namespace

TEST_SUITE("cli") {

TEST_CASE("parse writes the IR") {
    testing::TempDir ws("cli-parse");
    auto o = cli("parse " + fixture("scripts/two_scene.fountain") + " -w " + quote(ws.path()));
    CHECK(o.code == 0);
    CHECK(o.output.find("parse: done") != std::string::npos);
    CHECK(fs::exists(ws / "ir/script.json"));
    auto ir = deserialize(read_text_file(ws / "ir/script.json"));
    CHECK(ir.dialogues.size() == 7);
}

TEST_CASE("a missing script exits with the I/O code and names the path") {
    testing::TempDir ws("cli-missing");
    auto o = cli("parse /nonexistent/dir/script.fountain -w " + quote(ws.path()));
    CHECK(o.code == 3);
    CHECK(o.output.find("/nonexistent/dir/script.fountain") != std::string::npos);
}

TEST_CASE("strict parsing names the offending line") {
    testing::TempDir ws("cli-strict");
    auto o = cli("parse " + fixture("scripts/malformed.fountain") + " --strict -w " + quote(ws.path()));
    CHECK(o.code == 2);
    CHECK(o.output.find("line 8") != std::string::npos);
    CHECK(cli("parse " + fixture("scripts/malformed.fountain") + " -w " + quote(ws.path())).code == 0);
}

TEST_CASE("usage errors exit 2") {
    testing::TempDir ws("cli-usage");
    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("parse " + fixture("scripts/two_scene.fountain") + " --kind poem -w " + quote(ws.path())).code == 2);
    auto o = cli("direct -w " + quote(ws.path()));
    CHECK(o.code == 2);
    CHECK(o.output.find("--mock") != std::string::npos);
}

TEST_CASE("stages refuse to run on missing or stale predecessors") {
    testing::TempDir ws("cli-gate");
    auto early = cli("board --mock -w " + quote(ws.path()));
    CHECK(early.code == 2);
    CHECK(early.output.find("ManifestMismatch") != std::string::npos);

    REQUIRE(cli("parse " + fixture("scripts/two_scene.fountain") + " -w " + quote(ws.path())).code == 0);
    REQUIRE(cli("direct --mock -w " + quote(ws.path())).code == 0);
    std::ofstream(ws / "ir/script.json", std::ios::app) << " ";
    auto stale = cli("shoot --mock -w " + quote(ws.path()));
    CHECK(stale.code == 2);
    CHECK(stale.output.find("ManifestMismatch") != std::string::npos);
    CHECK(stale.output.find("stage shoot") != std::string::npos);
}

TEST_CASE("a held lock blocks a second run") {
    testing::TempDir ws("cli-lock");
    write_file(ws / WorkspaceLock::kFileName, "1");
    auto o = cli("parse " + fixture("scripts/two_scene.fountain") + " -w " + quote(ws.path()));
    CHECK(o.code == 2);
    CHECK(o.output.find("WorkspaceLocked") != std::string::npos);
    fs::remove(ws / WorkspaceLock::kFileName);
    CHECK(cli("parse " + fixture("scripts/two_scene.fountain") + " -w " + quote(ws.path())).code == 0);
    CHECK_FALSE(fs::exists(ws / WorkspaceLock::kFileName));
}

TEST_CASE("an interrupted run resumes after the last completed stage") {
    testing::TempDir ws("cli-resume");
    const std::string base = "run " + fixture("scripts/two_scene.fountain") + " --mock --seed 7 -w " + quote(ws.path());
    auto first = cli(base + " --stop-after shoot");
    REQUIRE(first.code == 0);
    CHECK_FALSE(fs::exists(ws / "board"));
    auto second = cli(base);
    REQUIRE(second.code == 0);
    CHECK(second.output.find("parse: up to date, skipped") != std::string::npos);
    CHECK(second.output.find("direct: up to date, skipped") != std::string::npos);
    CHECK(second.output.find("shoot: up to date, skipped") != std::string::npos);
    CHECK(second.output.find("board: done") != std::string::npos);
    CHECK(second.output.find("eval: done") != std::string::npos);
    CHECK(fs::exists(ws / "board/panel_0008.png"));
    CHECK_FALSE(fs::exists(ws / "board/panel_0009.png"));
    CHECK(fs::exists(ws / "eval/report.json"));

    auto third = cli(base);
    CHECK(third.output.find("eval: up to date, skipped") != std::string::npos);
    auto reseeded = cli("run " + fixture("scripts/two_scene.fountain") + " --mock --seed 8 -w " + quote(ws.path()) +
                        " --stop-after direct");
    CHECK(reseeded.output.find("parse: up to date, skipped") != std::string::npos);
    CHECK(reseeded.output.find("direct: done") != std::string::npos);
    Workspace w(ws.path());
    CHECK_FALSE(w.record(Stage::shoot));
}

TEST_CASE("credentials never reach the workspace") {
    testing::TempDir ws("cli-secret");
    const std::string secret = "sk-test-9f8e7d6c5b4a";
    ::setenv("SCRIPTBOARD_SECRET_FOR_TEST", secret.c_str(), 1);
    auto config = BackendsConfig::all_mock(0);
    config.chat.auth_env_var = "SCRIPTBOARD_SECRET_FOR_TEST";
    write_file(ws / "backends.json", nlohmann::json(config).dump(2));
    auto o = cli("run " + fixture("scripts/two_scene.fountain") + " --backends " + quote(ws / "backends.json") +
                 " -w " + quote(ws / "work") + " --stop-after direct");
    ::unsetenv("SCRIPTBOARD_SECRET_FOR_TEST");
    REQUIRE(o.code == 0);
    CHECK(o.output.find(secret) == std::string::npos);
    for (const auto& e : fs::recursive_directory_iterator(ws / "work"))
        if (e.is_regular_file()) CHECK(read_text_file(e.path()).find(secret) == std::string::npos);
}

TEST_CASE("workspace records and digests") {
    testing::TempDir ws("workspace");
    Workspace w(ws.path());
    CHECK_FALSE(w.record(Stage::parse));
    CHECK(stage_outputs(Stage::direct) == std::vector<std::string>{"db", "logs/director.log"});
    CHECK(stage_from_name("board") == Stage::board);
    CHECK_FALSE(stage_from_name("paint"));

    write_file(ws / "ir/script.json", "{}");
    w.set_record(Stage::parse, {"in", w.output_digest(Stage::parse)});
    w.set_record(Stage::direct, {"in2", "x"});
    CHECK(w.up_to_date(Stage::parse, "in"));
    CHECK_FALSE(w.up_to_date(Stage::parse, "other"));
    CHECK_NOTHROW(w.require_predecessors(Stage::direct));
    w.drop_from(Stage::direct);
    CHECK_FALSE(w.record(Stage::direct));
    w.save();
    Workspace reopened(ws.path());
    CHECK(reopened.record(Stage::parse)->inputs == "in");

    auto before = tree_digest(ws.path());
    write_file(ws / WorkspaceLock::kFileName, "x");
    CHECK(tree_digest(ws.path()) == before);
    fs::remove(ws / WorkspaceLock::kFileName);
    write_file(ws / "ir/script.json", "{ }");
    CHECK_FALSE(reopened.up_to_date(Stage::parse, "in"));
    try {
        reopened.require_predecessors(Stage::direct);
        FAIL("expected ManifestMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ManifestMismatch);
    }
}

TEST_CASE("fit-niqe rejects a small corpus") {
    testing::TempDir dir("cli-fit");
    auto o = cli("fit-niqe " + quote(dir.path()) + " -o " + quote(dir / "m.json"));
    CHECK(o.code == 2);
    CHECK(o.output.find("CorpusTooSmall") != std::string::npos);
}

}
