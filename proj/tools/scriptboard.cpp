#include "scriptboard/error.hpp"
#include "scriptboard/evaluation.hpp"
#include "scriptboard/image.hpp"
#include "scriptboard/mock_responders.hpp"
#include "scriptboard/niqe.hpp"
#include "scriptboard/pipeline.hpp"
#include "scriptboard/text_util.hpp"
#include "scriptboard/workspace.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

namespace fs = std::filesystem;
using namespace scriptboard;

namespace {

struct Flags {
    std::string workspace = "workspace";
    std::string script;
    std::string kind = "screenplay";
    int pages = 0;
    bool strict = false;
    std::uint64_t seed = 0;
    std::string backends;
    bool mock = false;
    std::string prompts;
    std::string niqe_model;
    int rounds = 2;
    int window = 6;
    std::string stop_after;
};

void add_backend_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--seed", f.seed, "Global seed threaded into every backend");
    cmd->add_option("--backends", f.backends, "Backend configuration (backends.json)")->check(CLI::ExistingFile);
    cmd->add_flag("--mock", f.mock, "Use deterministic offline backends");
    cmd->add_option("--prompts", f.prompts, "Directory overriding the built-in prompt templates")
        ->check(CLI::ExistingDirectory);
}

PipelineOptions to_options(const Flags& f, bool need_backends) {
    PipelineOptions o;
    o.script = f.script;
    o.kind = f.kind == "prose" ? SourceKind::prose : SourceKind::screenplay;
    if (f.pages > 0) o.pages = f.pages;
    o.strict = f.strict;
    o.seed = f.seed;
    if (!f.backends.empty() && f.mock) throw Error(Errc::InvalidInput, "--backends and --mock are exclusive");
    if (!f.backends.empty())
        o.backends = seeded(BackendsConfig::load(f.backends), f.seed);
    else if (f.mock || !need_backends)
        o.backends = BackendsConfig::all_mock(f.seed);
    else
        throw Error(Errc::InvalidInput, "pass --backends <file> or --mock");
    if (!f.prompts.empty()) o.prompts_dir = f.prompts;
    if (!f.niqe_model.empty()) o.niqe_model = f.niqe_model;
    o.rounds = f.rounds;
    o.window = f.window;
    if (!f.stop_after.empty()) o.stop_after = stage_from_name(f.stop_after);
    return o;
}

void print_outcome(Stage s, bool skipped) {
    std::cout << stage_name(s) << ": " << (skipped ? "up to date, skipped" : "done") << "\n";
}

int fit_niqe(const std::string& corpus_dir, const std::string& out, const NiqeConfig& config) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(corpus_dir)) {
        auto ext = e.path().extension().string();
        if (e.is_regular_file() && ext == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Image> corpus;
    for (const auto& p : files) corpus.push_back(load_png(p));
    auto model = fit_pristine_model(corpus, config);
    save_pristine_model(model, out);
    std::cout << "fitted " << model.patch_count << " patches from " << model.image_count << " images -> " << out
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Turns dialogue scripts into storyboard panels"};
    app.require_subcommand(1);
    Flags f;
    NiqeConfig niqe;
    std::string corpus, model_out = default_niqe_model().string();

    auto* parse = app.add_subcommand("parse", "Parse a script into ir/script.json");
    auto* direct = app.add_subcommand("direct", "Extract and refine records into db/");
    auto* shoot = app.add_subcommand("shoot", "Generate reference and multi-view assets");
    auto* board = app.add_subcommand("board", "Plan, lay out and composite panels");
    auto* eval = app.add_subcommand("eval", "Score the storyboard (NIQE, CLIP-T)");
    auto* run = app.add_subcommand("run", "Run every stage, resuming completed ones");
    auto* fit = app.add_subcommand("fit-niqe", "Fit a pristine NIQE model from a directory of PNGs");

    for (auto* cmd : {parse, direct, shoot, board, eval, run})
        cmd->add_option("-w,--workspace", f.workspace, "Workspace directory");
    for (auto* cmd : {parse, run}) {
        cmd->add_option("script", f.script, "Script file")->required();
        cmd->add_option("--kind", f.kind, "screenplay or prose")->check(CLI::IsMember({"screenplay", "prose"}));
        cmd->add_option("--pages", f.pages, "Dialogue cues per page")->check(CLI::PositiveNumber);
        cmd->add_flag("--strict", f.strict, "Reject unrecognized lines");
    }
    for (auto* cmd : {direct, shoot, board, eval, run}) add_backend_flags(cmd, f);
    for (auto* cmd : {direct, run}) cmd->add_option("--rounds", f.rounds, "Refinement rounds")->check(CLI::PositiveNumber);
    for (auto* cmd : {board, run}) cmd->add_option("--window", f.window, "Retrieval window")->check(CLI::NonNegativeNumber);
    for (auto* cmd : {eval, run}) cmd->add_option("--niqe-model", f.niqe_model, "Pristine NIQE model")->check(CLI::ExistingFile);
    run->add_option("--stop-after", f.stop_after, "Last stage to run")
        ->check(CLI::IsMember({"parse", "direct", "shoot", "board", "eval"}));
    fit->add_option("corpus", corpus, "Directory of PNG images")->required()->check(CLI::ExistingDirectory);
    fit->add_option("-o,--out", model_out, "Output model path");
    fit->add_option("--patch-size", niqe.patch_size, "Patch size in pixels");
    fit->add_option("--sharpness-fraction", niqe.sharpness_fraction, "Fraction of sharpest patches kept");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (fit->parsed()) return fit_niqe(corpus, model_out, niqe);

        const bool is_parse = parse->parsed();
        PipelineOptions options = to_options(f, !is_parse);
        WorkspaceLock lock(f.workspace);
        Workspace ws(f.workspace);
        Backends backends = Backends::create(options.backends, default_mock_responders());
        if (run->parsed()) {
            for (const auto& o : run_pipeline(ws, options, backends)) print_outcome(o.stage, o.skipped);
            return 0;
        }
        Stage stage = is_parse ? Stage::parse
                      : direct->parsed() ? Stage::direct
                      : shoot->parsed()  ? Stage::shoot
                      : board->parsed()  ? Stage::board
                                         : Stage::eval;
        run_stage(ws, stage, options, backends);
        print_outcome(stage, false);
        if (stage == Stage::eval) std::cout << read_text_file(ws.path("eval/report.txt"));
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    }
}
