#include "scriptboard/pipeline.hpp"

#include "scriptboard/cinematographer.hpp"
#include "scriptboard/director.hpp"
#include "scriptboard/error.hpp"
#include "scriptboard/evaluation.hpp"
#include "scriptboard/hashing.hpp"
#include "scriptboard/mock_responders.hpp"
#include "scriptboard/niqe.hpp"
#include "scriptboard/prompts.hpp"
#include "scriptboard/storyboard.hpp"
#include "scriptboard/text_util.hpp"

namespace fs = std::filesystem;

namespace scriptboard {

namespace {

constexpr const char* kScriptJson = "ir/script.json";

std::string prompts_digest(const PipelineOptions& o) {
    std::string all;
    for (auto id : {PromptId::I0_extract, PromptId::I1_refine, PromptId::I2_view_select, PromptId::I3_boundary,
                    PromptId::I4_compose}) {
        auto p = load_prompt(id, o.prompts_dir);
        all += p.system + '\0' + p.user + '\0';
    }
    return digest_hex(all);
}

std::string combine(std::initializer_list<std::string> parts) {
    std::uint64_t h = kFnvOffset;
    for (const auto& p : parts) h = hash_combine(h, fnv1a64(p));
    return to_hex(h);
}

std::string upstream(const Workspace& ws, Stage stage) {
    auto r = ws.record(stage);
    return r ? r->outputs : std::string("-");
}

ScriptIR load_ir(const Workspace& ws) { return deserialize(read_text_file(ws.path(kScriptJson))); }

ScriptIR directed_ir(const Workspace& ws) {
    return load_database(ws.path("db")).to_ir(load_ir(ws).raw);
}

void do_parse(Workspace& ws, const PipelineOptions& o) {
    std::string text = normalize_newlines(read_text_file(o.script));
    ScriptIR ir;
    if (o.kind == SourceKind::screenplay) {
        ParseOptions po;
        po.strict = o.strict;
        po.max_segments_per_page = o.pages;
        ir = parse_screenplay(text, po);
        ensure_valid(ir);
    } else {
        ir.raw = o.pages ? segment_pages(text, *o.pages, SourceKind::prose) : RawScript{text, SourceKind::prose, {0}};
    }
    write_file(ws.path(kScriptJson), serialize(ir) + "\n");
}

void do_direct(Workspace& ws, const PipelineOptions& o, Backends& b) {
    auto prompts = PromptSet::load(o.prompts_dir);
    ScriptIR parsed = load_ir(ws);
    DirectorLog log;
    ParseOptions po;
    po.strict = o.strict;
    ScriptIR ir = extract_elements(parsed.raw, prompts.extract, *b.chat, log, po);
    ir = refine_entities(ir, all_record_refs(ir), prompts.refine, o.rounds, *b.chat, log);
    ensure_valid(ir);
    auto db = index_records(ir, &log);
    save_database(db, ws.path("db"));
    write_file(ws.path("logs/director.log"), log.text());
}

void do_shoot(Workspace& ws, const PipelineOptions& o, Backends& b) {
    ScriptIR ir = directed_ir(ws);
    AssetStore store(ws.root());
    auto refs = generate_reference_images(ir, BasePromptConfig::characters(), BasePromptConfig::spots(), *b.image,
                                          store, o.seed);
    generate_multiview(refs.characters, *b.multiview, store);
    store.save_manifest();
}

void do_board(Workspace& ws, const PipelineOptions& o, Backends& b) {
    auto prompts = PromptSet::load(o.prompts_dir);
    ScriptIR ir = directed_ir(ws);
    auto db = index_records(ir);
    AssetStore store(ws.root());
    auto refs = load_reference_assets(ir, store);
    auto sets = load_multiview_sets(ir, store);
    DirectorLog log;
    StoryboardOptions so;
    so.window = o.window;
    so.compose.stamp_panel_tokens = o.backends.embed.kind == BackendKind::mock;
    auto board = build_storyboard(ir, db, sets, refs.spots, prompts, *b.chat, log, so);
    save_storyboard(board, ws.path("board"));
    write_file(ws.path("logs/board.log"), log.text());
}

void do_eval(Workspace& ws, const PipelineOptions& o, Backends& b) {
    auto board = load_storyboard(ws.path("board"));
    auto model = load_pristine_model(o.niqe_model.empty() ? default_niqe_model() : o.niqe_model);
    auto report = evaluate_storyboard(board, model, *b.embed);
    save_eval_report(report, ws.path("eval"));
}

} // namespace

fs::path default_niqe_model() { return fs::path(SCRIPTBOARD_DATA_DIR) / "models" / "niqe_pristine.json"; }

BackendsConfig seeded(BackendsConfig config, std::uint64_t seed) {
    for (BackendConfig* b : {&config.chat, &config.image, &config.multiview, &config.embed}) b->seed = seed;
    return config;
}

std::string stage_inputs_digest(const Workspace& ws, Stage stage, const PipelineOptions& o) {
    const std::string seed = std::to_string(o.seed);
    const auto& be = o.backends;
    auto one = [](const BackendConfig& c) { return digest_hex(nlohmann::json(c).dump()); };
    switch (stage) {
    case Stage::parse:
        return combine({digest_hex(read_text_file(o.script)), nlohmann::json(o.kind).dump(),
                        o.pages ? std::to_string(*o.pages) : "-", o.strict ? "strict" : "lenient"});
    case Stage::direct:
        return combine({upstream(ws, Stage::parse), seed, one(be.chat), prompts_digest(o), std::to_string(o.rounds),
                        o.strict ? "strict" : "lenient"});
    case Stage::shoot:
        return combine({upstream(ws, Stage::direct), seed, one(be.image), one(be.multiview)});
    case Stage::board:
        return combine({upstream(ws, Stage::direct), upstream(ws, Stage::shoot), seed, one(be.chat), one(be.embed),
                        prompts_digest(o), std::to_string(o.window)});
    case Stage::eval: {
        fs::path model = o.niqe_model.empty() ? default_niqe_model() : o.niqe_model;
        return combine({upstream(ws, Stage::board), one(be.embed), digest_hex(read_text_file(model))});
    }
    }
    return {};
}

void run_stage(Workspace& ws, Stage stage, const PipelineOptions& o, Backends& b) {
    ws.require_predecessors(stage);
    const std::string inputs = stage_inputs_digest(ws, stage, o);
    ws.drop_from(stage);
    ws.clear_outputs(stage);
    ws.set_seed(o.seed);
    ws.set_backends_digest(o.backends.digest());
    ws.save();
    try {
        switch (stage) {
        case Stage::parse: do_parse(ws, o); break;
        case Stage::direct: do_direct(ws, o, b); break;
        case Stage::shoot: do_shoot(ws, o, b); break;
        case Stage::board: do_board(ws, o, b); break;
        case Stage::eval: do_eval(ws, o, b); break;
        }
    } catch (const Error& e) {
        throw Error(e.code(), "stage " + stage_name(stage) + ": " + e.what());
    }
    ws.set_record(stage, {inputs, ws.output_digest(stage)});
    ws.save();
}

std::vector<StageOutcome> run_pipeline(Workspace& ws, const PipelineOptions& o, Backends& b) {
    std::vector<StageOutcome> out;
    for (Stage s : kStages) {
        if (ws.up_to_date(s, stage_inputs_digest(ws, s, o))) {
            out.push_back({s, true});
        } else {
            run_stage(ws, s, o, b);
            out.push_back({s, false});
        }
        if (o.stop_after && *o.stop_after == s) break;
    }
    return out;
}

} // namespace scriptboard
