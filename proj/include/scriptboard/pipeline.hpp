#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scriptboard/backends.hpp"
#include "scriptboard/script_ir.hpp"
#include "scriptboard/workspace.hpp"

namespace scriptboard {

struct PipelineOptions {
    std::filesystem::path script;
    SourceKind kind = SourceKind::screenplay;
    std::optional<int> pages; ///< dialogue cues per page
    bool strict = false;
    std::uint64_t seed = 0;
    BackendsConfig backends = BackendsConfig::all_mock(0);
    /// Template overrides; the built-in prompts are used when unset.
    std::optional<std::filesystem::path> prompts_dir;
    std::filesystem::path niqe_model;
    int rounds = 2;
    int window = 6;
    std::optional<Stage> stop_after;
};

/// Path of the bundled pristine NIQE model.
std::filesystem::path default_niqe_model();

struct StageOutcome {
    Stage stage;
    bool skipped = false;
};

/// Runs one stage unconditionally after checking its predecessors; later
/// stage records are dropped.
void run_stage(Workspace& ws, Stage stage, const PipelineOptions& options, Backends& backends);

/// parse -> direct -> shoot -> board -> eval, skipping stages whose recorded
/// inputs and outputs still match.
std::vector<StageOutcome> run_pipeline(Workspace& ws, const PipelineOptions& options, Backends& backends);

/// Digest a stage would record as its inputs under `options`.
std::string stage_inputs_digest(const Workspace& ws, Stage stage, const PipelineOptions& options);

/// Backends with the global seed threaded into every endpoint.
BackendsConfig seeded(BackendsConfig config, std::uint64_t seed);

} // namespace scriptboard
