#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scriptboard/backends.hpp"
#include "scriptboard/niqe.hpp"
#include "scriptboard/storyboard.hpp"

namespace scriptboard {

/// Cosine of the unit-norm image and text embeddings, in [-1, 1].
double clip_t_score(const Image& panel, const std::string& description, const EmbedBackend& backend);

struct PanelScore {
    int index = 0;
    int segment_id = 0;
    ShotType shot_type = ShotType::establishing;
    std::optional<double> niqe;
    std::optional<double> clip_t;
    std::string error; ///< scorer failure, empty when both scores exist
};

struct EvalReport {
    std::vector<PanelScore> rows;
    std::optional<double> mean_niqe;   ///< over rows with a NIQE score
    std::optional<double> mean_clip_t; ///< over rows with a CLIP-T score
    std::string embed_backend;
    std::string pristine_digest;

    nlohmann::json to_json() const;
    std::string text_table() const;
};

/// Scores every panel against its description; scorer failures are recorded
/// per row and excluded from the means.
EvalReport evaluate_storyboard(const Storyboard& board, const PristineModel& model, const EmbedBackend& backend);

/// Writes report.json and report.txt.
void save_eval_report(const EvalReport& report, const std::filesystem::path& dir);

} // namespace scriptboard
