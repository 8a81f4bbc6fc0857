#include "scriptboard/evaluation.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/text_util.hpp"

#include <algorithm>
#include <cstdio>
#include <future>

namespace scriptboard {

namespace {

std::string fixed(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width, bool right = false) {
    if (s.size() >= width) return s;
    std::string fill(width - s.size(), ' ');
    return right ? fill + s : s + fill;
}

std::optional<double> mean_of(const std::vector<PanelScore>& rows, std::optional<double> PanelScore::*field) {
    double sum = 0;
    int n = 0;
    for (const auto& r : rows)
        if (r.*field) sum += *(r.*field), ++n;
    if (n == 0) return std::nullopt;
    return sum / n;
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

} // namespace

double clip_t_score(const Image& panel, const std::string& description, const EmbedBackend& backend) {
    auto a = backend.embed_image(panel);
    auto b = backend.embed_text(description);
    if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "image and text embeddings differ in size");
    return std::clamp(cosine(a, b), -1.0, 1.0);
}

EvalReport evaluate_storyboard(const Storyboard& board, const PristineModel& model, const EmbedBackend& backend) {
    EvalReport report;
    report.embed_backend = backend.identity();
    report.pristine_digest = model.corpus_digest;
    std::vector<std::future<PanelScore>> jobs;
    for (const auto& panel : board.panels) {
        jobs.push_back(std::async(std::launch::async, [&panel, &model, &backend] {
            PanelScore row;
            row.index = panel.index;
            row.segment_id = panel.segment_id;
            row.shot_type = panel.plan.shot_type;
            try {
                row.niqe = niqe_score(panel.image, model);
            } catch (const Error& e) {
                row.error = std::string("niqe: ") + e.what();
            }
            try {
                row.clip_t = clip_t_score(panel.image, panel.description, backend);
            } catch (const Error& e) {
                if (!row.error.empty()) row.error += "; ";
                row.error += std::string("clip_t: ") + e.what();
            }
            return row;
        }));
    }
    for (auto& j : jobs) report.rows.push_back(j.get());
    report.mean_niqe = mean_of(report.rows, &PanelScore::niqe);
    report.mean_clip_t = mean_of(report.rows, &PanelScore::clip_t);
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j = {{"index", r.index},
                            {"segment_id", r.segment_id},
                            {"shot_type", r.shot_type},
                            {"niqe", opt(r.niqe)},
                            {"clip_t", opt(r.clip_t)}};
        if (!r.error.empty()) j["error"] = r.error;
        rows_json.push_back(j);
    }
    return {{"panels", rows_json},
            {"aggregate", {{"niqe", opt(mean_niqe)}, {"clip_t", opt(mean_clip_t)}}},
            {"embed_backend", embed_backend},
            {"pristine_digest", pristine_digest}};
}

std::string EvalReport::text_table() const {
    std::string out = pad("panel", 7) + pad("segment", 9) + pad("shot", 16) + pad("NIQE", 10, true) +
                      pad("CLIP-T", 10, true) + "\n";
    for (const auto& r : rows) {
        out += pad(std::to_string(r.index), 7) + pad(std::to_string(r.segment_id), 9) +
               pad(nlohmann::json(r.shot_type).get<std::string>(), 16) + pad(fixed(r.niqe), 10, true) +
               pad(fixed(r.clip_t), 10, true);
        if (!r.error.empty()) out += "  " + r.error;
        out += "\n";
    }
    out += pad("mean", 32) + pad(fixed(mean_niqe), 10, true) + pad(fixed(mean_clip_t), 10, true) + "\n";
    out += "embedding backend: " + embed_backend + "\n";
    out += "pristine model: " + pristine_digest + "\n";
    return out;
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& dir) {
    write_file(dir / "report.json", report.to_json().dump(2) + "\n");
    write_file(dir / "report.txt", report.text_table());
}

} // namespace scriptboard
