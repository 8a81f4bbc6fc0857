#include "scriptboard/storyboard.hpp"

#include "scriptboard/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scriptboard {

std::vector<ShotPlan> plan_shot_sequence(const ScriptIR& ir, const ElementDatabase& db, CameraSide side) {
    std::vector<ShotPlan> plans;
    const auto scenes = ir.scene_of_segments();
    std::size_t i = 0;
    while (i < ir.dialogues.size()) {
        std::size_t end = i;
        while (end < ir.dialogues.size() && scenes[end] == scenes[i]) ++end;

        std::vector<std::vector<std::string>> addressees;
        std::vector<std::string> participants;
        auto note = [&](const std::string& id) {
            if (std::find(participants.begin(), participants.end(), id) == participants.end())
                participants.push_back(id);
        };
        for (std::size_t k = i; k < end; ++k) {
            const auto& d = ir.dialogues[k];
            note(d.speaker_id);
            std::vector<std::string> a;
            for (const auto& rec : retrieve_context(db, d.id, 0).addressees) {
                a.push_back(rec.id);
                note(rec.id);
            }
            addressees.push_back(std::move(a));
        }
        std::vector<std::string> screen = participants;
        if (side == CameraSide::right_of_axis) std::reverse(screen.begin(), screen.end());

        ShotPlan establishing;
        establishing.segment_id = ir.dialogues[i].id;
        establishing.scene = scenes[i];
        establishing.shot_type = ShotType::establishing;
        establishing.camera_side = side;
        establishing.screen_order = screen;
        establishing.spot_id = ir.dialogues[i].spot_id;
        plans.push_back(establishing);

        int run = 0;
        std::string previous_speaker;
        for (std::size_t k = i; k < end; ++k) {
            const auto& d = ir.dialogues[k];
            run = d.speaker_id == previous_speaker ? run + 1 : 1;
            previous_speaker = d.speaker_id;
            ShotPlan p = establishing;
            p.segment_id = d.id;
            p.subject_ids = {d.speaker_id};
            const auto& a = addressees[k - i];
            if (run >= 3) {
                p.shot_type = ShotType::single_closeup;
            } else if (a.size() >= 2) {
                p.shot_type = ShotType::two_shot;
                p.subject_ids.insert(p.subject_ids.end(), a.begin(), a.end());
            } else if (a.size() == 1) {
                p.shot_type = ShotType::over_shoulder;
                p.subject_ids.push_back(a.front());
            } else {
                p.shot_type = ShotType::single_medium;
            }
            plans.push_back(std::move(p));
        }
        i = end;
    }
    return plans;
}

namespace {

int screen_position(const ShotPlan& plan, const std::string& id) {
    auto it = std::find(plan.screen_order.begin(), plan.screen_order.end(), id);
    if (it == plan.screen_order.end()) return static_cast<int>(plan.screen_order.size());
    return static_cast<int>(it - plan.screen_order.begin());
}

} // namespace

std::vector<double> target_facings(const ShotPlan& plan) {
    std::vector<double> out;
    const auto& s = plan.subject_ids;
    switch (plan.shot_type) {
    case ShotType::establishing: break;
    case ShotType::single_medium: out.push_back(0.0); break;
    case ShotType::single_closeup: {
        const int n = static_cast<int>(plan.screen_order.size());
        const int r = screen_position(plan, s.front());
        out.push_back(n < 2 || 2 * r == n - 1 ? 0.0 : (2 * r < n - 1 ? 45.0 : -45.0));
        break;
    }
    case ShotType::over_shoulder: {
        const bool partner_left = screen_position(plan, s[1]) < screen_position(plan, s[0]);
        out.push_back(partner_left ? -45.0 : 45.0);
        out.push_back(partner_left ? 135.0 : -135.0);
        for (std::size_t k = 2; k < s.size(); ++k) out.push_back(0.0);
        break;
    }
    case ShotType::two_shot: {
        std::vector<std::string> ordered = s;
        std::stable_sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
            return screen_position(plan, a) < screen_position(plan, b);
        });
        const int n = static_cast<int>(ordered.size());
        for (const auto& id : s) {
            int k = static_cast<int>(std::find(ordered.begin(), ordered.end(), id) - ordered.begin());
            out.push_back(2 * (k + 1) == n + 1 ? 0.0 : (2 * (k + 1) < n + 1 ? 45.0 : -45.0));
        }
        break;
    }
    }
    return out;
}

std::vector<std::pair<int, double>> rank_views(double target_deg) {
    std::vector<std::pair<int, double>> ranked;
    for (int x = 0; x < kViewCount; ++x) {
        double diff = (view_azimuth(x) - target_deg) * std::numbers::pi / 180.0;
        double score = std::cos(diff);
        if (std::abs(score) < 1e-12) score = 0.0;
        ranked.emplace_back(x, score);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (std::abs(a.second - b.second) > 1e-9) return a.second > b.second;
        return a.first < b.first;
    });
    return ranked;
}

std::vector<ViewSelection> select_viewpoint(const ShotPlan& plan, const RetrievedContext& context,
                                            const std::map<std::string, MultiViewSet>& sets,
                                            const PromptTemplate& instruction, const ChatBackend& backend,
                                            DirectorLog& log) {
    std::vector<ViewSelection> out;
    if (plan.shot_type == ShotType::establishing) return out;
    const auto targets = target_facings(plan);

    nlohmann::json ctx = {{"speaker", context.speaker.name}, {"spot", context.spot.name}};
    ctx["addressees"] = nlohmann::json::array();
    for (const auto& a : context.addressees) ctx["addressees"].push_back(a.name);
    ctx["recent"] = nlohmann::json::array();
    for (const auto& r : context.recent_segments) ctx["recent"].push_back({{"speaker", r.speaker_id}, {"line", r.line}});

    for (std::size_t k = 0; k < plan.subject_ids.size(); ++k) {
        const auto& id = plan.subject_ids[k];
        if (!sets.count(id)) throw Error(Errc::MissingViewSet, "no multi-view set for " + id);
        const auto ranked = rank_views(targets[k]);
        ViewSelection sel;
        sel.segment_id = plan.segment_id;
        sel.character_id = id;
        nlohmann::json candidates = nlohmann::json::array();
        for (std::size_t c = 0; c < 3; ++c) {
            sel.candidates.push_back(ranked[c].first);
            candidates.push_back({{"view", ranked[c].first}, {"score", ranked[c].second}});
        }
        nlohmann::json shot = {{"segment_id", plan.segment_id},
                               {"shot_type", plan.shot_type},
                               {"camera_side", plan.camera_side},
                               {"subjects", plan.subject_ids},
                               {"character", id}};
        const std::string label = "I2_view_select segment " + std::to_string(plan.segment_id) + " " + id;
        auto reply = request_structured(backend, instruction,
                                        {{"shot", wrap_payload("SHOT", shot.dump())},
                                         {"context", wrap_payload("CONTEXT", ctx.dump())},
                                         {"candidates", wrap_payload("CANDIDATES", candidates.dump())}},
                                        log, label, [](const nlohmann::json& r) {
                                            if (r.contains("choice") && !r["choice"].is_number_integer())
                                                throw Error(Errc::SchemaViolation, "'choice' must be an integer");
                                        });
        sel.view_index = sel.candidates.front();
        if (reply.contains("choice")) {
            int choice = reply["choice"].get<int>();
            if (std::find(sel.candidates.begin(), sel.candidates.end(), choice) != sel.candidates.end())
                sel.view_index = choice;
            else
                log.event("RerankIgnored", label + ": view " + std::to_string(choice) + " is not a top-3 candidate");
        }
        for (const auto& [x, score] : ranked)
            if (x == sel.view_index) sel.score = score;
        out.push_back(std::move(sel));
    }
    return out;
}

} // namespace scriptboard
