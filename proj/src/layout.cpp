#include "scriptboard/storyboard.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/mock_render.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace scriptboard {

double iou(const Box& a, const Box& b) {
    double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return uni <= 0 ? 0.0 : inter / uni;
}

namespace {

constexpr double kFrameAspect = static_cast<double>(kPanelWidth) / kPanelHeight;
constexpr double kThirdLeft = 1.0 / 3.0;
constexpr double kThirdRight = 2.0 / 3.0;
constexpr double kMediumCrop = 0.62;
constexpr double kCloseupCrop = 2.0 * mock_render::kHeadCenterFraction;

/// Normalized frame width of a box of normalized height `h` showing the top
/// `crop` fraction of an asset.
double width_for(double h, double crop, double asset_aspect) { return h * (asset_aspect / crop) / kFrameAspect; }

Box centered(double cx, double y0, double y1, double w) {
    Box b{cx - w / 2, y0, cx + w / 2, y1};
    if (b.x0 < 0) b = {0, y0, w, y1};
    if (b.x1 > 1) b = {1 - w, y0, 1, y1};
    return b;
}

Anchor anchor_of(double cx) {
    if (std::abs(cx - 0.5) < 1e-9) return Anchor::center;
    return cx < 0.5 ? Anchor::thirds_left : Anchor::thirds_right;
}

int screen_position(const ShotPlan& plan, const std::string& id) {
    auto it = std::find(plan.screen_order.begin(), plan.screen_order.end(), id);
    return static_cast<int>(it - plan.screen_order.begin());
}

Anchor side_in_scene(const ShotPlan& plan, const std::string& id) {
    const int n = static_cast<int>(plan.screen_order.size());
    const int r = screen_position(plan, id);
    if (n < 2 || 2 * r == n - 1) return Anchor::center;
    return 2 * r < n - 1 ? Anchor::thirds_left : Anchor::thirds_right;
}

double anchor_x(Anchor a) { return a == Anchor::thirds_left ? kThirdLeft : a == Anchor::thirds_right ? kThirdRight : 0.5; }

std::string char_element(const std::string& id) { return "character:" + id; }

LayoutBoundary subject(const ShotPlan& plan, const std::string& id, Box box, int z, Anchor anchor, double crop) {
    return {plan.segment_id, char_element(id), box, z, anchor, Box{0, 0, 1, crop}};
}

void group_layout(const ShotPlan& plan, std::vector<LayoutBoundary>& out, double aspect, DirectorLog& log) {
    std::vector<std::string> ordered = plan.subject_ids;
    std::stable_sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
        return screen_position(plan, a) < screen_position(plan, b);
    });
    const int n = static_cast<int>(ordered.size());
    std::vector<LayoutBoundary> boxes;
    if (n <= 4) {
        const double w = width_for(0.7, kMediumCrop, aspect);
        for (int k = 0; k < n; ++k) {
            double cx = static_cast<double>(k + 1) / (n + 1);
            boxes.push_back(subject(plan, ordered[static_cast<std::size_t>(k)], centered(cx, 0.15, 0.85, w), 1 + k,
                                    anchor_of(cx), kMediumCrop));
        }
    } else {
        log.event("InfeasibleLayout", "segment " + std::to_string(plan.segment_id) + ": " + std::to_string(n) +
                                          " subjects, using two rows");
        const int back = (n + 1) / 2;
        const int front = n - back;
        int z = 1;
        for (int k = 0; k < back; ++k) {
            double cx = static_cast<double>(k + 1) / (back + 1);
            boxes.push_back(subject(plan, ordered[static_cast<std::size_t>(2 * k)],
                                    centered(cx, 0.05, 0.50, width_for(0.45, kMediumCrop, aspect)), z++, anchor_of(cx),
                                    kMediumCrop));
        }
        for (int k = 0; k < front; ++k) {
            double cx = static_cast<double>(k + 1) / (front + 1);
            boxes.push_back(subject(plan, ordered[static_cast<std::size_t>(2 * k + 1)],
                                    centered(cx, 0.38, 0.88, width_for(0.5, kMediumCrop, aspect)), z++, anchor_of(cx),
                                    kMediumCrop));
        }
        // Horizontal order must still follow the screen order.
        std::stable_sort(boxes.begin(), boxes.end(), [](const auto& a, const auto& b) { return a.z_order < b.z_order; });
    }
    for (int iter = 0; iter < 40; ++iter) {
        bool crowded = false;
        for (std::size_t a = 0; a < boxes.size(); ++a)
            for (std::size_t b = a + 1; b < boxes.size(); ++b) crowded = crowded || iou(boxes[a].box, boxes[b].box) >= 0.5;
        if (!crowded) break;
        for (auto& lb : boxes) {
            double cx = lb.box.center_x(), cy = lb.box.center_y();
            double w = lb.box.width() * 0.9, h = lb.box.height() * 0.9;
            lb.box = centered(cx, cy - h / 2, cy + h / 2, w);
        }
    }
    out.insert(out.end(), boxes.begin(), boxes.end());
}

bool same_ordering(const std::vector<LayoutBoundary>& a, const std::vector<LayoutBoundary>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (anchor_of(a[i].box.center_x()) != anchor_of(b[i].box.center_x()) && a[i].anchor != Anchor::center)
            return false;
        for (std::size_t k = i + 1; k < a.size(); ++k) {
            double before = a[i].box.center_x() - a[k].box.center_x();
            double after = b[i].box.center_x() - b[k].box.center_x();
            if ((before < 0) != (after < 0)) return false;
        }
    }
    return true;
}

} // namespace

std::vector<LayoutBoundary> assign_boundaries(const ShotPlan& plan, const std::vector<ViewSelection>& selections,
                                              const PromptTemplate& instruction, const ChatBackend& backend,
                                              DirectorLog& log, double aspect) {
    for (const auto& id : plan.subject_ids) {
        bool found = std::any_of(selections.begin(), selections.end(), [&](const auto& s) { return s.character_id == id; });
        if (!found) throw Error(Errc::InvalidInput, "no view selection for subject " + id);
    }
    std::vector<LayoutBoundary> out;
    out.push_back({plan.segment_id, "spot:" + plan.spot_id, Box{0, 0, 1, 1}, 0, Anchor::center, Box{0, 0, 1, 1}});
    const auto& s = plan.subject_ids;
    switch (plan.shot_type) {
    case ShotType::establishing: return out;
    case ShotType::over_shoulder: {
        const bool featured_right = screen_position(plan, s[1]) < screen_position(plan, s[0]);
        const Anchor fa = featured_right ? Anchor::thirds_right : Anchor::thirds_left;
        out.push_back(subject(plan, s[0], centered(anchor_x(fa), 0.10, 0.85, width_for(0.75, kMediumCrop, aspect)), 1,
                              fa, kMediumCrop));
        const double gw = std::min(0.6, width_for(0.85, kMediumCrop, aspect));
        Box g = featured_right ? Box{0, 0.15, gw, 1.0} : Box{1 - gw, 0.15, 1.0, 1.0};
        out.push_back(subject(plan, s[1], g, 2, featured_right ? Anchor::thirds_left : Anchor::thirds_right, kMediumCrop));
        break;
    }
    case ShotType::single_closeup: {
        const Anchor a = side_in_scene(plan, s[0]);
        const double h = 0.64;
        const double y0 = 1.0 / 3.0 - h / 2;
        out.push_back(subject(plan, s[0], centered(anchor_x(a), y0, y0 + h, width_for(h, kCloseupCrop, aspect)), 1, a,
                              kCloseupCrop));
        break;
    }
    case ShotType::single_medium: {
        const Anchor a = side_in_scene(plan, s[0]);
        out.push_back(subject(plan, s[0], centered(anchor_x(a), 0.10, 0.88, width_for(0.78, kMediumCrop, aspect)), 1, a,
                              kMediumCrop));
        break;
    }
    case ShotType::two_shot: group_layout(plan, out, aspect, log); break;
    }

    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : out) boxes.push_back({{"element_id", b.element_id}, {"box", b.box}});
    nlohmann::json sel = selections;
    nlohmann::json shot = {{"segment_id", plan.segment_id}, {"shot_type", plan.shot_type}, {"subjects", plan.subject_ids}};
    const std::string label = "I3_boundary segment " + std::to_string(plan.segment_id);
    auto reply = request_structured(backend, instruction,
                                    {{"shot", wrap_payload("SHOT", shot.dump())},
                                     {"selections", wrap_payload("SELECTIONS", sel.dump())},
                                     {"boxes", wrap_payload("BOXES", boxes.dump())}},
                                    log, label, [](const nlohmann::json& r) {
                                        if (r.contains("nudges") && !r["nudges"].is_array())
                                            throw Error(Errc::SchemaViolation, "'nudges' must be an array");
                                    });
    if (reply.contains("nudges") && !reply["nudges"].empty()) {
        std::vector<LayoutBoundary> nudged = out;
        bool valid = true;
        for (const auto& n : reply["nudges"]) {
            if (!n.is_object()) {
                valid = false;
                break;
            }
            std::string element = n.value("element_id", std::string{});
            double dx = n.value("dx", 0.0), dy = n.value("dy", 0.0), scale = n.value("scale", 1.0);
            auto it = std::find_if(nudged.begin() + 1, nudged.end(), [&](const auto& b) { return b.element_id == element; });
            if (it == nudged.end() || std::abs(dx) > 0.05 || std::abs(dy) > 0.05 || scale < 0.5 || scale > 1.5) {
                valid = false;
                break;
            }
            double cx = it->box.center_x() + dx, cy = it->box.center_y() + dy;
            double w = it->box.width() * scale, h = it->box.height() * scale;
            it->box = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
        }
        if (valid && check_boundaries(plan, nudged).empty() && same_ordering(out, nudged)) {
            out = std::move(nudged);
            log.event("NudgeAccepted", label);
        } else {
            log.event("NudgeRejected", label + ": nudges would break layout rules");
        }
    }
    auto problems = check_boundaries(plan, out);
    if (!problems.empty()) throw Error(Errc::InvariantBreach, label + ": " + problems.front());
    return out;
}

std::vector<std::string> check_boundaries(const ShotPlan& plan, const std::vector<LayoutBoundary>& b) {
    std::vector<std::string> problems;
    int backgrounds = 0;
    int background_z = 0;
    for (const auto& lb : b) {
        const auto& x = lb.box;
        if (!(0 <= x.x0 && x.x0 < x.x1 && x.x1 <= 1 + 1e-12 && 0 <= x.y0 && x.y0 < x.y1 && x.y1 <= 1 + 1e-12))
            problems.push_back(lb.element_id + " box outside the unit square or degenerate");
        if (lb.element_id.rfind("spot:", 0) == 0) {
            ++backgrounds;
            background_z = lb.z_order;
            if (!(x == Box{0, 0, 1, 1})) problems.push_back("background box is not full frame");
        }
    }
    if (backgrounds != 1) problems.push_back("expected exactly one background boundary");
    for (const auto& lb : b)
        if (lb.element_id.rfind("spot:", 0) != 0 && lb.z_order <= background_z)
            problems.push_back(lb.element_id + " is not above the background");
    for (const auto& id : plan.subject_ids)
        if (std::none_of(b.begin(), b.end(), [&](const auto& lb) { return lb.element_id == char_element(id); }))
            problems.push_back("subject " + id + " has no boundary");
    if (plan.shot_type != ShotType::over_shoulder) {
        for (std::size_t i = 0; i < b.size(); ++i)
            for (std::size_t k = i + 1; k < b.size(); ++k)
                if (b[i].element_id.rfind("character:", 0) == 0 && b[k].element_id.rfind("character:", 0) == 0 &&
                    iou(b[i].box, b[k].box) >= 0.5)
                    problems.push_back(b[i].element_id + " and " + b[k].element_id + " overlap too much");
    }
    return problems;
}

AxisReport check_axis_of_action(const Storyboard& board) {
    AxisReport report;
    std::map<std::pair<std::string, std::string>, int> reference;
    int current_scene = -1;
    for (const auto& panel : board.panels) {
        if (panel.scene != current_scene) {
            reference.clear();
            current_scene = panel.scene;
        }
        std::vector<std::pair<std::string, double>> present;
        for (const auto& lb : panel.boundaries)
            if (lb.element_id.rfind("character:", 0) == 0) present.emplace_back(lb.element_id.substr(10), lb.box.center_x());
        std::sort(present.begin(), present.end());
        for (std::size_t i = 0; i < present.size(); ++i) {
            for (std::size_t k = i + 1; k < present.size(); ++k) {
                double d = present[i].second - present[k].second;
                if (std::abs(d) < 1e-9) continue;
                int sign = d < 0 ? -1 : 1;
                auto key = std::make_pair(present[i].first, present[k].first);
                ++report.pairs_checked;
                auto [it, inserted] = reference.emplace(key, sign);
                if (!inserted && it->second != sign)
                    report.violations.push_back({panel.scene, panel.index, key.first, key.second});
            }
        }
    }
    return report;
}

} // namespace scriptboard
