#include "scriptboard/storyboard.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/text_util.hpp"

#include <cstdio>
#include <future>
#include <set>

namespace scriptboard {

namespace {

std::string heading_caption(const SpotRecord& spot) {
    std::string out;
    if (spot.interior_exterior != InteriorExterior::UNKNOWN)
        out += nlohmann::json(spot.interior_exterior).get<std::string>() + ". ";
    out += ascii_upper(spot.name);
    if (spot.time_of_day != TimeOfDay::UNKNOWN) out += " - " + nlohmann::json(spot.time_of_day).get<std::string>();
    return out;
}

void add_part(std::string& out, const std::string& part) {
    if (part.empty() || part == kUnspecified) return;
    if (!out.empty()) out += ", ";
    out += part;
}

std::vector<std::string> first_unique_tokens(const std::string& text, std::size_t limit) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& t : content_tokens(text)) {
        if (out.size() == limit) break;
        if (seen.insert(t).second) out.push_back(t);
    }
    return out;
}

} // namespace

std::string panel_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "panel_%04d.png", index);
    return buf;
}

Storyboard build_storyboard(const ScriptIR& ir, const ElementDatabase& db,
                            const std::map<std::string, MultiViewSet>& sets,
                            const std::map<std::string, ImageAsset>& spot_assets, const PromptSet& prompts,
                            const ChatBackend& backend, DirectorLog& log, const StoryboardOptions& options) {
    Storyboard board;
    board.scene_count = ir.scene_count();
    auto plans = plan_shot_sequence(ir, db, options.camera_side);

    std::vector<std::vector<std::string>> tokens(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const ShotPlan& plan = plans[i];
        Panel panel;
        panel.index = static_cast<int>(i);
        panel.scene = plan.scene;
        panel.segment_id = plan.segment_id;
        panel.plan = plan;
        const SpotRecord* spot = ir.find_spot(plan.spot_id);
        if (!spot) throw Error(Errc::UnknownRecord, "spot " + plan.spot_id);
        if (plan.shot_type == ShotType::establishing) {
            panel.caption = heading_caption(*spot);
            panel.description = spot->name;
            add_part(panel.description, spot->refined_profile.setting);
            add_part(panel.description, spot->refined_profile.lighting);
            tokens[i] = first_unique_tokens(panel.description, 6);
        } else {
            const DialogueSegment* seg = ir.find_segment(plan.segment_id);
            const CharacterRecord* speaker = seg ? ir.find_character(seg->speaker_id) : nullptr;
            if (!seg || !speaker) throw Error(Errc::UnknownSegment, "segment " + std::to_string(plan.segment_id));
            auto context = retrieve_context(db, plan.segment_id, options.window);
            panel.selections = select_viewpoint(plan, context, sets, prompts.view_select, backend, log);
            panel.caption = ascii_upper(speaker->name) + ": " + seg->line;
            panel.description = speaker->name;
            add_part(panel.description, speaker->refined_profile.clothing);
            add_part(panel.description, speaker->refined_profile.hair);
            add_part(panel.description, spot->name);
            add_part(panel.description, seg->line);
            tokens[i] = first_unique_tokens(speaker->name + " " + spot->name + " " + seg->line, 6);
        }
        double aspect = 512.0 / 768.0;
        if (!plan.subject_ids.empty()) {
            auto it = sets.find(plan.subject_ids.front());
            if (it != sets.end() && !it->second.views[0].image.empty())
                aspect = static_cast<double>(it->second.views[0].width()) / it->second.views[0].height();
        }
        panel.boundaries = assign_boundaries(plan, panel.selections, prompts.boundary, backend, log, aspect);
        board.panels.push_back(std::move(panel));
    }

    std::vector<DirectorLog> logs(board.panels.size());
    std::vector<std::future<ComposedPanel>> jobs;
    for (std::size_t i = 0; i < board.panels.size(); ++i) {
        const Panel& p = board.panels[i];
        auto bg = spot_assets.find(p.plan.spot_id);
        if (bg == spot_assets.end()) throw Error(Errc::AssetMissing, "no reference image for spot " + p.plan.spot_id);
        PanelInputs in{&p.plan, &p.selections, &p.boundaries, &bg->second, &sets, p.caption, tokens[i]};
        jobs.push_back(std::async(std::launch::async, [in, &prompts, &backend, &logs, i, &options] {
            return compose_panel(in, prompts.compose, backend, logs[i], options.compose);
        }));
    }
    std::exception_ptr failure;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        try {
            ComposedPanel c = jobs[i].get();
            Panel& p = board.panels[i];
            p.image = std::move(c.image);
            p.markers = std::move(c.markers);
            p.caption_truncated = c.caption_truncated;
            p.notes = std::move(c.notes);
        } catch (...) {
            if (!failure) failure = std::current_exception();
        }
        log.append(logs[i]);
    }
    if (failure) std::rethrow_exception(failure);
    board.contact_sheet = make_contact_sheet(board.panels);
    return board;
}

void to_json(nlohmann::json& j, const ShotPlan& v) {
    j = {{"segment_id", v.segment_id},     {"scene", v.scene},     {"shot_type", v.shot_type},
         {"camera_side", v.camera_side},   {"subject_ids", v.subject_ids},
         {"screen_order", v.screen_order}, {"spot_id", v.spot_id}};
}

void from_json(const nlohmann::json& j, ShotPlan& v) {
    j.at("segment_id").get_to(v.segment_id);
    j.at("scene").get_to(v.scene);
    j.at("shot_type").get_to(v.shot_type);
    j.at("camera_side").get_to(v.camera_side);
    j.at("subject_ids").get_to(v.subject_ids);
    j.at("screen_order").get_to(v.screen_order);
    j.at("spot_id").get_to(v.spot_id);
}

void to_json(nlohmann::json& j, const ViewSelection& v) {
    j = {{"segment_id", v.segment_id}, {"character_id", v.character_id}, {"view_index", v.view_index},
         {"score", v.score},           {"candidates", v.candidates}};
}

void from_json(const nlohmann::json& j, ViewSelection& v) {
    j.at("segment_id").get_to(v.segment_id);
    j.at("character_id").get_to(v.character_id);
    j.at("view_index").get_to(v.view_index);
    j.at("score").get_to(v.score);
    j.at("candidates").get_to(v.candidates);
}

void to_json(nlohmann::json& j, const Box& v) { j = nlohmann::json::array({v.x0, v.y0, v.x1, v.y1}); }

void from_json(const nlohmann::json& j, Box& v) {
    if (!j.is_array() || j.size() != 4) throw Error(Errc::InvalidInput, "box must be [x0, y0, x1, y1]");
    v = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void to_json(nlohmann::json& j, const LayoutBoundary& v) {
    j = {{"segment_id", v.segment_id}, {"element_id", v.element_id}, {"box", v.box},
         {"z_order", v.z_order},       {"anchor", v.anchor},         {"crop", v.crop}};
}

void from_json(const nlohmann::json& j, LayoutBoundary& v) {
    j.at("segment_id").get_to(v.segment_id);
    j.at("element_id").get_to(v.element_id);
    j.at("box").get_to(v.box);
    j.at("z_order").get_to(v.z_order);
    j.at("anchor").get_to(v.anchor);
    j.at("crop").get_to(v.crop);
}

void to_json(nlohmann::json& j, const SubjectMarker& v) {
    j = {{"character_id", v.character_id}, {"view_index", v.view_index}, {"x", v.x}, {"y", v.y}, {"w", v.w}, {"h", v.h}};
}

void from_json(const nlohmann::json& j, SubjectMarker& v) {
    j.at("character_id").get_to(v.character_id);
    j.at("view_index").get_to(v.view_index);
    j.at("x").get_to(v.x);
    j.at("y").get_to(v.y);
    j.at("w").get_to(v.w);
    j.at("h").get_to(v.h);
}

nlohmann::json storyboard_json(const Storyboard& board) {
    nlohmann::json panels = nlohmann::json::array();
    for (const auto& p : board.panels) {
        panels.push_back({{"index", p.index},
                          {"scene", p.scene},
                          {"segment_id", p.segment_id},
                          {"plan", p.plan},
                          {"selections", p.selections},
                          {"boundaries", p.boundaries},
                          {"caption", p.caption},
                          {"caption_truncated", p.caption_truncated},
                          {"description", p.description},
                          {"notes", p.notes},
                          {"markers", p.markers},
                          {"image", panel_file_name(p.index)}});
    }
    return {{"panel_count", board.panels.size()}, {"scene_count", board.scene_count}, {"panels", panels}};
}

void save_storyboard(const Storyboard& board, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& p : board.panels) save_png(p.image, dir / panel_file_name(p.index));
    save_png(board.contact_sheet, dir / "contact_sheet.png");
    write_file(dir / "storyboard.json", storyboard_json(board).dump(2) + "\n");
}

Storyboard storyboard_from_json(const nlohmann::json& j) {
    Storyboard board;
    board.scene_count = j.at("scene_count").get<int>();
    for (const auto& pj : j.at("panels")) {
        Panel p;
        pj.at("index").get_to(p.index);
        pj.at("scene").get_to(p.scene);
        pj.at("segment_id").get_to(p.segment_id);
        pj.at("plan").get_to(p.plan);
        pj.at("selections").get_to(p.selections);
        pj.at("boundaries").get_to(p.boundaries);
        p.caption = pj.value("caption", std::string{});
        p.caption_truncated = pj.value("caption_truncated", false);
        p.description = pj.value("description", std::string{});
        p.notes = pj.value("notes", std::string{});
        if (pj.contains("markers")) pj.at("markers").get_to(p.markers);
        board.panels.push_back(std::move(p));
    }
    return board;
}

Storyboard load_storyboard(const std::filesystem::path& dir) {
    Storyboard board;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(dir / "storyboard.json"));
        board = storyboard_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidInput, (dir / "storyboard.json").string() + ": " + e.what());
    }
    for (std::size_t i = 0; i < board.panels.size(); ++i)
        board.panels[i].image = load_png(dir / j["panels"][i].at("image").get<std::string>());
    board.contact_sheet = load_png(dir / "contact_sheet.png");
    return board;
}

} // namespace scriptboard
