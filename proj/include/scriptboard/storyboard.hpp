#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scriptboard/backends.hpp"
#include "scriptboard/cinematographer.hpp"
#include "scriptboard/director.hpp"
#include "scriptboard/image.hpp"
#include "scriptboard/prompts.hpp"
#include "scriptboard/script_ir.hpp"

namespace scriptboard {

enum class ShotType { establishing, single_medium, single_closeup, over_shoulder, two_shot };
enum class CameraSide { left_of_axis, right_of_axis };
enum class Anchor { thirds_left, thirds_right, center };

NLOHMANN_JSON_SERIALIZE_ENUM(ShotType, {{ShotType::establishing, "establishing"},
                                        {ShotType::single_medium, "single_medium"},
                                        {ShotType::single_closeup, "single_closeup"},
                                        {ShotType::over_shoulder, "over_shoulder"},
                                        {ShotType::two_shot, "two_shot"}})
NLOHMANN_JSON_SERIALIZE_ENUM(CameraSide, {{CameraSide::left_of_axis, "left_of_axis"},
                                          {CameraSide::right_of_axis, "right_of_axis"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Anchor, {{Anchor::thirds_left, "thirds_left"},
                                      {Anchor::thirds_right, "thirds_right"},
                                      {Anchor::center, "center"}})

inline constexpr int kPanelWidth = 1024;
inline constexpr int kPanelHeight = 576;
inline constexpr double kCaptionFraction = 0.12;

struct ShotPlan {
    int segment_id = 0; ///< establishing shots carry the scene's first segment
    int scene = 0;
    ShotType shot_type = ShotType::establishing;
    CameraSide camera_side = CameraSide::left_of_axis;
    std::vector<std::string> subject_ids; ///< first = featured
    /// Every character of the scene in screen order, left to right.
    std::vector<std::string> screen_order;
    std::string spot_id;

    bool operator==(const ShotPlan&) const = default;
};

struct ViewSelection {
    int segment_id = 0;
    std::string character_id;
    int view_index = 0;
    double score = 0.0;
    std::vector<int> candidates; ///< geometric top-3, best first

    bool operator==(const ViewSelection&) const = default;
};

struct Box {
    double x0 = 0, y0 = 0, x1 = 1, y1 = 1;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double center_x() const { return (x0 + x1) / 2; }
    double center_y() const { return (y0 + y1) / 2; }
    double area() const { return width() * height(); }
    bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

struct LayoutBoundary {
    int segment_id = 0;
    std::string element_id; ///< "spot:<id>" or "character:<id>"
    Box box;
    int z_order = 0;
    Anchor anchor = Anchor::center;
    /// Normalized region of the source asset shown in the box.
    Box crop;

    bool operator==(const LayoutBoundary&) const = default;
};

/// Pixel rectangle where a subject's asset marker landed in a panel.
struct SubjectMarker {
    std::string character_id;
    int view_index = 0;
    double x = 0, y = 0, w = 0, h = 0;

    bool operator==(const SubjectMarker&) const = default;
};

struct Panel {
    int index = 0;
    int scene = 0;
    int segment_id = 0;
    ShotPlan plan;
    std::vector<ViewSelection> selections;
    std::vector<LayoutBoundary> boundaries;
    std::string caption;
    bool caption_truncated = false;
    std::string description; ///< text the panel should depict (CLIP-T reference)
    std::string notes;
    std::vector<SubjectMarker> markers;
    Image image;
};

struct Storyboard {
    std::vector<Panel> panels;
    int scene_count = 0;
    Image contact_sheet;

    std::size_t panel_count() const { return panels.size(); }
};

/// Opening establishing shot per scene, alternating over-the-shoulder shots
/// in two-party exchanges, close-up from a speaker's third consecutive line,
/// group framing for three or more subjects, single medium otherwise.
std::vector<ShotPlan> plan_shot_sequence(const ScriptIR& ir, const ElementDatabase& db,
                                         CameraSide side = CameraSide::left_of_axis);

/// Target facing angle (degrees, 0 = toward camera, positive = screen right)
/// for each subject of a plan.
std::vector<double> target_facings(const ShotPlan& plan);

/// Geometric view ranking for a target facing: cosine of the angular error,
/// ties broken by lower view index.
std::vector<std::pair<int, double>> rank_views(double target_deg);

std::vector<ViewSelection> select_viewpoint(const ShotPlan& plan, const RetrievedContext& context,
                                            const std::map<std::string, MultiViewSet>& sets,
                                            const PromptTemplate& instruction, const ChatBackend& backend,
                                            DirectorLog& log);

/// Boxes under the thirds/axis rules. `asset_aspect` is width/height of the
/// character assets.
std::vector<LayoutBoundary> assign_boundaries(const ShotPlan& plan, const std::vector<ViewSelection>& selections,
                                              const PromptTemplate& instruction, const ChatBackend& backend,
                                              DirectorLog& log, double asset_aspect = 512.0 / 768.0);

/// Lists violated LayoutBoundary invariants; empty when valid.
std::vector<std::string> check_boundaries(const ShotPlan& plan, const std::vector<LayoutBoundary>& boundaries);

struct ComposeOptions {
    /// Writes the panel token stamp read by the mock embedder.
    bool stamp_panel_tokens = false;
};

/// Alpha from white keying: luma >= 0.92 and saturation <= 0.08 become
/// transparent; opaque pixels within 2 px of a keyed one are feathered.
Image key_white(const Image& image);

struct PanelInputs {
    const ShotPlan* plan = nullptr;
    const std::vector<ViewSelection>* selections = nullptr;
    const std::vector<LayoutBoundary>* boundaries = nullptr;
    const ImageAsset* background = nullptr;
    const std::map<std::string, MultiViewSet>* sets = nullptr;
    std::string caption;
    std::vector<std::string> panel_tokens;
};

struct ComposedPanel {
    Image image;
    std::vector<SubjectMarker> markers;
    bool caption_truncated = false;
    std::string notes;
};

ComposedPanel compose_panel(const PanelInputs& inputs, const PromptTemplate& instruction, const ChatBackend& backend,
                            DirectorLog& log, const ComposeOptions& options = {});

/// Caption wrapped to at most two lines of `max_width` pixels, ellipsized.
std::vector<std::string> wrap_caption(const std::string& caption, int max_width, bool* truncated = nullptr);

struct AxisViolation {
    int scene = 0;
    int panel_index = 0;
    std::string first;
    std::string second;
};

struct AxisReport {
    std::vector<AxisViolation> violations;
    int pairs_checked = 0;
    bool ok() const { return violations.empty(); }
};

/// Audits every scene: the left/right order of each co-present character
/// pair must match its first appearance in the scene.
AxisReport check_axis_of_action(const Storyboard& board);

struct StoryboardOptions {
    int window = 6;
    CameraSide camera_side = CameraSide::left_of_axis;
    ComposeOptions compose;
};

Storyboard build_storyboard(const ScriptIR& ir, const ElementDatabase& db,
                            const std::map<std::string, MultiViewSet>& sets,
                            const std::map<std::string, ImageAsset>& spot_assets, const PromptSet& prompts,
                            const ChatBackend& backend, DirectorLog& log, const StoryboardOptions& options = {});

/// Grid of all panels, three columns.
Image make_contact_sheet(const std::vector<Panel>& panels);

void to_json(nlohmann::json& j, const ShotPlan& v);
void from_json(const nlohmann::json& j, ShotPlan& v);
void to_json(nlohmann::json& j, const ViewSelection& v);
void from_json(const nlohmann::json& j, ViewSelection& v);
void to_json(nlohmann::json& j, const Box& v);
void from_json(const nlohmann::json& j, Box& v);
void to_json(nlohmann::json& j, const LayoutBoundary& v);
void from_json(const nlohmann::json& j, LayoutBoundary& v);
void to_json(nlohmann::json& j, const SubjectMarker& v);
void from_json(const nlohmann::json& j, SubjectMarker& v);

nlohmann::json storyboard_json(const Storyboard& board);
/// Writes panel_%04d.png, storyboard.json and contact_sheet.png.
void save_storyboard(const Storyboard& board, const std::filesystem::path& board_dir);
/// Panel records from storyboard.json content; images are left empty.
Storyboard storyboard_from_json(const nlohmann::json& j);
Storyboard load_storyboard(const std::filesystem::path& board_dir);

std::string panel_file_name(int index);

} // namespace scriptboard
