#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scriptboard {

enum class Stage { parse, direct, shoot, board, eval };
NLOHMANN_JSON_SERIALIZE_ENUM(Stage, {{Stage::parse, "parse"},
                                     {Stage::direct, "direct"},
                                     {Stage::shoot, "shoot"},
                                     {Stage::board, "board"},
                                     {Stage::eval, "eval"}})

inline constexpr Stage kStages[] = {Stage::parse, Stage::direct, Stage::shoot, Stage::board, Stage::eval};

std::string stage_name(Stage stage);
std::optional<Stage> stage_from_name(const std::string& name);

/// Workspace-relative paths owned by each stage.
std::vector<std::string> stage_outputs(Stage stage);

struct StageRecord {
    std::string inputs;  ///< digest of everything the stage consumed
    std::string outputs; ///< digest of the files it wrote
};

/// Single-directory project: artifacts plus manifest.json holding per-stage
/// digests. Re-running a stage drops the records of every later stage.
class Workspace {
public:
    explicit Workspace(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path path(const std::string& relative) const { return root_ / relative; }

    std::optional<StageRecord> record(Stage stage) const;
    void set_record(Stage stage, const StageRecord& record);
    void drop_from(Stage stage);

    std::optional<std::uint64_t> seed() const;
    void set_seed(std::uint64_t seed);
    void set_backends_digest(const std::string& digest);

    /// Digest of the files currently on disk for a stage.
    std::string output_digest(Stage stage) const;
    /// True when the stage is recorded with `inputs` and its files are intact.
    bool up_to_date(Stage stage, const std::string& inputs) const;
    /// ManifestMismatch unless every predecessor is recorded and intact.
    void require_predecessors(Stage stage) const;
    /// Removes the stage's files.
    void clear_outputs(Stage stage) const;

    void save() const;

private:
    std::filesystem::path root_;
    nlohmann::json manifest_;
};

/// Digest over relative paths and contents of every file below `dir`,
/// skipping the lock file.
std::string tree_digest(const std::filesystem::path& dir);

/// Exclusive per-workspace lock held for one pipeline run.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const std::filesystem::path& root);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

    static constexpr const char* kFileName = ".scriptboard.lock";

private:
    std::filesystem::path path_;
};

} // namespace scriptboard
