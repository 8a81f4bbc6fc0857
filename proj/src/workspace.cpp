#include "scriptboard/workspace.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/hashing.hpp"
#include "scriptboard/text_util.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace fs = std::filesystem;

namespace scriptboard {

namespace {

constexpr const char* kManifest = "manifest.json";

std::uint64_t file_hash(const fs::path& p) {
    auto bytes = read_binary_file(p);
    return fnv1a64(std::span<const std::uint8_t>(bytes));
}

} // namespace

std::string stage_name(Stage stage) { return nlohmann::json(stage).get<std::string>(); }

std::optional<Stage> stage_from_name(const std::string& name) {
    for (Stage s : kStages)
        if (stage_name(s) == name) return s;
    return std::nullopt;
}

std::vector<std::string> stage_outputs(Stage stage) {
    switch (stage) {
    case Stage::parse: return {"ir"};
    case Stage::direct: return {"db", "logs/director.log"};
    case Stage::shoot: return {"assets"};
    case Stage::board: return {"board", "logs/board.log"};
    case Stage::eval: return {"eval"};
    }
    return {};
}

std::string tree_digest(const fs::path& dir) {
    std::vector<std::pair<std::string, fs::path>> files;
    if (fs::is_regular_file(dir)) {
        files.emplace_back(dir.filename().string(), dir);
    } else if (fs::is_directory(dir)) {
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            if (!e.is_regular_file() || e.path().filename() == WorkspaceLock::kFileName) continue;
            files.emplace_back(fs::relative(e.path(), dir).generic_string(), e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = kFnvOffset;
    for (const auto& [rel, p] : files) h = hash_combine(hash_combine(h, fnv1a64(rel)), file_hash(p));
    return to_hex(h);
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
    fs::path m = root_ / kManifest;
    if (fs::exists(m)) {
        try {
            manifest_ = nlohmann::json::parse(read_text_file(m));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ManifestMismatch, m.string() + " is unreadable: " + e.what());
        }
    }
    if (!manifest_.is_object()) manifest_ = nlohmann::json::object();
    if (!manifest_.contains("stages")) manifest_["stages"] = nlohmann::json::object();
}

std::optional<StageRecord> Workspace::record(Stage stage) const {
    const auto& stages = manifest_["stages"];
    auto it = stages.find(stage_name(stage));
    if (it == stages.end()) return std::nullopt;
    return StageRecord{it->at("inputs").get<std::string>(), it->at("outputs").get<std::string>()};
}

void Workspace::set_record(Stage stage, const StageRecord& r) {
    manifest_["stages"][stage_name(stage)] = {{"inputs", r.inputs}, {"outputs", r.outputs}};
}

void Workspace::drop_from(Stage stage) {
    for (Stage s : kStages)
        if (s >= stage) manifest_["stages"].erase(stage_name(s));
}

std::optional<std::uint64_t> Workspace::seed() const {
    if (!manifest_.contains("seed")) return std::nullopt;
    return manifest_["seed"].get<std::uint64_t>();
}

void Workspace::set_seed(std::uint64_t seed) { manifest_["seed"] = seed; }

void Workspace::set_backends_digest(const std::string& digest) { manifest_["backends_digest"] = digest; }

std::string Workspace::output_digest(Stage stage) const {
    std::uint64_t h = kFnvOffset;
    for (const auto& rel : stage_outputs(stage)) {
        h = hash_combine(h, fnv1a64(rel));
        h = hash_combine(h, from_hex(tree_digest(root_ / rel)));
    }
    return to_hex(h);
}

bool Workspace::up_to_date(Stage stage, const std::string& inputs) const {
    auto r = record(stage);
    return r && r->inputs == inputs && r->outputs == output_digest(stage);
}

void Workspace::require_predecessors(Stage stage) const {
    for (Stage s : kStages) {
        if (s >= stage) break;
        auto r = record(s);
        if (!r)
            throw Error(Errc::ManifestMismatch,
                        "stage " + stage_name(stage) + " needs " + stage_name(s) + ", which has not run in " + root_.string());
        if (r->outputs != output_digest(s))
            throw Error(Errc::ManifestMismatch,
                        "stage " + stage_name(stage) + ": outputs of stage " + stage_name(s) +
                            " changed since it ran; rerun " + stage_name(s));
    }
}

void Workspace::clear_outputs(Stage stage) const {
    for (const auto& rel : stage_outputs(stage)) fs::remove_all(root_ / rel);
}

void Workspace::save() const { write_file(root_ / kManifest, manifest_.dump(2) + "\n"); }

WorkspaceLock::WorkspaceLock(const fs::path& root) : path_(root / kFileName) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error(Errc::IoError, "cannot create " + root.string() + ": " + ec.message());
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw Error(Errc::WorkspaceLocked, root.string() + " is in use (remove " + path_.string() + " if stale)");
        throw Error(Errc::IoError, path_.string() + ": " + std::strerror(errno));
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

WorkspaceLock::~WorkspaceLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

} // namespace scriptboard
