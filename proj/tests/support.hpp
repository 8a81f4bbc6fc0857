#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "scriptboard/backends.hpp"
#include "scriptboard/mock_responders.hpp"
#include "scriptboard/text_util.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path repo_path(const std::string& relative) { return fs::path(SCRIPTBOARD_DATA_DIR) / relative; }

inline std::string fixture_text(const std::string& relative) {
    return scriptboard::read_text_file(repo_path("fixtures/" + relative));
}

/// Fresh directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() / "scriptboard-tests" /
                (name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

inline scriptboard::Backends mock_backends(std::uint64_t seed = 0) {
    return scriptboard::Backends::create(scriptboard::BackendsConfig::all_mock(seed),
                                         scriptboard::default_mock_responders());
}

} // namespace testing
