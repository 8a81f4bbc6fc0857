#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "scriptboard/image.hpp"

namespace scriptboard {

enum class BackendKind { mock, http };
NLOHMANN_JSON_SERIALIZE_ENUM(BackendKind, {{BackendKind::mock, "mock"}, {BackendKind::http, "http"}})

/// One service endpoint. Credentials are read from the environment variable
/// named by `auth_env_var` at call time and never stored.
struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::optional<std::string> base_url;
    std::string auth_env_var;
    double timeout = 60.0; ///< seconds
    int retries = 2;
    std::uint64_t seed = 0;
    std::string model;
    int dimension = 512;              ///< embedding size
    std::optional<std::string> fixtures; ///< mock chat reply table (JSON: hex hash -> text)
    int max_in_flight = 4;
    double backoff_initial = 0.5;     ///< seconds; doubled per retry

    void validate() const;
};

void to_json(nlohmann::json& j, const BackendConfig& v);
void from_json(const nlohmann::json& j, BackendConfig& v);

/// Contents of `backends.json`.
struct BackendsConfig {
    BackendConfig chat;
    BackendConfig image;
    BackendConfig multiview;
    BackendConfig embed;

    static BackendsConfig all_mock(std::uint64_t seed);
    static BackendsConfig load(const std::filesystem::path& path);
    /// Stable digest of the configuration (never includes credentials).
    std::string digest() const;
    bool any_mock_images() const;
};

void to_json(nlohmann::json& j, const BackendsConfig& v);
void from_json(const nlohmann::json& j, BackendsConfig& v);

enum class AssetRole { character_ref, spot_ref, character_view };
NLOHMANN_JSON_SERIALIZE_ENUM(AssetRole, {{AssetRole::character_ref, "character_ref"},
                                         {AssetRole::spot_ref, "spot_ref"},
                                         {AssetRole::character_view, "character_view"}})

struct ImageAsset {
    std::string id;
    AssetRole role = AssetRole::character_ref;
    std::string owner_id;
    std::optional<int> view_index;
    Image image;
    std::uint64_t content_hash = 0;

    int width() const { return image.width(); }
    int height() const { return image.height(); }
    /// Throws InvariantBreach when view_index/role disagree or the hash is stale.
    void validate() const;
};

ImageAsset make_asset(std::string id, AssetRole role, std::string owner_id, std::optional<int> view, Image image);

struct ImageRequest {
    std::string prompt;
    std::string negative_prompt;
    std::uint64_t seed = 0;
    int width = 512;
    int height = 512;
    AssetRole role = AssetRole::character_ref;
    std::string owner_id;
};

inline constexpr int kViewCount = 8;

class BackendBase {
public:
    virtual ~BackendBase() = default;
    /// Name recorded in reports, e.g. "mock" or "http:<base_url>".
    virtual std::string identity() const = 0;
    std::size_t call_count() const { return calls_.load(); }

protected:
    void count_call() const { ++calls_; }

private:
    mutable std::atomic<std::size_t> calls_{0};
};

class ChatBackend : public BackendBase {
public:
    virtual std::string complete(const std::string& system, const std::string& user) const = 0;
};

class ImageBackend : public BackendBase {
public:
    virtual ImageAsset text_to_image(const ImageRequest& request) const = 0;
};

class MultiviewBackend : public BackendBase {
public:
    /// Exactly kViewCount assets, view_index 0..7, owner inherited from `ref`.
    virtual std::vector<ImageAsset> image_to_multiview(const ImageAsset& ref) const = 0;
};

class EmbedBackend : public BackendBase {
public:
    virtual std::vector<double> embed_text(const std::string& text) const = 0;
    virtual std::vector<double> embed_image(const Image& image) const = 0;
    virtual int dimension() const = 0;
};

/// Inputs a scripted mock reply may depend on.
struct MockChatRequest {
    std::uint64_t seed = 0;
    std::string system;
    std::string user;
};

/// Schema-specific reply generators, keyed by the schema tag that request
/// builders append to the system message (see schema_instruction).
using MockResponder = std::function<std::string(const MockChatRequest&)>;
using MockResponderTable = std::map<std::string, MockResponder>;

/// System-message suffix naming the response schema; the mock dispatches on it.
std::string schema_instruction(const std::string& schema);
std::optional<std::string> schema_of(const std::string& system);

/// Key of the mock fixture table for a request.
std::string mock_prompt_hash(std::uint64_t seed, const std::string& system, const std::string& user);

std::unique_ptr<ChatBackend> make_chat_backend(const BackendConfig& config, MockResponderTable responders = {});
std::unique_ptr<ImageBackend> make_image_backend(const BackendConfig& config);
std::unique_ptr<MultiviewBackend> make_multiview_backend(const BackendConfig& config);
std::unique_ptr<EmbedBackend> make_embed_backend(const BackendConfig& config);

struct Backends {
    std::unique_ptr<ChatBackend> chat;
    std::unique_ptr<ImageBackend> image;
    std::unique_ptr<MultiviewBackend> multiview;
    std::unique_ptr<EmbedBackend> embed;

    static Backends create(const BackendsConfig& config, MockResponderTable responders = {});
};

/// Azimuth in degrees of view x: 45 * x, x = 0 frontal, clockwise from above.
double view_azimuth(int view_index);

/// Cosine of two vectors (0 when either is zero).
double cosine(const std::vector<double>& a, const std::vector<double>& b);

/// Reads the panel stamp a mock-aware compositor places in the top-right corner.
std::optional<std::vector<std::uint16_t>> read_panel_tokens(const Image& image);

namespace http_detail {
/// Performs a JSON POST with the retry policy of `config`; exposed for tests.
nlohmann::json post_json(const BackendConfig& config, const std::string& path, const nlohmann::json& body);
} // namespace http_detail

} // namespace scriptboard
