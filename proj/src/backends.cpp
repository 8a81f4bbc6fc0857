#include "scriptboard/backends.hpp"

#include "scriptboard/error.hpp"
#include "scriptboard/hashing.hpp"
#include "scriptboard/marker.hpp"
#include "scriptboard/mock_render.hpp"
#include "scriptboard/text_util.hpp"

#include <cmath>
#include <regex>

namespace scriptboard {

// ---------------------------------------------------------------------------
// Configuration

void BackendConfig::validate() const {
    if (kind == BackendKind::http && (!base_url || base_url->empty()))
        throw Error(Errc::InvalidInput, "http backend requires base_url");
    if (retries < 0) throw Error(Errc::InvalidInput, "retries must be >= 0");
    if (timeout <= 0) throw Error(Errc::InvalidInput, "timeout must be positive");
    if (dimension < 1) throw Error(Errc::InvalidInput, "embedding dimension must be positive");
    if (max_in_flight < 1) throw Error(Errc::InvalidInput, "max_in_flight must be >= 1");
}

void to_json(nlohmann::json& j, const BackendConfig& v) {
    j = {{"kind", v.kind},       {"auth_env_var", v.auth_env_var}, {"timeout", v.timeout},
         {"retries", v.retries}, {"seed", v.seed},                 {"model", v.model},
         {"dimension", v.dimension}, {"max_in_flight", v.max_in_flight},
         {"backoff_initial", v.backoff_initial}};
    if (v.base_url) j["base_url"] = *v.base_url;
    if (v.fixtures) j["fixtures"] = *v.fixtures;
}

void from_json(const nlohmann::json& j, BackendConfig& v) {
    v = BackendConfig{};
    v.kind = j.value("kind", BackendKind::mock);
    if (j.contains("base_url") && !j["base_url"].is_null()) v.base_url = j["base_url"].get<std::string>();
    v.auth_env_var = j.value("auth_env_var", std::string{});
    v.timeout = j.value("timeout", 60.0);
    v.retries = j.value("retries", 2);
    v.seed = j.value("seed", std::uint64_t{0});
    v.model = j.value("model", std::string{});
    v.dimension = j.value("dimension", 512);
    if (j.contains("fixtures") && !j["fixtures"].is_null()) v.fixtures = j["fixtures"].get<std::string>();
    v.max_in_flight = j.value("max_in_flight", 4);
    v.backoff_initial = j.value("backoff_initial", 0.5);
}

BackendsConfig BackendsConfig::all_mock(std::uint64_t seed) {
    BackendsConfig c;
    for (BackendConfig* b : {&c.chat, &c.image, &c.multiview, &c.embed}) {
        b->kind = BackendKind::mock;
        b->seed = seed;
    }
    return c;
}

BackendsConfig BackendsConfig::load(const std::filesystem::path& path) {
    try {
        auto config = nlohmann::json::parse(read_text_file(path)).get<BackendsConfig>();
        for (const BackendConfig* b : {&config.chat, &config.image, &config.multiview, &config.embed}) b->validate();
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidInput, path.string() + ": " + e.what());
    }
}

std::string BackendsConfig::digest() const { return digest_hex(nlohmann::json(*this).dump()); }

bool BackendsConfig::any_mock_images() const {
    return image.kind == BackendKind::mock || multiview.kind == BackendKind::mock;
}

void to_json(nlohmann::json& j, const BackendsConfig& v) {
    j = {{"chat", v.chat}, {"image", v.image}, {"multiview", v.multiview}, {"embed", v.embed}};
}

void from_json(const nlohmann::json& j, BackendsConfig& v) {
    v.chat = j.value("chat", BackendConfig{});
    v.image = j.value("image", BackendConfig{});
    v.multiview = j.value("multiview", BackendConfig{});
    v.embed = j.value("embed", BackendConfig{});
}

// ---------------------------------------------------------------------------
// Assets

void ImageAsset::validate() const {
    if ((role == AssetRole::character_view) != view_index.has_value())
        throw Error(Errc::InvariantBreach, "asset " + id + ": view_index present iff role is character_view");
    if (view_index && (*view_index < 0 || *view_index >= kViewCount))
        throw Error(Errc::InvariantBreach, "asset " + id + ": view_index out of range");
    if (content_hash != image.content_hash())
        throw Error(Errc::InvariantBreach, "asset " + id + ": content hash does not match pixels");
}

ImageAsset make_asset(std::string id, AssetRole role, std::string owner_id, std::optional<int> view, Image image) {
    ImageAsset a;
    a.id = std::move(id);
    a.role = role;
    a.owner_id = std::move(owner_id);
    a.view_index = view;
    a.content_hash = image.content_hash();
    a.image = std::move(image);
    a.validate();
    return a;
}

double view_azimuth(int view_index) {
    if (view_index < 0 || view_index >= kViewCount) throw Error(Errc::InvalidInput, "view index out of range");
    return 45.0 * view_index;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "vectors differ in dimension");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0 || nb <= 0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Schema tags

std::string schema_instruction(const std::string& schema) {
    return "\n\nRespond with exactly one ```json fenced object following schema `" + schema + "`.";
}

std::optional<std::string> schema_of(const std::string& system) {
    static const std::regex re("schema `([A-Za-z0-9_.-]+)`");
    std::smatch m;
    if (std::regex_search(system, m, re)) return m[1].str();
    return std::nullopt;
}

std::string mock_prompt_hash(std::uint64_t seed, const std::string& system, const std::string& user) {
    std::uint64_t h = fnv1a64(to_hex(seed));
    h = fnv1a64(std::string_view("\0", 1), h);
    h = fnv1a64(system, h);
    h = fnv1a64(std::string_view("\0", 1), h);
    h = fnv1a64(user, h);
    return to_hex(h);
}

std::optional<std::vector<std::uint16_t>> read_panel_tokens(const Image& image) {
    if (image.width() < 64 || image.height() < 64) return std::nullopt;
    const int size = marker::kGridCells * mock_render::marker_cell_px(image.width(), image.height());
    auto bytes = marker::read(image, image.width() - size, 0, size, size);
    if (!bytes) return std::nullopt;
    auto panel = marker::decode_panel(*bytes);
    if (!panel) return std::nullopt;
    return panel->token_hashes;
}

// ---------------------------------------------------------------------------
// Mock implementations

namespace {

class MockChat final : public ChatBackend {
public:
    MockChat(const BackendConfig& config, MockResponderTable responders)
        : seed_(config.seed), responders_(std::move(responders)) {
        if (config.fixtures) {
            auto table = nlohmann::json::parse(read_text_file(*config.fixtures));
            for (auto& [key, value] : table.items()) fixtures_[key] = value.get<std::string>();
        }
    }

    std::string identity() const override { return "mock"; }

    std::string complete(const std::string& system, const std::string& user) const override {
        count_call();
        auto it = fixtures_.find(mock_prompt_hash(seed_, system, user));
        if (it != fixtures_.end()) return it->second;
        if (auto schema = schema_of(system)) {
            auto r = responders_.find(*schema);
            if (r != responders_.end()) return r->second(MockChatRequest{seed_, system, user});
        }
        return "```json\n{}\n```";
    }

private:
    std::uint64_t seed_;
    MockResponderTable responders_;
    std::map<std::string, std::string> fixtures_;
};

void check_dimensions(int w, int h) {
    if (w < 64 || w > 2048 || h < 64 || h > 2048)
        throw Error(Errc::DimensionRejected,
                    "requested " + std::to_string(w) + "x" + std::to_string(h) + " outside [64, 2048]");
}

std::uint32_t prompt_hash32(const std::string& prompt, std::uint64_t seed) {
    return static_cast<std::uint32_t>(hash_combine(fnv1a64(prompt), seed) & 0xFFFFFFFFu);
}

class MockImage final : public ImageBackend {
public:
    explicit MockImage(const BackendConfig& config) : seed_(config.seed) {}
    std::string identity() const override { return "mock"; }

    ImageAsset text_to_image(const ImageRequest& request) const override {
        count_call();
        check_dimensions(request.width, request.height);
        const std::uint64_t owner = fnv1a64(request.owner_id);
        const std::uint64_t seed = hash_combine(seed_, request.seed);
        marker::AssetStamp stamp{marker::Role::character_ref, std::nullopt, owner, prompt_hash32(request.prompt, seed)};
        Image image;
        if (request.role == AssetRole::spot_ref) {
            stamp.role = marker::Role::spot_ref;
            image = mock_render::render_spot(owner, hash_combine(fnv1a64(request.prompt), seed), request.width,
                                             request.height, marker::encode(stamp));
        } else {
            image = mock_render::render_character(owner, 0.0, request.width, request.height, marker::encode(stamp));
        }
        std::string id = (request.role == AssetRole::spot_ref ? "spot:" : "character:") + request.owner_id;
        return make_asset(id, request.role == AssetRole::spot_ref ? AssetRole::spot_ref : AssetRole::character_ref,
                          request.owner_id, std::nullopt, std::move(image));
    }

private:
    std::uint64_t seed_;
};

class MockMultiview final : public MultiviewBackend {
public:
    explicit MockMultiview(const BackendConfig&) {}
    std::string identity() const override { return "mock"; }

    std::vector<ImageAsset> image_to_multiview(const ImageAsset& ref) const override {
        count_call();
        if (ref.role != AssetRole::character_ref)
            throw Error(Errc::InvalidInput, "multi-view input must be a character reference");
        std::uint32_t prompt_hash = 0;
        const int size = marker::kGridCells * mock_render::marker_cell_px(ref.width(), ref.height());
        if (auto bytes = marker::read(ref.image, 0, 0, size, size))
            if (auto s = marker::decode_asset(*bytes)) prompt_hash = s->prompt_hash;
        const std::uint64_t owner = fnv1a64(ref.owner_id);
        std::vector<ImageAsset> views;
        for (int x = 0; x < kViewCount; ++x) {
            marker::AssetStamp stamp{marker::Role::character_view, x, owner, prompt_hash};
            Image image = mock_render::render_character(owner, view_azimuth(x), ref.width(), ref.height(),
                                                        marker::encode(stamp));
            views.push_back(make_asset(ref.owner_id + "/view_" + std::to_string(x), AssetRole::character_view,
                                       ref.owner_id, x, std::move(image)));
        }
        return views;
    }
};

void normalize_in_place(std::vector<double>& v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n <= 0) {
        v[0] = 1.0;
        return;
    }
    for (double& x : v) x /= n;
}

class MockEmbed final : public EmbedBackend {
public:
    explicit MockEmbed(const BackendConfig& config) : dim_(config.dimension) {}
    std::string identity() const override { return "mock-bag-of-tokens/" + std::to_string(dim_); }
    int dimension() const override { return dim_; }

    std::vector<double> embed_text(const std::string& text) const override {
        count_call();
        if (is_blank(text)) throw Error(Errc::InvalidInput, "embedding payload is empty");
        std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
        auto tokens = content_tokens(text);
        if (tokens.empty()) tokens.push_back(collapse_whitespace(text));
        for (const auto& t : tokens) v[bucket(marker::token_hash16(t))] += 1.0;
        normalize_in_place(v);
        return v;
    }

    std::vector<double> embed_image(const Image& image) const override {
        count_call();
        if (image.empty()) throw Error(Errc::InvalidInput, "embedding payload is empty");
        std::vector<double> v(static_cast<std::size_t>(dim_), 0.0);
        if (auto tokens = read_panel_tokens(image))
            for (auto h : *tokens) v[bucket(h)] += 1.0;
        // Coarse 4x4x4 color histogram, weighted below the token part.
        std::vector<double> hist(64, 0.0);
        double total = 0;
        for (int y = 0; y < image.height(); y += 4) {
            for (int x = 0; x < image.width(); x += 4) {
                Rgba p = image.at(x, y);
                hist[static_cast<std::size_t>((p.r >> 6) * 16 + (p.g >> 6) * 4 + (p.b >> 6))] += 1;
                total += 1;
            }
        }
        for (std::size_t i = 0; i < hist.size(); ++i)
            v[bucket(marker::token_hash16("hist:" + std::to_string(i)))] += 0.5 * hist[i] / total;
        normalize_in_place(v);
        return v;
    }

private:
    std::size_t bucket(std::uint16_t h) const { return static_cast<std::size_t>(h % static_cast<unsigned>(dim_)); }
    int dim_;
};

} // namespace

// Defined in http_backends.cpp.
std::unique_ptr<ChatBackend> make_http_chat(const BackendConfig& config);
std::unique_ptr<ImageBackend> make_http_image(const BackendConfig& config);
std::unique_ptr<MultiviewBackend> make_http_multiview(const BackendConfig& config);
std::unique_ptr<EmbedBackend> make_http_embed(const BackendConfig& config);

std::unique_ptr<ChatBackend> make_chat_backend(const BackendConfig& config, MockResponderTable responders) {
    config.validate();
    if (config.kind == BackendKind::http) return make_http_chat(config);
    return std::make_unique<MockChat>(config, std::move(responders));
}

std::unique_ptr<ImageBackend> make_image_backend(const BackendConfig& config) {
    config.validate();
    if (config.kind == BackendKind::http) return make_http_image(config);
    return std::make_unique<MockImage>(config);
}

std::unique_ptr<MultiviewBackend> make_multiview_backend(const BackendConfig& config) {
    config.validate();
    if (config.kind == BackendKind::http) return make_http_multiview(config);
    return std::make_unique<MockMultiview>(config);
}

std::unique_ptr<EmbedBackend> make_embed_backend(const BackendConfig& config) {
    config.validate();
    if (config.kind == BackendKind::http) return make_http_embed(config);
    return std::make_unique<MockEmbed>(config);
}

Backends Backends::create(const BackendsConfig& config, MockResponderTable responders) {
    Backends b;
    b.chat = make_chat_backend(config.chat, std::move(responders));
    b.image = make_image_backend(config.image);
    b.multiview = make_multiview_backend(config.multiview);
    b.embed = make_embed_backend(config.embed);
    return b;
}

} // namespace scriptboard
