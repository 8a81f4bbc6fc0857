#include "scriptboard/backends.hpp"

#include "scriptboard/base64.hpp"
#include "scriptboard/error.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <thread>

#include <httplib.h>

namespace scriptboard {

namespace {

struct Endpoint {
    std::string origin; // scheme://host[:port]
    std::string prefix; // path prefix without trailing '/'
};

Endpoint split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error(Errc::InvalidInput, "malformed base_url " + url);
    std::string prefix = m[2].matched ? m[2].str() : "";
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {m[1].str(), prefix};
}

/// Per-host cap on concurrent requests.
class HostSlots {
public:
    static HostSlots& for_host(const std::string& origin, int cap) {
        static std::mutex registry_mutex;
        static std::map<std::string, std::unique_ptr<HostSlots>> registry;
        std::lock_guard lock(registry_mutex);
        auto& slot = registry[origin];
        if (!slot) slot = std::make_unique<HostSlots>(cap);
        return *slot;
    }

    explicit HostSlots(int cap) : cap_(cap) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_use_ < cap_; });
        ++in_use_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            --in_use_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int in_use_ = 0;
    int cap_;
};

struct SlotGuard {
    HostSlots& slots;
    explicit SlotGuard(HostSlots& s) : slots(s) { slots.acquire(); }
    ~SlotGuard() { slots.release(); }
};

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

void set_timeouts(httplib::Client& client, double seconds) {
    auto whole = static_cast<time_t>(seconds);
    auto micros = static_cast<time_t>((seconds - static_cast<double>(whole)) * 1e6);
    client.set_connection_timeout(whole, micros);
    client.set_read_timeout(whole, micros);
    client.set_write_timeout(whole, micros);
}

Image decode_b64_png(const nlohmann::json& item) {
    if (!item.is_object() || !item.contains("b64_json") || !item["b64_json"].is_string())
        throw Error(Errc::MalformedResponse, "image item lacks b64_json");
    auto bytes = base64_decode(item["b64_json"].get<std::string>());
    return decode_png(bytes);
}

} // namespace

namespace http_detail {

nlohmann::json post_json(const BackendConfig& config, const std::string& path, const nlohmann::json& body) {
    config.validate();
    Endpoint endpoint = split_url(*config.base_url);
    httplib::Headers headers;
    if (!config.auth_env_var.empty()) {
        const char* credential = std::getenv(config.auth_env_var.c_str());
        if (credential == nullptr || *credential == '\0')
            throw Error(Errc::AuthMissing, "environment variable " + config.auth_env_var + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + credential);
    }
    const std::string payload = body.dump();
    HostSlots& slots = HostSlots::for_host(endpoint.origin, config.max_in_flight);

    std::string last_problem;
    bool last_was_timeout = false;
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
        if (attempt > 0) {
            double delay = config.backoff_initial * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        httplib::Result result;
        {
            SlotGuard guard(slots);
            httplib::Client client(endpoint.origin);
            set_timeouts(client, config.timeout);
            result = client.Post(endpoint.prefix + path, headers, payload, "application/json");
        }
        if (!result) {
            auto err = result.error();
            last_was_timeout = err == httplib::Error::Read || err == httplib::Error::Write ||
                               err == httplib::Error::ConnectionTimeout;
            last_problem = "transport error: " + httplib::to_string(err);
            continue;
        }
        const int status = result->status;
        if (status >= 200 && status < 300) {
            try {
                return nlohmann::json::parse(result->body);
            } catch (const nlohmann::json::exception&) {
                throw Error(Errc::MalformedResponse, "response from " + endpoint.origin + path + " is not JSON");
            }
        }
        if (!transient_status(status))
            throw Error(Errc::NonRetryableStatus, endpoint.origin + path + " returned HTTP " + std::to_string(status));
        last_was_timeout = status == 408;
        last_problem = "HTTP " + std::to_string(status);
    }
    throw Error(last_was_timeout ? Errc::Timeout : Errc::BackendError,
                endpoint.origin + path + " failed after " + std::to_string(config.retries + 1) +
                    " attempt(s): " + last_problem);
}

} // namespace http_detail

namespace {

class HttpChat final : public ChatBackend {
public:
    explicit HttpChat(BackendConfig config) : config_(std::move(config)) {}
    std::string identity() const override { return "http:" + *config_.base_url + "#" + config_.model; }

    std::string complete(const std::string& system, const std::string& user) const override {
        count_call();
        nlohmann::json body = {{"model", config_.model},
                               {"messages", {{{"role", "system"}, {"content", system}},
                                             {{"role", "user"}, {"content", user}}}},
                               {"seed", config_.seed}};
        auto response = http_detail::post_json(config_, "/v1/chat/completions", body);
        try {
            return response.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::MalformedResponse, "chat completion lacks choices[0].message.content");
        }
    }

private:
    BackendConfig config_;
};

class HttpImage final : public ImageBackend {
public:
    explicit HttpImage(BackendConfig config) : config_(std::move(config)) {}
    std::string identity() const override { return "http:" + *config_.base_url + "#" + config_.model; }

    ImageAsset text_to_image(const ImageRequest& request) const override {
        count_call();
        if (request.width < 64 || request.width > 2048 || request.height < 64 || request.height > 2048)
            throw Error(Errc::DimensionRejected, "requested size outside [64, 2048]");
        nlohmann::json body = {{"model", config_.model},
                               {"prompt", request.prompt},
                               {"negative_prompt", request.negative_prompt},
                               {"seed", request.seed},
                               {"width", request.width},
                               {"height", request.height},
                               {"n", 1},
                               {"response_format", "b64_json"}};
        auto response = http_detail::post_json(config_, "/v1/images/generations", body);
        if (!response.contains("data") || !response["data"].is_array() || response["data"].empty())
            throw Error(Errc::MalformedResponse, "image response lacks data[0]");
        Image image = decode_b64_png(response["data"][0]);
        if (image.width() != request.width || image.height() != request.height)
            throw Error(Errc::DimensionRejected, "backend returned " + std::to_string(image.width()) + "x" +
                                                     std::to_string(image.height()));
        std::string id = (request.role == AssetRole::spot_ref ? "spot:" : "character:") + request.owner_id;
        return make_asset(id, request.role == AssetRole::spot_ref ? AssetRole::spot_ref : AssetRole::character_ref,
                          request.owner_id, std::nullopt, std::move(image));
    }

private:
    BackendConfig config_;
};

class HttpMultiview final : public MultiviewBackend {
public:
    explicit HttpMultiview(BackendConfig config) : config_(std::move(config)) {}
    std::string identity() const override { return "http:" + *config_.base_url + "#" + config_.model; }

    std::vector<ImageAsset> image_to_multiview(const ImageAsset& ref) const override {
        count_call();
        if (ref.role != AssetRole::character_ref)
            throw Error(Errc::InvalidInput, "multi-view input must be a character reference");
        std::vector<double> azimuths;
        for (int x = 0; x < kViewCount; ++x) azimuths.push_back(view_azimuth(x));
        auto png = encode_png(ref.image);
        nlohmann::json body = {{"model", config_.model},
                               {"image", base64_encode(png)},
                               {"num_views", kViewCount},
                               {"azimuths", azimuths},
                               {"seed", config_.seed},
                               {"response_format", "b64_json"}};
        auto response = http_detail::post_json(config_, "/v1/images/multiview", body);
        if (!response.contains("data") || !response["data"].is_array())
            throw Error(Errc::MalformedResponse, "multi-view response lacks data[]");
        if (response["data"].size() != kViewCount)
            throw Error(Errc::WrongCount, "expected 8 views, backend returned " +
                                              std::to_string(response["data"].size()));
        std::vector<ImageAsset> views;
        for (int x = 0; x < kViewCount; ++x)
            views.push_back(make_asset(ref.owner_id + "/view_" + std::to_string(x), AssetRole::character_view,
                                       ref.owner_id, x, decode_b64_png(response["data"][static_cast<std::size_t>(x)])));
        return views;
    }

private:
    BackendConfig config_;
};

class HttpEmbed final : public EmbedBackend {
public:
    explicit HttpEmbed(BackendConfig config) : config_(std::move(config)) {}
    std::string identity() const override {
        return "http:" + *config_.base_url + "#" + config_.model + "/" + std::to_string(config_.dimension);
    }
    int dimension() const override { return config_.dimension; }

    std::vector<double> embed_text(const std::string& text) const override {
        count_call();
        if (text.empty()) throw Error(Errc::InvalidInput, "embedding payload is empty");
        return finish(http_detail::post_json(config_, "/v1/embeddings", {{"model", config_.model}, {"input", text}}));
    }

    std::vector<double> embed_image(const Image& image) const override {
        count_call();
        if (image.empty()) throw Error(Errc::InvalidInput, "embedding payload is empty");
        auto png = encode_png(image);
        return finish(http_detail::post_json(config_, "/v1/embeddings",
                                             {{"model", config_.model}, {"input_image", base64_encode(png)}}));
    }

private:
    std::vector<double> finish(const nlohmann::json& response) const {
        std::vector<double> v;
        try {
            v = response.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw Error(Errc::MalformedResponse, "embedding response lacks data[0].embedding");
        }
        if (static_cast<int>(v.size()) != config_.dimension)
            throw Error(Errc::DimensionMismatch, "expected dimension " + std::to_string(config_.dimension) +
                                                     ", got " + std::to_string(v.size()));
        double n = 0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n <= 0) throw Error(Errc::MalformedResponse, "zero embedding vector");
        for (double& x : v) x /= n;
        return v;
    }

    BackendConfig config_;
};

} // namespace

std::unique_ptr<ChatBackend> make_http_chat(const BackendConfig& config) { return std::make_unique<HttpChat>(config); }
std::unique_ptr<ImageBackend> make_http_image(const BackendConfig& config) { return std::make_unique<HttpImage>(config); }
std::unique_ptr<MultiviewBackend> make_http_multiview(const BackendConfig& config) {
    return std::make_unique<HttpMultiview>(config);
}
std::unique_ptr<EmbedBackend> make_http_embed(const BackendConfig& config) { return std::make_unique<HttpEmbed>(config); }

} // namespace scriptboard
