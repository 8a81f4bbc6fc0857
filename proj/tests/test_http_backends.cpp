#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "scriptboard/backends.hpp"
#include "scriptboard/base64.hpp"
#include "scriptboard/error.hpp"

using namespace scriptboard;

namespace {

/// In-process HTTP server on a free port, stopped on scope exit.
class StubServer {
public:
    StubServer() {
        port_ = server.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    BackendConfig config(const std::string& prefix = "") const {
        BackendConfig c;
        c.kind = BackendKind::http;
        c.base_url = url() + prefix;
        c.model = "stub";
        c.timeout = 2.0;
        c.retries = 2;
        c.backoff_initial = 0.01;
        return c;
    }

    httplib::Server server;

private:
    int port_ = 0;
    std::thread thread_;
};

void reply_json(httplib::Response& res, const nlohmann::json& j) { res.set_content(j.dump(), "application/json"); }

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::InvariantBreach;
}

std::string png_b64(int w, int h) {
    auto png = encode_png(Image(w, h, {200, 10, 10, 255}));
    return base64_encode(png);
}

} // namespace

TEST_SUITE("http_backends") {

TEST_CASE("chat posts to the completions route under the base path") {
    StubServer stub;
    nlohmann::json seen;
    stub.server.Post("/api/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        reply_json(res, {{"choices", {{{"message", {{"content", "hello back"}}}}}}});
    });
    auto cfg = stub.config("/api");
    cfg.seed = 11;
    auto chat = make_chat_backend(cfg);
    CHECK(chat->complete("sys", "hi") == "hello back");
    CHECK(seen["messages"][0]["role"] == "system");
    CHECK(seen["messages"][1]["content"] == "hi");
    CHECK(seen["seed"] == 11);
    CHECK(chat->identity().find(stub.url()) != std::string::npos);
}

TEST_CASE("transient statuses are retried with backoff") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (++hits < 3) {
            res.status = 503;
            return;
        }
        reply_json(res, {{"choices", {{{"message", {{"content", "ok"}}}}}}});
    });
    CHECK(make_chat_backend(stub.config())->complete("s", "u") == "ok");
    CHECK(hits == 3);
}

TEST_CASE("exhausted retries raise BackendError") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 500;
    });
    auto cfg = stub.config();
    cfg.retries = 1;
    CHECK(code_of([&] { make_chat_backend(cfg)->complete("s", "u"); }) == Errc::BackendError);
    CHECK(hits == 2);
}

TEST_CASE("client errors are not retried") {
    StubServer stub;
    std::atomic<int> hits{0};
    stub.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
    });
    CHECK(code_of([&] { make_chat_backend(stub.config())->complete("s", "u"); }) == Errc::NonRetryableStatus);
    CHECK(hits == 1);
}

TEST_CASE("slow replies time out") {
    StubServer stub;
    stub.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(700));
        reply_json(res, {{"choices", {{{"message", {{"content", "late"}}}}}}});
    });
    auto cfg = stub.config();
    cfg.timeout = 0.2;
    cfg.retries = 0;
    CHECK(code_of([&] { make_chat_backend(cfg)->complete("s", "u"); }) == Errc::Timeout);
}

TEST_CASE("credentials come from the environment at call time") {
    StubServer stub;
    std::string auth;
    stub.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        reply_json(res, {{"choices", {{{"message", {{"content", "ok"}}}}}}});
    });
    auto cfg = stub.config();
    cfg.auth_env_var = "SCRIPTBOARD_TEST_TOKEN";
    ::unsetenv("SCRIPTBOARD_TEST_TOKEN");
    auto chat = make_chat_backend(cfg);
    CHECK(code_of([&] { chat->complete("s", "u"); }) == Errc::AuthMissing);
    ::setenv("SCRIPTBOARD_TEST_TOKEN", "abc123", 1);
    CHECK(chat->complete("s", "u") == "ok");
    CHECK(auth == "Bearer abc123");
    ::unsetenv("SCRIPTBOARD_TEST_TOKEN");
}

TEST_CASE("malformed bodies are reported") {
    StubServer stub;
    stub.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json", "text/plain");
    });
    stub.server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        reply_json(res, {{"data", nlohmann::json::array()}});
    });
    CHECK(code_of([&] { make_chat_backend(stub.config())->complete("s", "u"); }) == Errc::MalformedResponse);
    CHECK(code_of([&] { make_embed_backend(stub.config())->embed_text("x"); }) == Errc::MalformedResponse);
}

TEST_CASE("images are decoded and their size checked") {
    StubServer stub;
    std::atomic<int> w{128};
    stub.server.Post("/v1/images/generations", [&](const httplib::Request&, httplib::Response& res) {
        reply_json(res, {{"data", {{{"b64_json", png_b64(w, 96)}}}}});
    });
    auto image = make_image_backend(stub.config());
    ImageRequest r;
    r.width = 128;
    r.height = 96;
    r.owner_id = "anna";
    auto asset = image->text_to_image(r);
    CHECK(asset.width() == 128);
    CHECK(asset.image.at(5, 5) == Rgba{200, 10, 10, 255});
    CHECK(asset.owner_id == "anna");
    w = 100;
    CHECK(code_of([&] { image->text_to_image(r); }) == Errc::DimensionRejected);
    r.width = 4000;
    CHECK(code_of([&] { image->text_to_image(r); }) == Errc::DimensionRejected);
}

TEST_CASE("multi-view must return exactly eight views") {
    StubServer stub;
    std::atomic<int> count{8};
    stub.server.Post("/v1/images/multiview", [&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        CHECK(body["azimuths"].size() == 8);
        nlohmann::json data = nlohmann::json::array();
        for (int i = 0; i < count; ++i) data.push_back({{"b64_json", png_b64(64, 96)}});
        reply_json(res, {{"data", data}});
    });
    auto mv = make_multiview_backend(stub.config());
    auto ref = make_asset("character:anna", AssetRole::character_ref, "anna", std::nullopt, Image(64, 96));
    auto views = mv->image_to_multiview(ref);
    REQUIRE(views.size() == 8);
    CHECK(views[3].view_index == 3);
    count = 7;
    CHECK(code_of([&] { mv->image_to_multiview(ref); }) == Errc::WrongCount);
}

TEST_CASE("embeddings are normalized and dimension checked") {
    StubServer stub;
    std::atomic<int> dim{4};
    stub.server.Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        std::vector<double> v(static_cast<std::size_t>(dim.load()), 0.0);
        v[0] = 3;
        v[1] = 4;
        reply_json(res, {{"data", {{{"embedding", v}}}}});
    });
    auto cfg = stub.config();
    cfg.dimension = 4;
    auto embed = make_embed_backend(cfg);
    auto v = embed->embed_text("hello");
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));
    dim = 5;
    CHECK(code_of([&] { embed->embed_image(Image(64, 64)); }) == Errc::DimensionMismatch);
}

}
