#include <doctest.h>

#include <cmath>

#include "scriptboard/backends.hpp"
#include "scriptboard/error.hpp"
#include "scriptboard/hashing.hpp"
#include "scriptboard/marker.hpp"
#include "scriptboard/mock_render.hpp"
#include "support.hpp"

using namespace scriptboard;

namespace {

ImageRequest character_request(const std::string& owner, std::uint64_t seed = 1) {
    ImageRequest r;
    r.prompt = owner + ", red coat, full body";
    r.seed = seed;
    r.width = 512;
    r.height = 768;
    r.role = AssetRole::character_ref;
    r.owner_id = owner;
    return r;
}

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::optional<marker::AssetStamp> read_stamp(const Image& img) {
    const int size = marker::kGridCells * mock_render::marker_cell_px(img.width(), img.height());
    auto bytes = marker::read(img, 0, 0, size, size);
    if (!bytes) return std::nullopt;
    return marker::decode_asset(*bytes);
}

} // namespace

TEST_SUITE("backends") {

TEST_CASE("view azimuths step by 45 degrees") {
    for (int x = 0; x < kViewCount; ++x) CHECK(view_azimuth(x) == doctest::Approx(45.0 * x));
    CHECK_THROWS_AS(view_azimuth(8), Error);
    CHECK_THROWS_AS(view_azimuth(-1), Error);
}

TEST_CASE("cosine") {
    CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cosine({1, 2}, {2, 4}) == doctest::Approx(1.0));
    CHECK(cosine({0, 0}, {1, 0}) == 0.0);
    CHECK_THROWS_AS(cosine({1}, {1, 2}), Error);
}

TEST_CASE("marker bytes survive encode, stamp, scale and read") {
    marker::AssetStamp s{marker::Role::character_view, 5, 0x1234567890abcdefULL, 0xdeadbeef};
    CHECK(marker::decode_asset(marker::encode(s)) == s);
    marker::PanelStamp p{{1, 2, 65535}};
    CHECK(marker::decode_panel(marker::encode(p)) == p);
    CHECK_FALSE(marker::decode_panel(marker::encode(s)));

    Image img(300, 300, {255, 255, 255, 255});
    marker::stamp(img, 10, 20, 8, marker::encode(s));
    auto half = resize(img, 150, 150);
    auto bytes = marker::read(half, 5, 10, 24, 24);
    REQUIRE(bytes);
    CHECK(marker::decode_asset(*bytes) == s);
}

TEST_CASE("mock images are deterministic and stamped with their owner") {
    auto b = testing::mock_backends(7);
    auto a1 = b.image->text_to_image(character_request("jesse"));
    auto a2 = b.image->text_to_image(character_request("jesse"));
    CHECK(a1.image == a2.image);
    CHECK(a1.content_hash == a1.image.content_hash());
    CHECK(a1.width() == 512);
    CHECK(a1.height() == 768);
    auto stamp = read_stamp(a1.image);
    REQUIRE(stamp);
    CHECK(stamp->role == marker::Role::character_ref);
    CHECK(stamp->owner_hash == fnv1a64("jesse"));

    auto other = b.image->text_to_image(character_request("celine"));
    CHECK_FALSE(other.image == a1.image);
    auto reseeded = testing::mock_backends(8).image->text_to_image(character_request("jesse"));
    CHECK(read_stamp(reseeded.image)->prompt_hash != stamp->prompt_hash);
}

TEST_CASE("mock image sizes outside the accepted range are rejected") {
    auto b = testing::mock_backends();
    auto r = character_request("x");
    r.width = 32;
    try {
        b.image->text_to_image(r);
        FAIL("expected DimensionRejected");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DimensionRejected);
    }
}

TEST_CASE("multi-view returns eight ordered views of the same character") {
    auto b = testing::mock_backends(3);
    auto ref = b.image->text_to_image(character_request("mara"));
    auto views = b.multiview->image_to_multiview(ref);
    REQUIRE(views.size() == kViewCount);
    for (int x = 0; x < kViewCount; ++x) {
        const auto& v = views[static_cast<std::size_t>(x)];
        CHECK(v.role == AssetRole::character_view);
        CHECK(v.view_index == x);
        CHECK(v.owner_id == "mara");
        CHECK(v.width() == ref.width());
        auto s = read_stamp(v.image);
        REQUIRE(s);
        CHECK(s->view_index == x);
        CHECK(s->owner_hash == fnv1a64("mara"));
    }
    // Front and back outlines mirror each other; the views all differ.
    auto m0 = mock_render::silhouette(views[0].image);
    auto m4 = mock_render::silhouette(flip_horizontal(views[4].image));
    const int w = views[0].width();
    const int skip = marker::kGridCells * mock_render::marker_cell_px(w, views[0].height());
    std::size_t same = 0, total = 0;
    for (std::size_t i = static_cast<std::size_t>(skip * w); i < m0.size(); ++i, ++total) same += m0[i] == m4[i];
    CHECK(static_cast<double>(same) / static_cast<double>(total) > 0.999);
    for (int a = 0; a < kViewCount; ++a)
        for (int b = a + 1; b < kViewCount; ++b)
            CHECK_FALSE(mock_render::silhouette(views[static_cast<std::size_t>(a)].image) ==
                        mock_render::silhouette(views[static_cast<std::size_t>(b)].image));

    auto spot = ref;
    spot.role = AssetRole::spot_ref;
    CHECK_THROWS_AS(b.multiview->image_to_multiview(spot), Error);
}

TEST_CASE("mock embeddings are unit length and token based") {
    auto b = testing::mock_backends();
    auto t1 = b.embed->embed_text("a woman in a red dress");
    CHECK(t1.size() == 512);
    CHECK(norm(t1) == doctest::Approx(1.0));
    CHECK(cosine(t1, b.embed->embed_text("red dress woman")) == doctest::Approx(1.0));
    CHECK(cosine(t1, b.embed->embed_text("zebra xylophone")) < 0.2);
    CHECK_THROWS_AS(b.embed->embed_text("   "), Error);

    Image img(256, 144, {90, 90, 90, 255});
    auto v = b.embed->embed_image(img);
    CHECK(norm(v) == doctest::Approx(1.0));
    CHECK_THROWS_AS(b.embed->embed_image(Image()), Error);
    CHECK(b.embed->identity() == "mock-bag-of-tokens/512");
}

TEST_CASE("a stamped panel embeds close to its token text") {
    auto b = testing::mock_backends();
    Image img(1024, 576, {60, 70, 80, 255});
    std::vector<std::uint16_t> hashes;
    for (const char* t : {"celine", "red", "dress", "cafe"}) hashes.push_back(marker::token_hash16(t));
    const int cell = mock_render::marker_cell_px(1024, 576);
    marker::stamp(img, 1024 - marker::kGridCells * cell, 0, cell, marker::encode(marker::PanelStamp{hashes}));
    auto tokens = read_panel_tokens(img);
    REQUIRE(tokens);
    CHECK(*tokens == hashes);
    auto iv = b.embed->embed_image(img);
    CHECK(cosine(iv, b.embed->embed_text("celine red dress cafe")) >
          cosine(iv, b.embed->embed_text("jesse denim jacket river")));
}

TEST_CASE("mock chat replays the fixture table before the responders") {
    testing::TempDir dir("fixtures");
    const std::string system = "sys" + schema_instruction("PANEL_NOTES");
    nlohmann::json table = {{mock_prompt_hash(4, system, "hello"), "fixed reply"}};
    write_file(dir / "chat.json", table.dump());
    auto config = BackendsConfig::all_mock(4);
    config.chat.fixtures = (dir / "chat.json").string();
    auto b = Backends::create(config, default_mock_responders());
    CHECK(b.chat->complete(system, "hello") == "fixed reply");
    CHECK(b.chat->complete(system, "other") != "fixed reply");
    CHECK(b.chat->complete("no schema", "x") == "```json\n{}\n```");
    CHECK(b.chat->call_count() == 3);
    CHECK(schema_of(system) == std::optional<std::string>("PANEL_NOTES"));
}

TEST_CASE("backends config round trip, validation and digest") {
    auto config = BackendsConfig::all_mock(9);
    config.chat.kind = BackendKind::http;
    config.chat.base_url = "http://localhost:9999/api";
    config.chat.auth_env_var = "SCRIPTBOARD_TOKEN";
    nlohmann::json j = config;
    CHECK(j.dump().find("Bearer") == std::string::npos);
    BackendsConfig back = j.get<BackendsConfig>();
    CHECK(back.digest() == config.digest());
    CHECK(back.any_mock_images());
    auto changed = config;
    changed.embed.dimension = 256;
    CHECK(changed.digest() != config.digest());

    BackendConfig bad;
    bad.kind = BackendKind::http;
    CHECK_THROWS_AS(bad.validate(), Error);
    BackendConfig neg;
    neg.retries = -1;
    CHECK_THROWS_AS(neg.validate(), Error);
}

TEST_CASE("asset validation catches stale hashes and bad view indices") {
    auto a = make_asset("x/view_2", AssetRole::character_view, "x", 2, Image(64, 64));
    CHECK_NOTHROW(a.validate());
    a.image.set(0, 0, {1, 2, 3, 255});
    CHECK_THROWS_AS(a.validate(), Error);
    CHECK_THROWS_AS(make_asset("x", AssetRole::character_ref, "x", 2, Image(64, 64)), Error);
    CHECK_THROWS_AS(make_asset("x", AssetRole::character_view, "x", 9, Image(64, 64)), Error);
}

}
