#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>

#include "logokit/core/config.hpp"
#include "logokit/core/errors.hpp"
#include "logokit/core/image.hpp"
#include "logokit/core/manifest.hpp"
#include "logokit/core/png_io.hpp"
#include "logokit/core/rng.hpp"
#include "logokit/core/types.hpp"
#include "support.hpp"

using namespace logokit;
using lktest::TempDir;

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(fnv1a64(nullptr, 0) == 14695981039346656037ull);
    const char a = 'a';
    CHECK(fnv1a64(&a, 1) == 0xaf63dc4c8601ec8cull);
    const char fb[] = {'f', 'o', 'o', 'b', 'a', 'r'};
    CHECK(fnv1a64(fb, 6) == 0x85944171f73967e8ull);
}

TEST_CASE("rng streams replay exactly for equal seed and label") {
    Rng a(42, "stream");
    Rng b(42, "stream");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(42, "stream");
    Rng d(42, "stream");
    for (int i = 0; i < 50; ++i) {
        CHECK(c.uniform() == d.uniform());
        CHECK(c.normal() == d.normal());
        CHECK(c.uniform_int(-5, 11) == d.uniform_int(-5, 11));
    }
}

TEST_CASE("rng streams differ across labels and seeds") {
    Rng a(42, "alpha");
    Rng b(42, "beta");
    Rng c(43, "alpha");
    int same_ab = 0, same_ac = 0;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next_u64();
        if (va == b.next_u64()) ++same_ab;
        if (va == c.next_u64()) ++same_ac;
    }
    CHECK(same_ab == 0);
    CHECK(same_ac == 0);
}

TEST_CASE("uniform stays in range with near-uniform bucket frequencies") {
    Rng rng(7, "freq");
    const int n = 100000;
    std::array<int, 10> buckets{};
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        ++buckets[static_cast<int>(u * 10.0)];
    }
    for (int count : buckets) {
        CHECK(std::abs(count / static_cast<double>(n) - 0.1) < 0.005);
    }
}

TEST_CASE("uniform_int covers both inclusive endpoints") {
    Rng rng(7, "int");
    std::set<std::int64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.uniform_int(-2, 3);
        CHECK(v >= -2);
        CHECK(v <= 3);
        seen.insert(v);
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("normal draws have unit-normal moments") {
    Rng rng(11, "norm");
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("srgb transfer round-trips every 8-bit value") {
    for (int v = 0; v < 256; ++v) {
        Image8 img(1, 1, 1, static_cast<std::uint8_t>(v));
        const ImageF lin = to_linear(img);
        CHECK(lin.at(0, 0, 0) >= 0.0);
        CHECK(lin.at(0, 0, 0) <= 1.0);
        CHECK(to_srgb8(lin).at(0, 0, 0) == v);
    }
}

TEST_CASE("relative luminance uses Rec. 709 weights on linear input") {
    CHECK(relative_luminance(1.0, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(relative_luminance(0.0, 0.0, 0.0) == 0.0);
    CHECK(relative_luminance(1.0, 0.0, 0.0) == doctest::Approx(0.2126).epsilon(1e-12));
    CHECK(relative_luminance(0.0, 1.0, 0.0) == doctest::Approx(0.7152).epsilon(1e-12));
    CHECK(relative_luminance(0.0, 0.0, 1.0) == doctest::Approx(0.0722).epsilon(1e-12));
}

TEST_CASE("png io round-trips rasters and writes deterministically") {
    TempDir tmp("png");
    Rng rng(3, "pixels");
    Image8 img(9, 7, 4);
    for (auto& b : img.data) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));

    const auto p1 = tmp.path / "a.png";
    const auto p2 = tmp.path / "b.png";
    write_png(img, p1);
    write_png(img, p2);
    CHECK(read_png(p1) == img);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(is_readable_png(p1));

    const auto junk = tmp.path / "junk.png";
    std::ofstream(junk, std::ios::binary) << "not a png";
    CHECK_FALSE(is_readable_png(junk));
    CHECK_THROWS_AS(read_png(junk), LoadError);
    CHECK_THROWS_AS(read_png(tmp.path / "missing.png"), LoadError);
}

TEST_CASE("flatten_rgb normalizes channel counts") {
    Image8 gray(2, 1, 1);
    gray.at(0, 0, 0) = 10;
    gray.at(1, 0, 0) = 200;
    const Image8 rgb = flatten_rgb(gray);
    CHECK(rgb.channels == 3);
    CHECK(rgb.at(0, 0, 2) == 10);
    CHECK(rgb.at(1, 0, 1) == 200);

    Image8 rgba(1, 1, 4, 99);
    const Image8 dropped = flatten_rgb(rgba);
    CHECK(dropped.channels == 3);
    CHECK(dropped.at(0, 0, 0) == 99);

    CHECK(flatten_rgb(rgb) == rgb);
}

TEST_CASE("logo assets require alpha and derive the linear mean color") {
    Image8 img(2, 1, 4);
    // left pixel: pure sRGB red, opaque; right pixel: pure blue, transparent
    img.at(0, 0, 0) = 255;
    img.at(0, 0, 3) = 255;
    img.at(1, 0, 2) = 255;
    img.at(1, 0, 3) = 0;
    const LogoAsset asset = LogoAsset::from_image(img, "red");
    CHECK(asset.mean_color[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(asset.mean_color[1] == 0.0);
    CHECK(asset.mean_color[2] == 0.0);

    Image8 no_alpha(2, 2, 3, 255);
    CHECK_THROWS_AS(LogoAsset::from_image(no_alpha, "x"), ValidationError);
    Image8 transparent(2, 2, 4, 0);
    CHECK_THROWS_AS(LogoAsset::from_image(transparent, "x"), ValidationError);
}

TEST_CASE("logo load reads RGBA PNGs and records provenance") {
    TempDir tmp("logo");
    const LogoAsset made = lktest::make_logo(8);
    const auto p = tmp.path / "mark.png";
    write_png(made.image, p);
    const LogoAsset loaded = LogoAsset::load(p);
    CHECK(loaded.id == "mark");
    CHECK(loaded.image == made.image);
    CHECK(loaded.provenance == p.string());
}

TEST_CASE("token roles round-trip by name") {
    CHECK(token_role_name(TokenRole::relation) == std::string("relation"));
    CHECK(token_role_name(TokenRole::identity) == std::string("identity"));
    CHECK(token_role_from_name("relation") == TokenRole::relation);
    CHECK(token_role_from_name("identity") == TokenRole::identity);
    CHECK_THROWS_AS(token_role_from_name("other"), ValidationError);
}

namespace {

Manifest sample_manifest() {
    Manifest m;
    ManifestRecord r1;
    r1.prompt = "a photo of a mug";
    r1.image = "img/mug_0.png";
    r1.object_class = "a mug";
    r1.split = "relation";
    ManifestRecord r2;
    r2.prompt = "a <V> on a plain background";
    r2.image = "img/bind_0.png";
    r2.mask = "img/bind_0_mask.png";
    r2.split = "binding";
    r2.logo_id = "acme";
    r2.background_kind = "solid";
    r2.placement = Placement{3, 4, 0.5, 12.0};
    m.records = {r1, r2};
    return m;
}

}  // namespace

TEST_CASE("manifest text round-trips with order preserved") {
    const Manifest m = sample_manifest();
    const std::string text = manifest_to_text(m);
    CHECK(parse_manifest_text(text) == m);
    // one JSON object per line
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.find("\"class\"") != std::string::npos);
    CHECK(text.find("\"background\"") != std::string::npos);
}

TEST_CASE("manifest parsing reports schema violations") {
    CHECK_THROWS_AS(parse_manifest_text("{\"prompt\": \"p\"}\n"), ValidationError);
    CHECK_THROWS_AS(parse_manifest_text("not json\n"), ValidationError);
    CHECK_THROWS_AS(parse_manifest_text("[1,2]\n"), ValidationError);
    CHECK_THROWS_AS(parse_manifest_text(""), ValidationError);
}

TEST_CASE("manifest load verifies referenced rasters") {
    TempDir tmp("manifest");
    Manifest m;
    ManifestRecord r;
    r.prompt = "p";
    r.image = "a.png";
    m.records = {r};
    save_manifest(m, tmp.path / "manifest.jsonl");
    CHECK_THROWS_AS(load_manifest(tmp.path / "manifest.jsonl"), IntegrityError);
    write_png(lktest::solid_rgb(4, 4, 1, 2, 3), tmp.path / "a.png");
    CHECK(load_manifest(tmp.path / "manifest.jsonl") == m);
    CHECK_THROWS_AS(load_manifest(tmp.path / "absent.jsonl"), LoadError);
}

TEST_CASE("relation grouping enforces three to four exemplars per class") {
    Manifest m;
    for (int cls = 0; cls < 20; ++cls) {
        const int count = 3 + cls % 2;
        for (int e = 0; e < count; ++e) {
            ManifestRecord r;
            r.prompt = "a photo of class " + std::to_string(cls);
            r.image = "c" + std::to_string(cls) + "_" + std::to_string(e) + ".png";
            r.object_class = "class " + std::to_string(cls);
            r.split = "relation";
            m.records.push_back(r);
        }
    }
    const auto classes = group_relation_classes(m);
    REQUIRE(classes.size() == 20);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        CHECK(classes[i].name == "class " + std::to_string(i));
        CHECK(classes[i].exemplar_images.size() == 3 + i % 2);
    }

    Manifest thin = m;
    thin.records.resize(2);  // first class now has 2 exemplars
    CHECK_THROWS_AS(group_relation_classes(thin), ValidationError);
}

TEST_CASE("manifest refs resolve relative to the manifest directory") {
    const std::filesystem::path dir = "/data/run";
    CHECK(resolve_manifest_ref(dir, "img/a.png") == std::filesystem::path("/data/run/img/a.png"));
    CHECK(resolve_manifest_ref(dir, "/abs/b.png") == std::filesystem::path("/abs/b.png"));
}

TEST_CASE("config defaults carry the published hyperparameters") {
    const RunConfig cfg;
    CHECK(cfg.lambda == 2.0);
    CHECK(cfg.recalib_freq_f == 100);
    CHECK(cfg.gens_per_eval == 4);
    CHECK(cfg.num_objects_N == 20);
}

TEST_CASE("config round-trips through json") {
    RunConfig cfg = lktest::small_config();
    cfg.seed = 99;
    cfg.lambda = 3.5;
    cfg.object1_pool = {"a sticker", "a painting"};
    const RunConfig back = RunConfig::from_json_text(cfg.to_json_text());
    CHECK(back.seed == cfg.seed);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.object1_pool == cfg.object1_pool);
    CHECK(back.backend.image_size == cfg.backend.image_size);
    CHECK(back.synthesis.out_size == cfg.synthesis.out_size);
}

TEST_CASE("config validation rejects incoherent settings") {
    RunConfig cfg;
    cfg.lambda = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);

    RunConfig mismatch;
    mismatch.synthesis.out_size = 32;  // backend stays at its default size
    CHECK_THROWS_AS(mismatch.validate(), ValidationError);

    RunConfig freq;
    freq.recalib_freq_f = freq.total_iters_A + 1;
    CHECK_THROWS_AS(freq.validate(), ValidationError);

    CHECK_THROWS_AS(RunConfig::from_json_text("[]"), ValidationError);
}
