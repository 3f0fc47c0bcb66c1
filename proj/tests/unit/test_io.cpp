#include <doctest.h>

#include <cstring>

#include <json.hpp>

#include "helpers.hpp"
#include "pw/errors.hpp"
#include "pw/interop_io.hpp"
#include "pw/synth_oracle.hpp"

using namespace pw;
using namespace pw::io;

namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes ascii(const std::string& s) { return Bytes(s.begin(), s.end()); }

void append_f32(Bytes& b, float f) {
    std::uint8_t raw[4];
    std::memcpy(raw, &f, 4);
    b.insert(b.end(), raw, raw + 4);
}

void append_u32(Bytes& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t(v >> (8 * i)));
}

FrameManifest sample_manifest() {
    FrameManifest m;
    m.frame_id = 3;
    m.intrinsics = make_intrinsics(8, 6, 60.0);
    m.camera_to_world = Pose::from_yaw(10.0, {0.1, -0.2, 0.3}).matrix();
    m.paths.color = "color.ppm";
    m.paths.depth = "depth.pfm";
    m.provenance = "oracle";
    return m;
}

}  // namespace

TEST_CASE("PFM: header fixture, row order and bit-exact round trip") {
    CHECK(std::string(reinterpret_cast<const char*>(encode_depth_pfm(DepthMap(640, 480, 1.0, true)).data()), 16) ==
          "Pf\n640 480\n-1.0\n");

    DepthMap d(2, 2, 0.0, true);
    d.values = {1.0, 2.0, 3.0, 4.0};
    Bytes expect = ascii("Pf\n2 2\n-1.0\n");
    for (float f : {3.0f, 4.0f, 1.0f, 2.0f}) append_f32(expect, f);  // bottom row first
    CHECK(encode_depth_pfm(d) == expect);
    const DepthMap back = decode_depth_pfm(expect);
    CHECK(back.values == d.values);
    CHECK(back.valid == d.valid);

    DepthMap holes(3, 2, 0.0, false);
    holes.values[4] = 0.15625;
    holes.valid[4] = 1;
    const auto path = test::temp_dir("pfm") / "d.pfm";
    write_depth_pfm(path, holes);
    const DepthMap h2 = read_depth_pfm(path);
    CHECK(h2.values == holes.values);
    CHECK(h2.valid == holes.valid);
    CHECK(encode_depth_pfm(h2) == read_file(path));

    Bytes big = expect;
    big[8] = '+';  // "-1.0" -> "+1.0"
    CHECK_THROWS_AS(decode_depth_pfm(big), FormatError);
    Bytes positive = ascii("Pf\n2 2\n1.0\n");
    positive.insert(positive.end(), expect.begin() + 12, expect.end());
    CHECK_THROWS_AS(decode_depth_pfm(positive), FormatError);
    Bytes color = expect;
    color[1] = 'F';
    CHECK_THROWS_AS(decode_depth_pfm(color), FormatError);
    Bytes truncated(expect.begin(), expect.end() - 1);
    CHECK_THROWS_AS(decode_depth_pfm(truncated), FormatError);
    Bytes trailing = expect;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_depth_pfm(trailing), FormatError);
    CHECK_THROWS_AS(decode_depth_pfm(ascii("Pf\n2 x\n-1.0\n")), FormatError);
    CHECK_THROWS_AS(read_depth_pfm(""), ValidationError);
}

TEST_CASE("PPM / PGM: quantisation, round trips, loss masks") {
    ColorImage img(3, 2);
    for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = double(i) / 17.0;
    const Bytes bytes = encode_color_ppm(img);
    CHECK(std::string(bytes.begin(), bytes.begin() + 11) == "P6\n3 2\n255\n");
    CHECK(bytes.size() == 11 + 18);
    for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(bytes[11 + i] == std::lround(img.values[i] * 255.0));
    const ColorImage back = decode_color_ppm(bytes);
    for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(std::abs(back.values[i] - img.values[i]) <= 0.5 / 255.0);
    CHECK(encode_color_ppm(back) == bytes);
    CHECK_THROWS_AS(decode_color_ppm(Bytes(bytes.begin(), bytes.end() - 2)), FormatError);

    const auto dir = test::temp_dir("pgm");
    write_loss_mask(dir / "all.pgm", WeightMap(4, 3, 0.0));
    const GrayImage all = read_pgm(dir / "all.pgm");
    CHECK(all.values == std::vector<std::uint8_t>(12, 255));
    WeightMap m(4, 3, 0.0);
    m.values[1] = 1.0;
    m.values[7] = 0.5;
    m.values[8] = 0.49;
    write_loss_mask(dir / "m.pgm", m);
    const WeightMap back_mask = read_loss_mask(dir / "m.pgm");
    std::vector<double> expect(12, 0.0);
    expect[1] = expect[7] = 1.0;
    CHECK(back_mask.values == expect);
    const Bytes raw = read_file(dir / "m.pgm");
    CHECK(encode_pgm(decode_pgm(raw)) == raw);
    GrayImage grey{2, 1, {0, 128}};
    write_pgm(dir / "grey.pgm", grey);
    CHECK_THROWS_AS(read_loss_mask(dir / "grey.pgm"), FormatError);
}

TEST_CASE("FLO2: header fixture and round trip") {
    FlowField f(3, 2);
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = double(i) * 0.25 - 1.0;
    Bytes expect = ascii("FLO2");
    append_u32(expect, 3);
    append_u32(expect, 2);
    append_u32(expect, 2);
    for (double v : f.values) append_f32(expect, float(v));
    CHECK(encode_flow(f) == expect);
    CHECK(decode_flow(expect).values == f.values);
    const auto path = test::temp_dir("flo") / "f.flo2";
    write_flow(path, f);
    CHECK(read_file(path) == expect);

    Bytes bad = expect;
    bad[3] = '3';
    CHECK_THROWS_AS(decode_flow(bad), FormatError);
    bad = expect;
    bad[12] = 3;
    CHECK_THROWS_AS(decode_flow(bad), FormatError);
    CHECK_THROWS_AS(decode_flow(Bytes(expect.begin(), expect.end() - 4)), FormatError);
    CHECK_THROWS_AS(decode_flow(Bytes(expect.begin(), expect.begin() + 10)), FormatError);
}

TEST_CASE("PLY seeds: byte fixture and round trip") {
    GaussianSeedCloud one;
    one.positions = {Eigen::Vector3f(1.0f, 2.0f, 3.0f)};
    one.colors = {{1.0, 0.0, 0.0}};
    one.confidence = {1.0};
    const std::string header =
        "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
        "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    CHECK(ply_header(1) == header);
    Bytes expect = ascii(header);
    for (float v : {1.0f, 2.0f, 3.0f}) append_f32(expect, v);
    expect.insert(expect.end(), {0xFF, 0x00, 0x00});
    CHECK(encode_ply_seeds(one) == expect);

    GaussianSeedCloud many;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        many.positions.emplace_back(float(u(rng) * 4 - 2), float(u(rng)), float(u(rng) * 5));
        many.colors.push_back({u(rng), u(rng), u(rng)});
        many.confidence.push_back(i % 3 == 0 ? 0.0 : 1.0);
    }
    const auto path = test::temp_dir("ply") / "s.ply";
    write_ply_seeds(path, many);
    const auto back = read_ply_seeds(path);
    REQUIRE(back.size() == many.size());
    for (std::size_t i = 0; i < many.size(); ++i) {
        CHECK(back.positions[i] == many.positions[i]);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(back.colors[i][c] - many.colors[i][c]) <= 0.5 / 255.0);
    }
    CHECK(encode_ply_seeds(back) == read_file(path));
    CHECK_THROWS_AS(write_ply_seeds(path, GaussianSeedCloud{}), ValidationError);
    Bytes trunc = read_file(path);
    trunc.pop_back();
    CHECK_THROWS_AS(decode_ply_seeds(trunc), FormatError);
}

TEST_CASE("manifest: canonical round trip and validation") {
    const FrameManifest m = sample_manifest();
    const std::string text = manifest_to_json(m);
    CHECK(text.back() == '\n');
    CHECK(manifest_to_json(manifest_from_json(text)) == text);
    const auto j = nlohmann::json::parse(text);
    CHECK(j["camera_to_world"].size() == 16);
    CHECK(j["camera_to_world"][3].get<double>() == doctest::Approx(m.camera_to_world(0, 3)));  // row-major

    auto mutate = [&](auto fn) {
        auto k = j;
        fn(k);
        return k.dump();
    };
    try {
        manifest_from_json(mutate([](auto& k) { k["colour_space"] = "srgb"; }));
        FAIL("unknown key accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("colour_space") != std::string::npos);
    }
    try {
        manifest_from_json(mutate([](auto& k) { k["paths"]["mask"] = "m.pgm"; }));
        FAIL("unknown nested key accepted");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("mask") != std::string::npos);
    }
    CHECK_THROWS_AS(manifest_from_json(mutate([](auto& k) { k["schema_version"] = 2; })), FormatError);
    CHECK_THROWS_AS(manifest_from_json(mutate([](auto& k) { k.erase("frame_id"); })), FormatError);
    CHECK_THROWS_AS(manifest_from_json(mutate([](auto& k) { k["provenance"] = "camera"; })), ValidationError);
    CHECK_THROWS_AS(manifest_from_json(mutate([](auto& k) { k["camera_to_world"][15] = 2.0; })), ValidationError);
    CHECK_THROWS_AS(manifest_from_json(mutate([](auto& k) { k["paths"]["depth"] = "../other/depth.pfm"; })),
                    ValidationError);
    CHECK_THROWS_AS(manifest_from_json(mutate([](auto& k) { k["paths"]["depth"] = "/etc/depth.pfm"; })),
                    ValidationError);
    CHECK_THROWS_AS(manifest_from_json(mutate([](auto& k) { k["paths"]["color"] = ""; })), ValidationError);
    CHECK_THROWS_AS(manifest_from_json("{"), FormatError);

    const auto dir = test::temp_dir("manifest");
    write_manifest(dir / kManifestName, m);
    CHECK_THROWS_AS(read_manifest(dir / kManifestName), FormatError);  // referenced files missing
    CHECK_THROWS_AS(read_manifest(""), ValidationError);
}

TEST_CASE("frame exchange: oracle frames round trip through a directory") {
    const auto scene = oracle::make_room_scene(3);
    const auto rigs = oracle::make_trajectory(make_intrinsics(16, 12, 60.0), 2, {0.05, 0.0, 0.0}, 2.0);
    const auto dir = test::temp_dir("exchange");
    std::vector<ExchangeFrame> written;
    for (int k = 0; k < 2; ++k) {
        const auto f = oracle::render(scene, rigs[std::size_t(k)]);
        ExchangeFrame ef;
        ef.manifest.frame_id = k;
        ef.manifest.intrinsics = rigs[std::size_t(k)].intrinsics;
        ef.manifest.camera_to_world = rigs[std::size_t(k)].pose.matrix();
        ef.manifest.provenance = "oracle";
        ef.color = f.color;
        ef.depth = f.depth;
        if (k > 0) {
            const auto t = oracle::ground_truth_flow(scene, rigs[0], rigs[1]);
            ef.flow = t.flow;
            ef.occlusion = t.occlusion;
            ef.loss_mask = WeightMap(16, 12, 0.0);
        }
        write_exchange_frame(dir, ef);
        written.push_back(ef);
    }
    const auto frames = read_exchange_dir(dir);
    REQUIRE(frames.size() == 2);
    CHECK(fs::exists(dir / frame_dir_name(1) / kManifestName));
    CHECK(frame_dir_name(1) == "frame_0001");
    for (int k = 0; k < 2; ++k) {
        const auto& a = written[std::size_t(k)];
        const auto& b = frames[std::size_t(k)];
        CHECK(b.manifest.frame_id == k);
        CHECK(b.manifest.provenance == "oracle");
        for (std::size_t p = 0; p < a.depth.size(); ++p) {
            CHECK(b.depth.valid[p] == a.depth.valid[p]);
            if (a.depth.valid[p]) CHECK(b.depth.values[p] == double(float(a.depth.values[p])));
        }
        CHECK((b.manifest.rig().pose.matrix() - a.manifest.camera_to_world).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(b.flow.has_value() == (k > 0));
        CHECK(b.occlusion.has_value() == (k > 0));
    }
    CHECK(frames[1].occlusion->values == written[1].occlusion->values);
    for (std::size_t p = 0; p < written[1].flow->values.size(); ++p)
        CHECK(frames[1].flow->values[p] == double(float(written[1].flow->values[p])));

    CHECK_THROWS_AS(read_exchange_dir(test::temp_dir("exchange_empty")), FormatError);
    fs::remove(dir / frame_dir_name(0) / "depth.pfm");
    CHECK_THROWS_AS(read_exchange_dir(dir), FormatError);
}
