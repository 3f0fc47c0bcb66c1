#include <doctest.h>

#include <cmath>

#include "pw/dcm/losses.hpp"
#include "pw/geometry.hpp"
#include "pw/synth_oracle.hpp"

using namespace pw;

namespace {

oracle::Scene wall_at(double z) {
    oracle::Scene s;
    oracle::AxisRect r;
    r.axis = 2;
    r.offset = z;
    r.lo = {-100.0, -100.0};
    r.hi = {100.0, 100.0};
    s.rects.push_back(r);
    return s;
}

}  // namespace

TEST_CASE("plane at z = 5 renders depth 5 everywhere") {
    const auto f = oracle::render(wall_at(5.0), {make_intrinsics(24, 16, 70.0), Pose{}});
    CHECK(f.depth.valid_count() == f.depth.size());
    for (double d : f.depth.values) CHECK(std::abs(d - 5.0) < 1e-12);
}

TEST_CASE("sphere on the optical axis: centre pixel depth is c - r") {
    oracle::Scene s;
    oracle::Sphere sp;
    sp.center = {0.0, 0.0, 4.0};
    sp.radius = 1.25;
    s.spheres.push_back(sp);
    // odd size so that the principal point falls on a pixel centre
    const CameraIntrinsics k = make_intrinsics(32, 32, 60.0);
    REQUIRE(k.cx == 16.0);
    const auto f = oracle::render(s, {k, Pose{}});
    CHECK(f.depth.at(16, 16) == doctest::Approx(2.75).epsilon(1e-12));
    CHECK_FALSE(f.depth.is_valid(0, 0));
}

TEST_CASE("ground-truth flow: identity poses give zero flow, lateral baseline gives fx*b/z") {
    const CameraIntrinsics k = make_intrinsics(32, 24, 60.0);
    const auto scene = wall_at(3.0);
    const auto same = oracle::ground_truth_flow(scene, {k, Pose{}}, {k, Pose{}});
    for (double v : same.flow.values) CHECK(std::abs(v) < 1e-12);
    for (double v : same.occlusion.values) CHECK(v == 1.0);

    const double b = 0.1;
    const auto lateral = oracle::ground_truth_flow(scene, {k, Pose{}}, {k, Pose::from_yaw(0.0, {b, 0.0, 0.0})});
    for (int r = 0; r < k.height; ++r)
        for (int c = 0; c < k.width; ++c) {
            // frame b sits b metres to the right, so its content is found fx*b/z pixels further right in a
            CHECK(lateral.flow.dx(r, c) == doctest::Approx(k.fx * b / 3.0).epsilon(1e-9));
            CHECK(std::abs(lateral.flow.dy(r, c)) < 1e-9);
        }
}

TEST_CASE("ground-truth flow closes: visible pixels land on the same surface point") {
    const auto scene = oracle::make_room_scene(5);
    const CameraIntrinsics k = make_intrinsics(48, 40, 60.0);
    const CameraRig a{k, Pose::from_yaw(2.0, {0.0, 0.0, 0.0})};
    const CameraRig b{k, Pose::from_yaw(5.0, {0.07, 0.02, 0.03})};
    const auto fa = oracle::render(scene, a);
    const auto fb = oracle::render(scene, b);
    const auto truth = oracle::ground_truth_flow(scene, a, b);
    const auto warped = warp_by_flow(fa.color, truth.flow);
    int visible = 0, checked_colors = 0;
    for (int r = 0; r < k.height; ++r)
        for (int c = 0; c < k.width; ++c) {
            if (truth.occlusion.at(r, c) < 0.5) continue;
            ++visible;
            const double u = c + truth.flow.dx(r, c);
            const double v = r + truth.flow.dy(r, c);
            const auto hit = oracle::cast(scene, a, u, v);
            REQUIRE(hit.has_value());
            const Eigen::Vector3d pb = b.pose.to_world(fb.depth.at(r, c) * k.ray(c, r));
            CHECK((hit->point - pb).norm() < 1e-3);

            // colour: only where every bilinear tap sees the same primitive
            const auto taps = bilinear_taps(k.width, k.height, u, v);
            bool same = taps.inside;
            for (int t = 0; t < taps.count && same; ++t)
                same = taps.weight[t] == 0.0 || fa.primitive[taps.index[t]] == fb.primitive[fb.depth.index(r, c)];
            if (!same || !warped.valid[fb.depth.index(r, c)]) continue;
            ++checked_colors;
            const auto wc = warped.image.pixel(r, c);
            const auto bc = fb.color.pixel(r, c);
            for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(wc[ch] - bc[ch]) <= 2.0 / 255.0);
        }
    CHECK(visible > k.width * k.height / 2);
    CHECK(checked_colors > visible / 2);
}

TEST_CASE("training set: deterministic, drift recoverable, consistent shapes") {
    const auto a = oracle::make_training_set(9, 2, {32, 32});
    const auto b = oracle::make_training_set(9, 2, {32, 32});
    REQUIRE(a.size() == 2);
    for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK(a[j].init_depths[3].values == b[j].init_depths[3].values);
        CHECK(a[j].backward_flows[2].values == b[j].backward_flows[2].values);
        CHECK(a[j].frame_count() == kTrainingFrames);
        CHECK(a[j].backward_flows.size() == kTrainingFrames - 1);
        CHECK(a[j].forward_flows.size() == kTrainingFrames - 1);
        for (int i = 0; i < kTrainingFrames; ++i) {
            const auto& gt = a[j].gt_depths[std::size_t(i)];
            const auto& in = a[j].init_depths[std::size_t(i)];
            double num = 0.0, den = 0.0;
            for (std::size_t p = 0; p < gt.size(); ++p)
                if (gt.valid[p]) num += in.values[p] * gt.values[p], den += gt.values[p] * gt.values[p];
            const double drift = a[j].corruption.drift[std::size_t(i)];
            CHECK(drift >= 0.8);
            CHECK(drift <= 1.25);
            CHECK(std::abs(num / den - drift) < 1e-6);
        }
    }
    const auto c = oracle::make_training_set(10, 1, {32, 32});
    CHECK(c[0].init_depths[0].values != a[0].init_depths[0].values);
}

TEST_CASE("an uncorrupted static sequence has zero consistency loss") {
    oracle::TrainingSetOptions o;
    o.width = o.height = 32;
    o.corrupt = false;
    o.static_camera = true;
    const auto set = oracle::make_training_set(4, 1, o);
    const auto res = dcm::consistency_loss(set[0], nullptr);
    CHECK(res.pixels > 0);
    CHECK(res.loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(res.loss) < 1e-12);
}
