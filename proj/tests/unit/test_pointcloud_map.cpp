#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "reference.hpp"
#include "pw/errors.hpp"
#include "pw/point_cloud_map.hpp"
#include "pw/synth_oracle.hpp"

using namespace pw;

namespace {

/// Frame record covering every pixel of an oracle render, fully overlapping.
FrameRecord overlapping_frame(const oracle::Scene& scene, const CameraRig& rig, int id) {
    const auto f = oracle::render(scene, rig);
    FrameRecord rec = make_initial_frame(id, rig, f.color, f.depth);
    std::fill(rec.overlap.values.begin(), rec.overlap.values.end(), 1);
    return rec;
}

DepthMap scaled(DepthMap d, double s) {
    for (auto& v : d.values) v *= s;
    return d;
}

}  // namespace

TEST_CASE("compute_overlap is the complement of the hole mask") {
    CHECK(compute_overlap(WeightMap(4, 3, 1.0)).count() == 0);
    CHECK(compute_overlap(WeightMap(4, 3, 0.0)).count() == 12);
    WeightMap m(4, 3, 0.0);
    m.values[5] = 1.0;
    const auto o = compute_overlap(m);
    CHECK(o.count() + 1 == 12);
    CHECK_FALSE(o.at(1, 1));
}

TEST_CASE("overlap fraction matches oracle co-visibility") {
    const auto scene = oracle::make_room_scene(21);
    const CameraIntrinsics k = make_intrinsics(64, 48, 60.0);
    const CameraRig a{k, Pose{}};
    const CameraRig b{k, Pose::from_yaw(3.0, {0.08, 0.0, -0.05})};
    const auto fa = oracle::render(scene, a);
    const auto fb = oracle::render(scene, b);
    const auto reproj = reproject(lift_to_points(fa.color, fa.depth, a), b);
    const double overlap = double(compute_overlap(reproj.hole_mask).count()) / double(fb.depth.size());

    // Co-visible: the surface point seen by b projects inside a and is the surface a sees there.
    std::size_t covisible = 0;
    for (int v = 0; v < k.height; ++v)
        for (int u = 0; u < k.width; ++u) {
            if (!fb.depth.is_valid(v, u)) continue;
            const Eigen::Vector3d p = b.pose.to_world(fb.depth.at(v, u) * k.ray(u, v));
            const Eigen::Vector3d q = a.pose.to_camera(p);
            if (q.z() <= 0) continue;
            const double ua = k.fx * q.x() / q.z() + k.cx;
            const double va = k.fy * q.y() / q.z() + k.cy;
            const int iu = int(std::lround(ua));
            const int iv = int(std::lround(va));
            if (iu < 0 || iv < 0 || iu >= k.width || iv >= k.height) continue;
            const auto hit = oracle::cast(scene, a, ua, va);
            if (hit && std::abs(a.pose.to_camera(hit->point).z() - q.z()) <= oracle::kOcclusionTolerance * q.z())
                ++covisible;
        }
    const double truth = double(covisible) / double(fb.depth.size());
    CHECK(std::abs(overlap - truth) < 0.01);
}

TEST_CASE("solve_scale: self alignment and planted scale") {
    const auto scene = oracle::make_room_scene(2);
    const CameraRig rig{make_intrinsics(40, 32, 60.0), Pose::from_yaw(15.0, {0.2, 0.1, 0.3})};
    FrameRecord f = overlapping_frame(scene, rig, 3);
    const PointCloud self = lift_to_points(f.color, f.depth, rig, 3);
    CHECK(solve_scale(f, self).scale.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(solve_scale(f, self).scale.value - 1.0) <= 1e-9);

    const PointCloud planted = lift_to_points(f.color, scaled(f.depth, 1.7), rig, 3);
    CHECK(std::abs(solve_scale(f, planted).scale.value - 1.7) <= 1e-3);

    // scale equivariance
    FrameRecord g = f;
    g.depth = scaled(f.depth, 2.5);
    CHECK(std::abs(solve_scale(g, planted).scale.value * 2.5 / solve_scale(f, planted).scale.value - 1.0) < 1e-6);
}

TEST_CASE("solve_scale: weighted median matches brute-force grid search") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise(0.0, 0.03);
    for (int trial = 0; trial < 5; ++trial) {
        const auto scene = oracle::make_room_scene(300 + trial);
        const CameraIntrinsics k = make_intrinsics(32, 24, 60.0);
        const CameraRig a{k, Pose::from_yaw(5.0 * trial, {0.0, 0.0, 0.1 * trial})};
        const CameraRig b{k, a.pose.compose(Pose::from_yaw(2.0, {0.06, 0.02, 0.0}))};
        const auto fa = oracle::render(scene, a);
        const PointCloud map = lift_to_points(fa.color, fa.depth, a, 0);
        const auto reproj = reproject(map, b);
        const auto fb = oracle::render(scene, b);
        FrameRecord f;
        f.id = 1;
        f.rig = b;
        f.color = fb.color;
        f.raw_color = reproj.color;
        f.depth = fb.depth;
        const double planted = 0.6 + 0.25 * trial;
        for (std::size_t i = 0; i < f.depth.size(); ++i) f.depth.values[i] *= planted * (1.0 + noise(rng));
        f.overlap = compute_overlap(reproj.hole_mask);
        f.inpaint_mask = reproj.hole_mask;
        const PointCloud target = correspondence_targets(map, reproj, 1);

        const ScaleSolution sol = solve_scale(f, target);
        const test::BruteForceScale obj(f, target);
        const double best_s = test::grid_search_scale(obj);
        const double best = obj(best_s);
        CHECK(std::abs(sol.scale.value - best_s) <= 1e-4 + 1e-12);
        CHECK(sol.residual <= best + 1e-9 * best);
        CHECK(sol.residual == doctest::Approx(obj(sol.scale.value)).epsilon(1e-12));
        CHECK(sol.residual <= scale_objective(f, target, sol.scale.value * 1.01));
        CHECK(sol.residual <= scale_objective(f, target, sol.scale.value * 0.99));
        CHECK(std::abs(sol.scale.value * planted - 1.0) < 0.05);
    }
}

TEST_CASE("solve_scale: errors") {
    const auto scene = oracle::make_room_scene(2);
    const CameraRig rig{make_intrinsics(16, 16, 60.0), Pose{}};
    FrameRecord f = overlapping_frame(scene, rig, 0);
    const PointCloud self = lift_to_points(f.color, f.depth, rig, 0);
    FrameRecord none = f;
    std::fill(none.overlap.values.begin(), none.overlap.values.end(), 0);
    CHECK_THROWS_AS(solve_scale(none, self), AlignmentError);
    CHECK_THROWS_AS(solve_scale(f, PointCloud{}), AlignmentError);

    FrameRecord tiny = f;
    for (auto& v : tiny.depth.values) v = 1e-10;
    CHECK_THROWS_AS(solve_scale(tiny, self), DegenerateError);
}

TEST_CASE("fuse: append-only, only non-overlap pixels are added") {
    const auto scene = oracle::make_room_scene(8);
    const CameraIntrinsics k = make_intrinsics(32, 32, 60.0);
    const CameraRig a{k, Pose{}};
    const auto fa = oracle::render(scene, a);
    PointCloudMap map;
    map.add_fragment(0, lift_to_points(fa.color, fa.depth, a, 0));
    const std::size_t n0 = map.point_count();

    FrameRecord full = overlapping_frame(scene, a, 1);
    CHECK(fuse(map, full, {1.0}).point_count() == n0);

    FrameRecord disjoint = make_initial_frame(1, a, fa.color, fa.depth);
    CHECK(fuse(map, disjoint, {1.0}).point_count() == n0 + fa.depth.valid_count());

    const CameraRig b{k, Pose::from_yaw(4.0, {0.1, 0.0, 0.0})};
    const auto reproj = reproject(map.global_points(), b);
    const auto fb = oracle::render(scene, b);
    FrameRecord f;
    f.id = 1;
    f.rig = b;
    f.color = fb.color;
    f.raw_color = reproj.color;
    f.depth = fb.depth;
    f.overlap = compute_overlap(reproj.hole_mask);
    f.inpaint_mask = reproj.hole_mask;
    const PointCloudMap fused = fuse(map, f, {1.0});
    std::size_t new_content = 0;
    for (std::size_t i = 0; i < f.depth.size(); ++i) new_content += (!f.overlap.values[i] && f.depth.valid[i]) ? 1 : 0;
    CHECK(fused.point_count() == n0 + new_content);
    for (std::size_t i = 0; i < n0; ++i) CHECK(fused.global_points().positions[i] == map.global_points().positions[i]);
    double worst = 0.0;
    for (const auto& p : fused.global_points().positions) worst = std::max(worst, scene.distance_to_surface(p));
    CHECK(worst < 1e-3);
}

TEST_CASE("PointCloudMap fragment invariants") {
    PointCloudMap map;
    PointCloud one;
    one.push_back({0, 0, 1}, {0, 0, 0}, {0, 0, 0}, 1.0);
    map.add_fragment(2, one);
    CHECK_THROWS_AS(map.add_fragment(2, one), ValidationError);
    CHECK_THROWS_AS(map.add_fragment(3, PointCloud{}), ValidationError);
}

namespace {

struct OracleCallbacks {
    const oracle::Scene* scene;
    std::vector<double> drift;
    ColorImage inpaint(int, const CameraRig& rig, const ColorImage&, const WeightMap&) const {
        return oracle::render(*scene, rig).color;
    }
    DepthMap depth(int k, const CameraRig& rig, const ColorImage&) const {
        return scaled(oracle::render(*scene, rig).depth, drift.empty() ? 1.0 : drift[std::size_t(k)]);
    }
};

PipelineResult run_oracle(const oracle::Scene& scene, const std::vector<CameraRig>& rigs, std::vector<double> drift) {
    OracleCallbacks cb{&scene, std::move(drift)};
    const auto f0 = oracle::render(scene, rigs[0]);
    const FrameRecord init = make_initial_frame(0, rigs[0], f0.color, f0.depth);
    return run_pipeline(
        init, std::vector<CameraRig>(rigs.begin() + 1, rigs.end()),
        [&](int k, const CameraRig& r, const ColorImage& raw, const WeightMap& h) { return cb.inpaint(k, r, raw, h); },
        [&](int k, const CameraRig& r, const ColorImage& c) { return cb.depth(k, r, c); });
}

}  // namespace

TEST_CASE("run_pipeline: single repeated pose with identity callbacks reproduces the initial lift") {
    const auto scene = oracle::make_room_scene(1);
    const CameraRig rig{make_intrinsics(32, 32, 60.0), Pose{}};
    const auto f0 = oracle::render(scene, rig);
    const FrameRecord init = make_initial_frame(0, rig, f0.color, f0.depth);
    const auto res = run_pipeline(
        init, {rig}, [](int, const CameraRig&, const ColorImage& raw, const WeightMap&) { return raw; },
        [&](int, const CameraRig&, const ColorImage&) { return f0.depth; });
    const PointCloud lifted = lift_to_points(f0.color, f0.depth, rig, 0);
    CHECK(res.map.global_points().positions == lifted.positions);
    CHECK(res.frames.size() == 2);
}

TEST_CASE("run_pipeline: oracle callbacks give unit scales; planted drift is inverted") {
    const auto scene = oracle::make_room_scene(14);
    const auto rigs = oracle::make_trajectory(make_intrinsics(48, 48, 60.0), 7, {0.05, 0.0, 0.0}, 2.0);
    const auto clean = run_oracle(scene, rigs, {});
    REQUIRE(clean.reports.size() == 7);
    for (std::size_t k = 1; k < 7; ++k) CHECK(std::abs(clean.reports[k].scale - 1.0) <= 1e-6);

    const std::vector<double> drift{1.0, 1.3, 0.8, 1.15, 0.9, 1.2, 0.85};
    const auto drifted = run_oracle(scene, rigs, drift);
    for (std::size_t k = 1; k < 7; ++k) CHECK(std::abs(drifted.reports[k].scale * drift[k] - 1.0) < 1e-2);

    double worst = 0.0;
    for (const auto& p : drifted.map.global_points().positions) worst = std::max(worst, scene.distance_to_surface(p));
    CHECK(worst < 1e-3);

    // determinism and append-only growth
    const auto again = run_oracle(scene, rigs, drift);
    CHECK(again.map.global_points().positions == drifted.map.global_points().positions);
    std::size_t prefix = 0;
    for (const auto& frag : drifted.map.fragments()) {
        CHECK(frag.points.size() > 0);
        prefix += frag.points.size();
    }
    CHECK(prefix == drifted.map.point_count());
}

TEST_CASE("run_pipeline: callback failures carry the frame index; empty trajectory is rejected") {
    const auto scene = oracle::make_room_scene(1);
    const auto rigs = oracle::make_trajectory(make_intrinsics(16, 16, 60.0), 4, {0.05, 0.0, 0.0}, 0.0);
    const auto f0 = oracle::render(scene, rigs[0]);
    const FrameRecord init = make_initial_frame(0, rigs[0], f0.color, f0.depth);
    auto inpaint = [&](int, const CameraRig& r, const ColorImage&, const WeightMap&) { return oracle::render(scene, r).color; };
    auto depth = [&](int k, const CameraRig& r, const ColorImage&) {
        if (k == 2) throw std::runtime_error("estimator exploded");
        return oracle::render(scene, r).depth;
    };
    try {
        run_pipeline(init, std::vector<CameraRig>(rigs.begin() + 1, rigs.end()), inpaint, depth);
        FAIL("expected an exception");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
        CHECK(std::string(e.what()).find("estimator exploded") != std::string::npos);
    }
    CHECK_THROWS_AS(run_pipeline(init, {}, inpaint, depth), ValidationError);
}
