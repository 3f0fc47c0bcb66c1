#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pw/cli.hpp"
#include "pw/dcm/losses.hpp"
#include "pw/metrics.hpp"
#include "pw/semantic_transfer.hpp"

namespace pw::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// One JSON record per line; doubles printed with full precision.
void emit(std::ostream& out, const json& record) { out << record.dump() << "\n"; }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

fs::path require_out(const RunConfig& c) {
    if (c.out.empty()) throw UsageError("--out is required");
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec || !fs::is_directory(c.out)) throw Error("cannot create output directory " + c.out);
    return fs::path(c.out);
}

CameraIntrinsics config_intrinsics(const RunConfig& c) { return make_intrinsics(c.width, c.height, c.hfov); }

std::vector<CameraRig> config_trajectory(const RunConfig& c) {
    return oracle::make_trajectory(config_intrinsics(c), c.poses, Eigen::Vector3d(c.step[0], c.step[1], c.step[2]),
                                   c.yaw_step);
}

double drift_for(const RunConfig& c, std::size_t k) { return c.drift.empty() ? 1.0 : c.drift.at(k); }

DepthMap scaled(DepthMap d, double s) {
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d.valid[i]) d.values[i] *= s;
    return d;
}

dcm::DcmNetwork load_network(const std::string& path) {
    if (path.empty()) return dcm::DcmNetwork();
    if (!fs::exists(path)) throw FormatError("checkpoint " + path + " does not exist");
    return dcm::DcmNetwork::from_container(read_container(path, dcm::kCheckpointMagic));
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    io::write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

io::GrayImage xt_image(const DepthMap& slice) {
    io::GrayImage g{slice.width, slice.height, std::vector<std::uint8_t>(slice.size(), 0)};
    double mx = 0.0;
    for (std::size_t i = 0; i < slice.size(); ++i)
        if (slice.valid[i]) mx = std::max(mx, slice.values[i]);
    if (mx <= 0.0) return g;
    for (std::size_t i = 0; i < slice.size(); ++i)
        if (slice.valid[i]) g.values[i] = std::uint8_t(std::lround(255.0 * slice.values[i] / mx));
    return g;
}

}  // namespace

// --- Configuration ------------------------------------------------------------------------------

void RunConfig::validate() const {
    if (preset != "desk" && preset != "paper") throw UsageError("preset must be desk or paper, got " + preset);
    if (poses < 1) throw UsageError("trajectory must hold at least one pose");
    if (width <= 0 || height <= 0 || width % 4 != 0 || height % 4 != 0)
        throw UsageError("resolution must be positive multiples of 4");
    if (!(hfov > 0.0 && hfov < 180.0)) throw UsageError("hfov must be in (0, 180)");
    if (!(alpha >= 0.0)) throw UsageError("alpha must be non-negative");
    for (double d : drift)
        if (!(d > 0.0) || !std::isfinite(d)) throw UsageError("drift factors must be positive");
    if (train_sequences < 1 || eval_sequences < 1) throw UsageError("sequence counts must be positive");
    if (iterations < 0) throw UsageError("iterations must be non-negative");
    if (crop <= 0 || crop % 4 != 0 || crop > train_size) throw UsageError("crop must be a multiple of 4 within train_size");
    if (steps < 1) throw UsageError("steps must be positive");
}

RunConfig RunConfig::for_preset(const std::string& preset) {
    RunConfig c;
    c.preset = preset;
    if (preset == "paper") {
        c.width = 384;
        c.height = 384;
        c.train_size = 400;
        c.crop = 384;
        c.iterations = 20000;
        c.steps = 50;
    } else if (preset != "desk") {
        throw UsageError("preset must be desk or paper, got " + preset);
    }
    return c;
}

RunConfig merge_config_json(RunConfig c, const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "preset") c.preset = v.get<std::string>();
            else if (key == "poses") c.poses = v.get<int>();
            else if (key == "step") c.step = v.get<std::array<double, 3>>();
            else if (key == "yaw_step") c.yaw_step = v.get<double>();
            else if (key == "width") c.width = v.get<int>();
            else if (key == "height") c.height = v.get<int>();
            else if (key == "hfov") c.hfov = v.get<double>();
            else if (key == "alpha") c.alpha = v.get<double>();
            else if (key == "drift") c.drift = v.get<std::vector<double>>();
            else if (key == "dcm") c.dcm = v.get<std::string>();
            else if (key == "out") c.out = v.get<std::string>();
            else if (key == "frames") c.frames = v.get<std::string>();
            else if (key == "train_sequences") c.train_sequences = v.get<int>();
            else if (key == "train_size") c.train_size = v.get<int>();
            else if (key == "iterations") c.iterations = v.get<int>();
            else if (key == "crop") c.crop = v.get<int>();
            else if (key == "eval_sequences") c.eval_sequences = v.get<int>();
            else if (key == "steps") c.steps = v.get<int>();
            else throw UsageError("unknown config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("config value has the wrong type: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path, const std::optional<std::string>& preset_override) {
    std::string text = "{}";
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot read config " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    std::string preset = "desk";
    try {
        const json j = json::parse(text);
        if (j.is_object() && j.contains("preset") && j["preset"].is_string()) preset = j["preset"];
    } catch (const json::exception&) {
    }
    if (preset_override) preset = *preset_override;
    RunConfig c = merge_config_json(RunConfig::for_preset(preset), text);
    c.preset = preset;
    return c;
}

// --- synth --------------------------------------------------------------------------------------

std::vector<io::ExchangeFrame> synth_frames(const RunConfig& config) {
    config.validate();
    const oracle::Scene scene = oracle::make_room_scene(config.seed);
    const auto rigs = config_trajectory(config);
    std::vector<io::ExchangeFrame> frames;
    for (std::size_t k = 0; k < rigs.size(); ++k) {
        io::ExchangeFrame f;
        f.manifest.frame_id = int(k);
        f.manifest.intrinsics = rigs[k].intrinsics;
        f.manifest.camera_to_world = rigs[k].pose.matrix();
        f.manifest.provenance = "oracle";
        oracle::OracleFrame r = oracle::render(scene, rigs[k]);
        f.color = std::move(r.color);
        f.depth = std::move(r.depth);
        if (k > 0) {
            auto truth = oracle::ground_truth_flow(scene, rigs[k - 1], rigs[k]);
            f.flow = std::move(truth.flow);
            f.occlusion = std::move(truth.occlusion);
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
    const fs::path out = require_out(config);
    const auto frames = synth_frames(config);
    for (const auto& f : frames) io::write_exchange_frame(out, f);
    emit(log, {{"command", "synth"}, {"frames", frames.size()}, {"out", out.string()}, {"seed", config.seed}});
}

// --- run ----------------------------------------------------------------------------------------

RunSummary cmd_run(const RunConfig& config, std::ostream& report) {
    config.validate();
    const fs::path out = require_out(config);

    std::vector<io::ExchangeFrame> frames;
    std::optional<oracle::Scene> scene;
    if (!config.frames.empty()) {
        frames = io::read_exchange_dir(config.frames);
    } else {
        frames = synth_frames(config);
        scene = oracle::make_room_scene(config.seed);
    }
    if (frames.size() < 2) throw UsageError("trajectory is empty: run needs at least two poses");
    if (!config.drift.empty() && config.drift.size() != frames.size())
        throw UsageError("drift lists " + std::to_string(config.drift.size()) + " factors for " +
                         std::to_string(frames.size()) + " frames");

    std::optional<dcm::DcmNetwork> net;
    if (!config.dcm.empty()) net = load_network(config.dcm);

    const FrameRecord initial = make_initial_frame(frames[0].manifest.frame_id, frames[0].manifest.rig(),
                                                   frames[0].color, frames[0].depth);
    std::vector<CameraRig> trajectory;
    for (std::size_t k = 1; k < frames.size(); ++k) trajectory.push_back(frames[k].manifest.rig());

    auto inpaint = [&](int k, const CameraRig&, const ColorImage& raw, const WeightMap& holes) {
        const ColorImage& fill = frames.at(std::size_t(k)).color;
        ColorImage out = raw;
        for (std::size_t p = 0; p < holes.values.size(); ++p)
            if (holes.values[p] >= 0.5)
                for (int ch = 0; ch < 3; ++ch) out.values[3 * p + ch] = fill.values[3 * p + ch];
        return out;
    };
    auto estimate = [&](int k, const CameraRig&, const ColorImage&) {
        return scaled(frames.at(std::size_t(k)).depth, drift_for(config, std::size_t(k)));
    };

    const PipelineResult result = run_pipeline(initial, trajectory, inpaint, estimate, net ? &*net : nullptr);

    RunSummary summary;
    summary.frames = result.reports;
    summary.points = result.map.point_count();

    fs::create_directories(out / "masks");
    std::vector<DepthMap> before, after;
    for (std::size_t k = 0; k < result.frames.size(); ++k) {
        const FrameRecord& f = result.frames[k];
        const double s = result.reports[k].scale;
        const io::GrayImage mask = io::loss_mask_image(f.inpaint_mask);
        io::write_pgm(out / "masks" / ("loss_mask_" + io::frame_dir_name(f.id).substr(6) + ".pgm"), mask);
        const double ignored = double(std::count(mask.values.begin(), mask.values.end(), 0)) / double(mask.values.size());
        summary.ignore_fraction.push_back(ignored);
        before.push_back(scaled(result.estimated_depths[k], s));
        after.push_back(scaled(f.depth, s));

        io::ExchangeFrame ef;
        ef.manifest.frame_id = f.id;
        ef.manifest.intrinsics = f.rig.intrinsics;
        ef.manifest.camera_to_world = f.rig.pose.matrix();
        ef.manifest.provenance = "engine";
        ef.color = f.color;
        ef.raw_color = f.raw_color;
        ef.depth = after.back();
        ef.loss_mask = f.inpaint_mask;
        if (k > 0 && frames[k].flow) ef.flow = frames[k].flow;
        if (k > 0 && frames[k].occlusion) ef.occlusion = frames[k].occlusion;
        io::write_exchange_frame(out / "frames", std::move(ef));
    }
    summary.tv_before = xt_slice_tv(before);
    summary.tv_after = xt_slice_tv(after);

    if (scene && result.frames.size() == std::size_t(kTrainingFrames)) {
        TrainingSequence seq;
        for (std::size_t k = 0; k < result.frames.size(); ++k) {
            seq.rigs.push_back(result.frames[k].rig);
            seq.colors.push_back(result.frames[k].color);
            seq.gt_depths.push_back(frames[k].depth);
        }
        for (std::size_t k = 0; k + 1 < seq.rigs.size(); ++k) {
            seq.backward_flows.push_back(*frames[k + 1].flow);
            seq.occlusion.push_back(*frames[k + 1].occlusion);
            seq.forward_flows.push_back(oracle::ground_truth_flow(*scene, seq.rigs[k + 1], seq.rigs[k]).flow);
        }
        seq.init_depths = before;
        summary.lc_before = dcm::consistency_loss(seq, nullptr, config.alpha).loss;
        seq.init_depths = after;
        summary.lc_after = dcm::consistency_loss(seq, nullptr, config.alpha).loss;
    }

    const io::GaussianSeedCloud seeds = io::make_seed_cloud(result.map, result.frames);
    io::write_ply_seeds(out / "seeds.ply", seeds);

    std::ostringstream lines;
    for (std::size_t k = 0; k < result.reports.size(); ++k) {
        const auto& r = result.reports[k];
        emit(lines, {{"type", "frame"},
                     {"frame_id", r.frame_id},
                     {"scale", r.scale},
                     {"residual", r.residual},
                     {"correspondences", r.correspondences},
                     {"hole_fraction", r.hole_fraction},
                     {"ignore_fraction", summary.ignore_fraction[k]},
                     {"added_points", r.added_points}});
    }
    emit(lines, {{"type", "summary"},
                 {"frames", result.frames.size()},
                 {"points", summary.points},
                 {"lc_before", optional_number(summary.lc_before)},
                 {"lc_after", optional_number(summary.lc_after)},
                 {"tv_before", summary.tv_before},
                 {"tv_after", summary.tv_after},
                 {"dcm", config.dcm}});
    write_text_atomic(out / "report.jsonl", lines.str());
    report << lines.str();
    return summary;
}

// --- DCM training / evaluation ------------------------------------------------------------------

dcm::TrainResult cmd_dcm_train(const RunConfig& config, std::ostream& log) {
    config.validate();
    const fs::path out = require_out(config);
    oracle::TrainingSetOptions opts;
    opts.width = config.train_size;
    opts.height = config.train_size;
    opts.hfov_degrees = config.hfov;
    const auto dataset = oracle::make_training_set(config.seed, config.train_sequences, opts);

    dcm::TrainConfig tc = config.preset == "paper" ? dcm::TrainConfig::paper() : dcm::TrainConfig::desk();
    tc.iterations = config.iterations;
    tc.crop = config.crop;
    tc.seed = config.seed;
    tc.alpha = config.alpha;

    std::ostringstream csv;
    csv << "iteration,total,consistency,depth\n" << std::setprecision(17);
    auto progress = [&](const dcm::TrainLogEntry& e) {
        csv << e.iteration << "," << e.total << "," << e.consistency << "," << e.depth << "\n";
    };
    dcm::TrainResult result = [&] {
        try {
            if (!config.dcm.empty()) return dcm::train_dcm(dataset, tc, load_network(config.dcm), progress);
            return dcm::train_dcm(dataset, tc, progress);
        } catch (const dcm::TrainingDivergedError& e) {
            write_container(out / "dcm_last_good.ckpt", e.last_good().to_container());
            write_text_atomic(out / "loss_curve.csv", csv.str());
            throw;
        }
    }();
    write_container(out / "dcm.ckpt", result.net.to_container());
    write_text_atomic(out / "loss_curve.csv", csv.str());
    emit(log, {{"command", "dcm-train"},
               {"iterations", tc.iterations},
               {"sequences", dataset.size()},
               {"final_total", result.log.empty() ? json(nullptr) : json(result.log.back().total)},
               {"checkpoint", (out / "dcm.ckpt").string()}});
    return result;
}

EvalSummary cmd_dcm_eval(const RunConfig& config, std::ostream& report) {
    config.validate();
    const dcm::DcmNetwork net = load_network(config.dcm);
    oracle::TrainingSetOptions opts;
    opts.width = config.train_size;
    opts.height = config.train_size;
    opts.hfov_degrees = config.hfov;
    const auto dataset = oracle::make_training_set(config.seed, config.eval_sequences, opts);
    EvalSummary s;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto e = dcm::evaluate_dcm(dataset[i], net, config.alpha);
        s.sequences.push_back(e);
        s.lc_before += e.lc_before / double(dataset.size());
        s.lc_after += e.lc_after / double(dataset.size());
        s.tv_before += e.tv_before / double(dataset.size());
        s.tv_after += e.tv_after / double(dataset.size());
        emit(report, {{"type", "sequence"},
                      {"index", i},
                      {"lc_before", e.lc_before},
                      {"lc_after", e.lc_after},
                      {"tv_before", e.tv_before},
                      {"tv_after", e.tv_after}});
    }
    emit(report, {{"type", "summary"},
                  {"lc_before", s.lc_before},
                  {"lc_after", s.lc_after},
                  {"lc_ratio", s.lc_before > 0 ? json(s.lc_after / s.lc_before) : json(nullptr)},
                  {"tv_before", s.tv_before},
                  {"tv_after", s.tv_after},
                  {"tv_ratio", s.tv_before > 0 ? json(s.tv_after / s.tv_before) : json(nullptr)}});
    return s;
}

// --- metrics ------------------------------------------------------------------------------------

double cmd_xt_tv(const fs::path& frames_dir, std::optional<int> row, const std::string& pgm_path, std::ostream& report) {
    const auto frames = io::read_exchange_dir(frames_dir);
    std::vector<DepthMap> depths;
    for (const auto& f : frames) depths.push_back(f.depth);
    const int r = row ? *row : depths.front().height / 2;
    const double tv = xt_slice_tv(depths, r);
    if (!pgm_path.empty()) io::write_pgm(pgm_path, xt_image(xt_slice(depths, r)));
    emit(report, {{"type", "xt_tv"}, {"frames", depths.size()}, {"row", r}, {"tv", tv}});
    return tv;
}

// --- semantic transfer --------------------------------------------------------------------------

void cmd_transfer(const RunConfig& config, std::ostream& report) {
    config.validate();
    using namespace semantic;
    const ToyUNet net(UNetConfig{config.seed});
    const Tensor x_T = random_latent(config.seed);
    const ConditioningVector c = random_conditioning(config.seed);
    const RecordResult rec = denoise_record(net, x_T, c, config.steps);
    rec.bank.validate();

    const Tensor self = denoise_inject(net, x_T, c, rec.bank, config.steps);
    const RecordResult foreign =
        denoise_record(net, random_latent(config.seed + 1), random_conditioning(config.seed + 1), config.steps);
    const Tensor injected = denoise_inject(net, x_T, c, foreign.bank, config.steps);

    auto max_diff = [](const Tensor& a, const Tensor& b) {
        double m = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
        return m;
    };
    if (!config.out.empty()) write_feature_bank(require_out(config) / "bank.ftb1", rec.bank);
    emit(report, {{"type", "transfer"},
                  {"steps", config.steps},
                  {"layers", rec.bank.layers},
                  {"self_injection_max_diff", max_diff(self, rec.x0)},
                  {"foreign_injection_max_diff", max_diff(injected, rec.x0)}});
}

void cmd_bank_check(const fs::path& bank_path, std::ostream& report) {
    const semantic::FeatureBank bank = semantic::read_feature_bank(bank_path);
    bank.validate();
    emit(report, {{"type", "bank"}, {"steps", bank.steps.size()}, {"layers", bank.layers}, {"valid", true}});
}

}  // namespace pw::cli
