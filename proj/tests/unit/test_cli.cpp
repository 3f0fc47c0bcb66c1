#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "pw/cli.hpp"
#include "pw/metrics.hpp"

using namespace pw;
using namespace pw::cli;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code = -1;
    std::string out, err;
};

CliRun invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "pw_cli");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(int(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string write_config(const fs::path& dir, const nlohmann::json& j) {
    const auto p = dir / "config.json";
    std::ofstream(p) << j.dump();
    return p.string();
}

std::vector<nlohmann::json> records(const std::string& text) {
    std::vector<nlohmann::json> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

std::size_t count_entries(const fs::path& dir, const std::string& name) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.path().filename() == name ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("synth: manifest and flow counts, byte-identical reruns") {
    const auto dir = test::temp_dir("cli_synth");
    const auto cfg = write_config(dir, {{"width", 32}, {"height", 24}});
    REQUIRE(invoke({"synth", "--config", cfg, "--seed", "4", "--out", (dir / "a").string()}).code == kExitOk);
    CHECK(count_entries(dir / "a", "manifest.json") == 7);
    CHECK(count_entries(dir / "a", "flow.flo2") == 6);
    REQUIRE(invoke({"synth", "--config", cfg, "--seed", "4", "--out", (dir / "b").string()}).code == kExitOk);
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir / "a");
        CHECK_MESSAGE(slurp(e.path()) == slurp(dir / "b" / rel), rel.string());
    }
    const auto one = write_config(dir, {{"width", 32}, {"height", 24}, {"poses", 1}});
    REQUIRE(invoke({"synth", "--config", one, "--out", (dir / "c").string()}).code == kExitOk);
    CHECK(count_entries(dir / "c", "manifest.json") == 1);
}

TEST_CASE("run: unit scales, planted drift, masks, exit codes") {
    const auto dir = test::temp_dir("cli_run");
    const std::vector<double> drift{1.0, 1.2, 0.9, 1.1, 0.8, 1.25, 1.05};
    const auto cfg = write_config(dir, {{"width", 48}, {"height", 48}, {"drift", drift}});
    const auto r = invoke({"run", "--config", cfg, "--seed", "2", "--out", (dir / "drift").string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const auto recs = records(r.out);
    REQUIRE(recs.size() == 8);
    for (std::size_t k = 1; k < 7; ++k) {
        CHECK(std::abs(recs[k]["scale"].get<double>() * drift[k] - 1.0) < 1e-2);
        CHECK(recs[k]["ignore_fraction"].get<double>() == recs[k]["hole_fraction"].get<double>());
    }
    CHECK(fs::exists(dir / "drift" / "seeds.ply"));
    CHECK(fs::exists(dir / "drift" / "masks" / "loss_mask_0006.pgm"));
    CHECK(slurp(dir / "drift" / "report.jsonl") == r.out);
    CHECK_FALSE(fs::exists(dir / "drift" / "seeds.ply.tmp"));

    const auto plain = write_config(dir, {{"width", 48}, {"height", 48}});
    RunConfig rc = load_run_config(plain, std::nullopt);
    rc.out = (dir / "plain").string();
    std::ostringstream log;
    const RunSummary s = cmd_run(rc, log);
    for (std::size_t k = 1; k < s.frames.size(); ++k) CHECK(std::abs(s.frames[k].scale - 1.0) <= 1e-6);
    REQUIRE(s.lc_before.has_value());
    CHECK(*s.lc_before == *s.lc_after);  // no DCM: aligned depths are the estimates
    std::ostringstream again;
    cmd_run(rc, again);
    CHECK(again.str() == log.str());

    const auto empty = write_config(dir, {{"poses", 0}});
    CHECK(invoke({"run", "--config", empty, "--out", (dir / "e").string()}).code == kExitUsage);
    const auto single = write_config(dir, {{"poses", 1}, {"width", 16}, {"height", 16}});
    CHECK(invoke({"run", "--config", single, "--out", (dir / "s").string()}).code == kExitUsage);
    const auto bad_drift = write_config(dir, {{"width", 16}, {"height", 16}, {"drift", {1.0, 2.0}}});
    CHECK(invoke({"run", "--config", bad_drift, "--out", (dir / "d").string()}).code == kExitUsage);
    CHECK(invoke({"run", "--out", (dir / "m").string(), "--frames", (dir / "missing").string()}).code == kExitData);
    CHECK(invoke({"run", "--bogus"}).code == kExitUsage);
    CHECK(invoke({}).code == kExitUsage);
}

TEST_CASE("run consumes a synth directory unchanged") {
    const auto dir = test::temp_dir("cli_protocol");
    const auto cfg = write_config(dir, {{"width", 32}, {"height", 32}, {"poses", 4}});
    REQUIRE(invoke({"synth", "--config", cfg, "--out", (dir / "frames").string()}).code == kExitOk);
    const auto r = invoke({"run", "--frames", (dir / "frames").string(), "--out", (dir / "out").string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const auto recs = records(r.out);
    for (std::size_t k = 1; k < 4; ++k) CHECK(std::abs(recs[k]["scale"].get<double>() - 1.0) <= 1e-6);
    CHECK(recs.back()["lc_before"].is_null());
    // the engine's own frame directory is itself a valid exchange directory
    const auto x = invoke({"xt-tv", "--frames", (dir / "out" / "frames").string()});
    CHECK(x.code == kExitOk);
}

TEST_CASE("xt-tv: closed form for one scaled frame on constant depth") {
    const auto dir = test::temp_dir("cli_xt");
    const int T = 5;
    const double d = 2.0, eps = 0.1;
    for (int k = 0; k < T; ++k) {
        io::ExchangeFrame f;
        f.manifest.frame_id = k;
        f.manifest.intrinsics = make_intrinsics(8, 8, 60.0);
        f.color = ColorImage(8, 8, 0.5);
        f.depth = DepthMap(8, 8, k == 2 ? d * (1.0 + eps) : d, true);
        io::write_exchange_frame(dir / "frames", f);
    }
    const auto r = invoke({"xt-tv", "--frames", (dir / "frames").string(), "--pgm", (dir / "xt.pgm").string()});
    REQUIRE(r.code == kExitOk);
    const double tv = records(r.out)[0]["tv"].get<double>();
    // the frames are stored as float32
    CHECK(tv == doctest::Approx(2.0 * eps * d / (T - 1)).epsilon(1e-6));
    CHECK(fs::exists(dir / "xt.pgm"));
    std::vector<DepthMap> same(3, DepthMap(4, 4, 1.5, true));
    CHECK(xt_slice_tv(same) == 0.0);
    CHECK(invoke({"xt-tv"}).code == kExitUsage);
}

TEST_CASE("dcm-train / dcm-eval: zero iterations, zero network, version mismatch") {
    const auto dir = test::temp_dir("cli_dcm");
    const auto cfg = write_config(dir, {{"train_sequences", 2}, {"eval_sequences", 2}, {"train_size", 32},
                                        {"crop", 16}, {"iterations", 0}});
    const auto t = invoke({"dcm-train", "--config", cfg, "--seed", "3", "--out", (dir / "t").string()});
    REQUIRE_MESSAGE(t.code == kExitOk, t.err);
    RunConfig rc = load_run_config(cfg, std::nullopt);
    const auto init = dcm::TrainConfig::desk().network;
    CHECK(slurp(dir / "t" / "dcm.ckpt") ==
          [&] {
              const auto b = encode_container(dcm::DcmNetwork(init).to_container());
              return std::string(b.begin(), b.end());
          }());
    CHECK(slurp(dir / "t" / "loss_curve.csv") == "iteration,total,consistency,depth\n");

    std::ostringstream log;
    rc.seed = 7;
    const EvalSummary zero = cmd_dcm_eval(rc, log);
    CHECK(zero.lc_before == zero.lc_after);
    CHECK(zero.tv_before == zero.tv_after);
    CHECK(zero.sequences.size() == 2);
    const auto e = invoke({"dcm-eval", "--config", cfg, "--dcm", (dir / "t" / "dcm.ckpt").string()});
    CHECK(e.code == kExitOk);

    std::ofstream(dir / "bad.ckpt", std::ios::binary) << "DCM9";
    CHECK(invoke({"dcm-eval", "--config", cfg, "--dcm", (dir / "bad.ckpt").string()}).code == kExitData);
}

TEST_CASE("transfer and bank-check") {
    const auto dir = test::temp_dir("cli_transfer");
    const auto cfg = write_config(dir, {{"steps", 4}});
    const auto r = invoke({"transfer", "--config", cfg, "--seed", "5", "--out", dir.string()});
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    const auto rec = records(r.out)[0];
    CHECK(rec["self_injection_max_diff"].get<double>() <= 1e-6);
    CHECK(rec["foreign_injection_max_diff"].get<double>() > 0.0);
    CHECK(invoke({"bank-check", (dir / "bank.ftb1").string()}).code == kExitOk);
    std::ofstream(dir / "junk.ftb1", std::ios::binary) << "FTB1garbage";
    CHECK(invoke({"bank-check", (dir / "junk.ftb1").string()}).code == kExitData);
}

TEST_CASE("config: presets, overrides, unknown keys") {
    CHECK(RunConfig::for_preset("paper").iterations == 20000);
    CHECK(RunConfig::for_preset("desk").iterations == 500);
    CHECK_THROWS_AS(RunConfig::for_preset("huge"), UsageError);
    const RunConfig c = merge_config_json(RunConfig{}, R"({"poses": 3, "step": [0.1, 0, 0]})");
    CHECK(c.poses == 3);
    CHECK(c.step[0] == 0.1);
    try {
        merge_config_json(RunConfig{}, R"({"posez": 3})");
        FAIL("unknown key accepted");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("posez") != std::string::npos);
    }
    CHECK_THROWS_AS(merge_config_json(RunConfig{}, R"({"poses": "three"})"), UsageError);
    const auto dir = test::temp_dir("cli_cfg");
    const auto bad = write_config(dir, {{"resolution", 64}});
    const auto r = invoke({"synth", "--config", bad, "--out", dir.string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("resolution") != std::string::npos);
    RunConfig odd;
    odd.width = 30;
    CHECK_THROWS_AS(odd.validate(), UsageError);
    CHECK(load_run_config("", std::string("paper")).width == 384);
}
