#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pw/dcm/train.hpp"
#include "pw/interop_io.hpp"
#include "pw/point_cloud_map.hpp"
#include "pw/synth_oracle.hpp"

namespace pw::cli {

/// Stable exit codes.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitNumeric = 4 };

/// Raised for invalid configuration or missing arguments (exit code 2).
class UsageError : public Error {
public:
    using Error::Error;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string preset = "desk";
    // Scene and trajectory.
    int poses = 7;
    std::array<double, 3> step{0.05, 0.0, 0.0};  // metres per pose
    double yaw_step = 2.0;                       // degrees per pose
    int width = 64;
    int height = 64;
    double hfov = 60.0;
    double alpha = kDefaultOcclusionAlpha;
    std::vector<double> drift;  // per-pose multiplier on the depth estimate; empty = none
    // Paths.
    std::string dcm;
    std::string out;
    std::string frames;
    // Training / evaluation.
    int train_sequences = 20;
    int train_size = 80;
    int iterations = 500;
    int crop = 64;
    int eval_sequences = 6;
    // Semantic transfer.
    int steps = 10;

    /// Resolution a multiple of 4, at least one pose, positive sizes; throws UsageError.
    void validate() const;
    static RunConfig for_preset(const std::string& preset);
};

/// Preset values, then the JSON file's keys. Unknown keys are rejected by name.
RunConfig load_run_config(const std::filesystem::path& path, const std::optional<std::string>& preset_override);
/// Applies the JSON object's keys on top of `base`.
RunConfig merge_config_json(RunConfig base, const std::string& json_text);

/// Oracle render of the configured trajectory as exchange frames (provenance "oracle"). Frame k > 0
/// carries the backward flow into frame k - 1 and its visibility.
std::vector<io::ExchangeFrame> synth_frames(const RunConfig& config);

/// Renders the trajectory and writes it to config.out.
void cmd_synth(const RunConfig& config, std::ostream& log);

struct RunSummary {
    std::vector<PipelineFrameReport> frames;
    std::vector<double> ignore_fraction;  // of each written loss mask
    std::optional<double> lc_before, lc_after;
    double tv_before = 0.0;
    double tv_after = 0.0;
    std::size_t points = 0;
};

/// Pipeline over config.frames (an exchange directory) or, when empty, over an in-memory oracle
/// render of the configured trajectory. Writes seeds.ply, masks/, frames/ and report.jsonl to
/// config.out; report records also go to `report`.
RunSummary cmd_run(const RunConfig& config, std::ostream& report);

/// Trains on make_training_set(seed, train_sequences); writes dcm.ckpt and loss_curve.csv.
dcm::TrainResult cmd_dcm_train(const RunConfig& config, std::ostream& log);

struct EvalSummary {
    std::vector<dcm::DcmEvaluation> sequences;
    double lc_before = 0.0;  // means over sequences
    double lc_after = 0.0;
    double tv_before = 0.0;
    double tv_after = 0.0;
};

/// Evaluates config.dcm (zero network when empty) on make_training_set(seed, eval_sequences).
EvalSummary cmd_dcm_eval(const RunConfig& config, std::ostream& report);

/// x-t slice TV of the depths of an exchange directory. Optionally writes the slice as a PGM.
double cmd_xt_tv(const std::filesystem::path& frames, std::optional<int> row, const std::string& pgm_path,
                 std::ostream& report);

/// Records a bank with seed, re-injects it into itself and into a foreign run; writes bank.ftb1.
void cmd_transfer(const RunConfig& config, std::ostream& report);

/// Validates an FTB1 file; throws on any violation.
void cmd_bank_check(const std::filesystem::path& bank, std::ostream& report);

/// Entry point of the command-line tool. Maps exceptions to exit codes.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace pw::cli
