#include <ostream>

#include <CLI11.hpp>

#include "pw/cli.hpp"

namespace pw::cli {

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> preset;
    std::string out;
    std::string dcm;
    std::string frames;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration");
    cmd->add_option("--seed", f.seed, "scene / dataset / network seed");
    cmd->add_option("--preset", f.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--dcm", f.dcm, "DCM checkpoint");
    cmd->add_option("--frames", f.frames, "frame-exchange directory");
}

RunConfig resolve(const CommonFlags& f) {
    RunConfig c = load_run_config(f.config, f.preset);
    if (f.seed) c.seed = *f.seed;
    if (!f.out.empty()) c.out = f.out;
    if (!f.dcm.empty()) c.dcm = f.dcm;
    if (!f.frames.empty()) c.frames = f.frames;
    return c;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Point-cloud world engine: synthesis, pipeline, depth consistency and attention transfer"};
    app.require_subcommand(1);

    CommonFlags synth_f, run_f, train_f, eval_f, transfer_f;
    auto* synth = app.add_subcommand("synth", "render an oracle trajectory into a frame-exchange directory");
    add_common(synth, synth_f);
    auto* run = app.add_subcommand("run", "run the lift/reproject/inpaint/align/fuse pipeline");
    add_common(run, run_f);
    auto* train = app.add_subcommand("dcm-train", "train the depth consistency network");
    add_common(train, train_f);
    auto* eval = app.add_subcommand("dcm-eval", "L_C and x-t TV before/after the depth consistency network");
    add_common(eval, eval_f);
    auto* transfer = app.add_subcommand("transfer", "record and inject attention maps in the toy UNet");
    add_common(transfer, transfer_f);

    std::string xt_frames, xt_pgm;
    std::optional<int> xt_row;
    auto* xt = app.add_subcommand("xt-tv", "x-t slice total variation of a frame-exchange directory");
    xt->add_option("--frames", xt_frames, "frame-exchange directory")->required();
    xt->add_option("--row", xt_row, "image row (default H/2)");
    xt->add_option("--pgm", xt_pgm, "write the x-t slice as PGM");

    std::string bank_path;
    auto* bank = app.add_subcommand("bank-check", "validate an FTB1 feature bank");
    bank->add_option("bank", bank_path, "FTB1 file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*synth) cmd_synth(resolve(synth_f), out);
        else if (*run) cmd_run(resolve(run_f), out);
        else if (*train) cmd_dcm_train(resolve(train_f), out);
        else if (*eval) cmd_dcm_eval(resolve(eval_f), out);
        else if (*transfer) cmd_transfer(resolve(transfer_f), out);
        else if (*xt) cmd_xt_tv(xt_frames, xt_row, xt_pgm, out);
        else if (*bank) cmd_bank_check(bank_path, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}

}  // namespace pw::cli
