#include "ovqe/commands.hpp"
#include "ovqe/errors.hpp"
#include "ovqe/runconfig.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

namespace {

int dispatch(ovqe::Verb verb, const std::string& config_path, const std::string& out_override,
             long long seed_override, bool keep_temp) {
    using namespace ovqe;
    try {
        RunConfig cfg = parse_run_config(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (seed_override >= 0) {
            cfg.model.seed = static_cast<uint64_t>(seed_override);
            cfg.train.seed = static_cast<uint64_t>(seed_override);
        }
        if (keep_temp) cfg.codec.keep_temp = true;

        switch (verb) {
            case Verb::Enhance: run_enhance(cfg); break;
            case Verb::Train: run_train(cfg); break;
            case Verb::Evaluate: run_evaluate(cfg); break;
            case Verb::Bdrate: run_bdrate(cfg); break;
        }
        return 0;
    } catch (const CodecError& e) {
        std::fprintf(stderr, "ovqe: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "ovqe: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        // ArgumentError / FormatError / IoError and anything unexpected all
        // count as validation failures.
        std::fprintf(stderr, "ovqe: %s\n", e.what());
        return 2;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ovqe - VVC-decode quality enhancement toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_override;
    long long seed_override = -1;
    bool keep_temp = false;

    app.add_option("--config", config_path, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_override, "override [paths] out_dir");
    app.add_option("--seed", seed_override, "override model and training seeds (>= 0)");
    app.add_flag("--keep-temp", keep_temp, "keep intermediate codec files");

    app.add_subcommand("enhance", "enhance a decoded sequence with trained weights");
    app.add_subcommand("train", "train weights on a raw sequence via the codec bridge");
    app.add_subcommand("evaluate", "encode, enhance, and report per-frame PSNR at one QP");
    app.add_subcommand("bdrate", "sweep the QP list and report BD-rate of enhanced vs baseline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    ovqe::Verb verb = ovqe::Verb::Enhance;
    if (app.got_subcommand("train")) verb = ovqe::Verb::Train;
    else if (app.got_subcommand("evaluate")) verb = ovqe::Verb::Evaluate;
    else if (app.got_subcommand("bdrate")) verb = ovqe::Verb::Bdrate;

    return dispatch(verb, config_path, out_override, seed_override, keep_temp);
}
