#include "ovqe/commands.hpp"

#include "ovqe/checkpoint.hpp"
#include "ovqe/errors.hpp"
#include "ovqe/metrics.hpp"
#include "ovqe/report.hpp"
#include "ovqe/training.hpp"
#include "ovqe/yuv_io.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>

namespace ovqe {
namespace fs = std::filesystem;

namespace {

Sequence load_sequence(const SequenceConfig& sc) {
    const std::optional<size_t> max_frames =
        sc.frame_count > 0 ? std::optional<size_t>(sc.frame_count) : std::nullopt;
    return read_yuv420(sc.path, sc.width, sc.height, sc.bit_depth, max_frames, sc.frame_rate);
}

std::string sequence_stem(const RunConfig& cfg) {
    return cfg.sequence.path.stem().string();
}

fs::path pair_dir(const RunConfig& cfg, int qp) {
    return cfg.out_dir / (sequence_stem(cfg) + "_qp" + std::to_string(qp));
}

Net32 load_net(const RunConfig& cfg) {
    Net32 net(cfg.model);
    load_checkpoint(cfg.weights, net);
    return net;
}

std::vector<double> frame_axis(size_t n) {
    std::vector<double> x(n);
    for (size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
    return x;
}

void print_summary(const char* verb, const DeltaPsnrReport& rep) {
    std::printf("%s: mean luma PSNR baseline %.4f dB, enhanced %.4f dB, delta %+.4f dB\n", verb,
                rep.baseline.average, rep.enhanced.average, rep.average_delta);
}

} // namespace

void run_enhance(const RunConfig& cfg) {
    validate_for(cfg, Verb::Enhance);
    const Sequence decoded = load_sequence(cfg.sequence);
    Net32 net = load_net(cfg);

    const fs::path dir = cfg.out_dir / sequence_stem(cfg);
    fs::create_directories(dir);

    const Sequence enhanced = net.enhance_sequence(decoded);
    const fs::path out_yuv = dir / "enhanced.yuv";
    write_yuv420(enhanced, out_yuv);
    std::printf("enhance: %zu frames %dx%d (%d-bit) -> %s\n", enhanced.frame_count(),
                enhanced.width, enhanced.height, enhanced.bit_depth, out_yuv.string().c_str());

    if (!cfg.reference.empty()) {
        const Sequence reference =
            read_yuv420(cfg.reference, cfg.sequence.width, cfg.sequence.height,
                        cfg.sequence.bit_depth, enhanced.frame_count(), cfg.sequence.frame_rate);
        const DeltaPsnrReport rep = delta_psnr(enhanced, decoded, reference);
        write_psnr_csv(dir / "psnr.csv", rep);
        print_summary("enhance", rep);
    }
}

void run_train(const RunConfig& cfg) {
    validate_for(cfg, Verb::Train);
    const Sequence raw = load_sequence(cfg.sequence);
    fs::create_directories(cfg.out_dir);

    std::printf("train: encoding %zu frames with %s codec at QP %d\n", raw.frame_count(),
                cfg.codec.kind == CodecKind::Mock ? "mock" : "external", cfg.codec.qp);
    const CodecResult coded = encode_decode(raw, cfg.codec, cfg.out_dir);

    const auto samples =
        make_patches<float>(raw, coded.decoded, cfg.train.patch_size, cfg.train.stride,
                            cfg.model.temporal_radius, cfg.train.seed);
    std::printf("train: %zu patch samples (%dx%d, stride %d), %d steps, batch %d\n",
                samples.size(), cfg.train.patch_size, cfg.train.patch_size, cfg.train.stride,
                cfg.train.steps, cfg.train.batch_size);

    Net32 net(cfg.model);
    std::function<void(int)> checkpoint_cb;
    if (cfg.train.checkpoint_interval > 0)
        checkpoint_cb = [&](int step) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint_step%06d.ovqe", step);
            save_checkpoint(cfg.out_dir / name, net.config(), net.params());
        };
    const TrainResult result = train(net, samples, cfg.train, checkpoint_cb);

    if (cfg.weights.has_parent_path()) fs::create_directories(cfg.weights.parent_path());
    save_checkpoint(cfg.weights, net.config(), net.params());
    write_loss_csv(cfg.out_dir / "loss.csv", result.loss_trace);

    if (!result.loss_trace.empty())
        std::printf("train: loss %.6f -> %.6f over %zu steps\n",
                    result.loss_trace.front().second, result.loss_trace.back().second,
                    result.loss_trace.size());
    std::printf("train: weights -> %s\n", cfg.weights.string().c_str());
}

void run_evaluate(const RunConfig& cfg) {
    validate_for(cfg, Verb::Evaluate);
    const Sequence raw = load_sequence(cfg.sequence);
    Net32 net = load_net(cfg);

    const fs::path dir = pair_dir(cfg, cfg.codec.qp);
    fs::create_directories(dir);

    const CodecResult coded = encode_decode(raw, cfg.codec, dir);
    const Sequence enhanced = net.enhance_sequence(coded.decoded);
    const DeltaPsnrReport rep = delta_psnr(enhanced, coded.decoded, raw);

    write_yuv420(coded.decoded, dir / "decoded.yuv");
    write_yuv420(enhanced, dir / "enhanced.yuv");
    write_psnr_csv(dir / "psnr.csv", rep);

    const auto frames = frame_axis(rep.per_frame_delta.size());
    write_line_plot_svg(dir / "psnr_curves.svg",
                        sequence_stem(cfg) + " QP " + std::to_string(cfg.codec.qp),
                        "frame", "luma PSNR (dB)",
                        {{"baseline", frames, rep.baseline.per_frame},
                         {"enhanced", frames, rep.enhanced.per_frame}});

    std::printf("evaluate: QP %d, %.2f kbps, artifacts in %s\n", cfg.codec.qp,
                coded.bitrate_kbps, dir.string().c_str());
    print_summary("evaluate", rep);
}

void run_bdrate(const RunConfig& cfg) {
    validate_for(cfg, Verb::Bdrate);
    const Sequence raw = load_sequence(cfg.sequence);

    std::optional<Net32> net;
    if (!cfg.weights.empty()) net.emplace(load_net(cfg));

    // Sweep from high QP to low so both measured curves come out in
    // ascending-bitrate order, as the BD fit expects.
    std::vector<int> qps = cfg.qps;
    std::sort(qps.begin(), qps.end(), std::greater<int>());

    fs::create_directories(cfg.out_dir);
    const RDSweepResult sweep =
        rd_sweep(raw, qps, cfg.codec, cfg.out_dir, net ? &*net : nullptr);

    const std::string stem = sequence_stem(cfg);
    for (size_t i = 0; i < qps.size(); ++i) {
        const fs::path dir = pair_dir(cfg, qps[i]);
        fs::create_directories(dir);
        write_psnr_csv(dir / "psnr.csv",
                       pair_reports(sweep.baseline_reports[i], sweep.enhanced_reports[i]));
        std::printf("bdrate: QP %2d  %9.2f kbps  baseline %.4f dB  enhanced %.4f dB\n", qps[i],
                    sweep.baseline[i].bitrate_kbps, sweep.baseline[i].psnr_db,
                    sweep.enhanced[i].psnr_db);
    }

    const double bd = bd_rate(sweep.baseline, sweep.enhanced);
    write_bdrate_csv(cfg.out_dir / (stem + "_bdrate.csv"),
                     {{stem, "baseline", net ? "enhanced" : "baseline", bd}});
    write_rd_csv(cfg.out_dir / (stem + "_rd.csv"), qps, sweep.baseline, sweep.enhanced);

    auto rates = [](const std::vector<RDPoint>& pts) {
        std::vector<double> r;
        for (const auto& p : pts) r.push_back(p.bitrate_kbps);
        return r;
    };
    auto quals = [](const std::vector<RDPoint>& pts) {
        std::vector<double> q;
        for (const auto& p : pts) q.push_back(p.psnr_db);
        return q;
    };
    write_line_plot_svg(cfg.out_dir / (stem + "_rd.svg"), stem + " rate-distortion",
                        "bitrate (kbps)", "luma PSNR (dB)",
                        {{"baseline", rates(sweep.baseline), quals(sweep.baseline)},
                         {"enhanced", rates(sweep.enhanced), quals(sweep.enhanced)}});

    std::printf("bdrate: %s enhanced vs baseline = %+.4f %%\n", stem.c_str(), bd);
}

} // namespace ovqe
