#include "ovqe/training.hpp"

#include "ovqe/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace ovqe {

double charbonnier_loss(std::span<const double> pred, std::span<const double> target, double eps) {
    if (pred.size() != target.size())
        throw ArgumentError("charbonnier: pred and target sizes differ");
    if (pred.empty()) throw ArgumentError("charbonnier: empty input");
    if (!(eps > 0.0)) throw ArgumentError("charbonnier: eps must be positive");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += std::sqrt(d * d + eps);
    }
    return acc / static_cast<double>(pred.size());
}

std::vector<double> charbonnier_grad(std::span<const double> pred,
                                     std::span<const double> target, double eps) {
    if (pred.size() != target.size())
        throw ArgumentError("charbonnier: pred and target sizes differ");
    if (pred.empty()) throw ArgumentError("charbonnier: empty input");
    if (!(eps > 0.0)) throw ArgumentError("charbonnier: eps must be positive");
    const double m = static_cast<double>(pred.size());
    std::vector<double> g(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        g[i] = d / (m * std::sqrt(d * d + eps));
    }
    return g;
}

template <typename T>
std::vector<TrainingSampleT<T>> make_patches(const Sequence& raw, const Sequence& decoded,
                                             int patch_size, int stride, int temporal_radius,
                                             uint64_t seed) {
    raw.validate();
    decoded.validate();
    if (raw.frame_count() != decoded.frame_count() || raw.width != decoded.width ||
        raw.height != decoded.height || raw.bit_depth != decoded.bit_depth)
        throw ArgumentError("patches: raw and decoded sequences are not a matched pair");
    if (patch_size <= 0 || patch_size > raw.width || patch_size > raw.height)
        throw ArgumentError("patches: patch size " + std::to_string(patch_size) +
                            " does not fit " + std::to_string(raw.width) + "x" +
                            std::to_string(raw.height) + " frames");
    if (stride <= 0) throw ArgumentError("patches: stride must be positive");
    if (temporal_radius < 0) throw ArgumentError("patches: temporal radius must be >= 0");

    const T peak = static_cast<T>((1 << raw.bit_depth) - 1);
    const int n = static_cast<int>(raw.frame_count());
    auto crop = [&](const Plane& plane, int row, int col) {
        TensorT<T> t({1, patch_size, patch_size});
        for (int r = 0; r < patch_size; ++r)
            for (int c = 0; c < patch_size; ++c)
                t.at(0, r, c) = static_cast<T>(plane.at(row + r, col + c)) / peak;
        return t;
    };

    std::vector<TrainingSampleT<T>> samples;
    for (int t = 0; t < n; ++t)
        for (int row = 0; row + patch_size <= raw.height; row += stride)
            for (int col = 0; col + patch_size <= raw.width; col += stride) {
                TrainingSampleT<T> s;
                s.frame = t;
                s.row = row;
                s.col = col;
                s.target = crop(raw.frames[static_cast<size_t>(t)].y, row, col);
                for (int j = t - temporal_radius; j <= t + temporal_radius; ++j)
                    s.window.push_back(
                        crop(decoded.frames[static_cast<size_t>(std::clamp(j, 0, n - 1))].y, row,
                             col));
                samples.push_back(std::move(s));
            }

    std::mt19937_64 rng(seed);
    std::shuffle(samples.begin(), samples.end(), rng);
    return samples;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ArgumentError("train config: learning rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ArgumentError("train config: moment decays must lie in [0,1)");
    if (!(adam_eps > 0.0)) throw ArgumentError("train config: optimizer eps must be positive");
    if (steps < 0) throw ArgumentError("train config: steps must be >= 0");
    if (batch_size <= 0) throw ArgumentError("train config: batch size must be positive");
    if (patch_size <= 0 || patch_size % 4 != 0)
        throw ArgumentError("train config: patch size must be a positive multiple of 4");
    if (stride <= 0) throw ArgumentError("train config: stride must be positive");
    if (!(eps_loss > 0.0)) throw ArgumentError("train config: Charbonnier eps must be positive");
    if (checkpoint_interval < 0)
        throw ArgumentError("train config: checkpoint interval must be >= 0");
}

template <typename T>
TrainResult train(Net<T>& net, const std::vector<TrainingSampleT<T>>& samples,
                  const TrainConfig& cfg, const std::function<void(int step)>& checkpoint_cb) {
    cfg.validate();
    if (samples.empty()) throw ArgumentError("train: no samples");
    const size_t window_len = static_cast<size_t>(2 * net.config().temporal_radius + 1);
    for (const auto& s : samples)
        if (s.window.size() != window_len)
            throw ArgumentError("train: sample window length " + std::to_string(s.window.size()) +
                                " does not match the model's temporal radius");

    auto& store = net.params();
    store.zero_grads();
    std::vector<TensorT<T>> m, v;
    m.reserve(store.entries.size());
    v.reserve(store.entries.size());
    for (const auto& e : store.entries) {
        m.emplace_back(TensorT<T>(e.value.shape));
        v.emplace_back(TensorT<T>(e.value.shape));
    }

    std::mt19937_64 order_rng(cfg.seed);
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    size_t cursor = 0;

    TrainResult result;
    result.loss_trace.reserve(static_cast<size_t>(cfg.steps));

    for (int step = 1; step <= cfg.steps; ++step) {
        double batch_loss = 0.0;
        std::vector<size_t> batch;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) { // new epoch
                std::shuffle(order.begin(), order.end(), order_rng);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }

        for (const size_t idx : batch) {
            const auto& sample = samples[idx];
            Graph<T> g(true);
            std::vector<Var<T>> frames;
            frames.reserve(window_len);
            for (const auto& w : sample.window) frames.push_back(g.value(w));
            Var<T> out = net.enhance_window(g, frames);
            Var<T> loss = g.charbonnier(out, g.value(sample.target), static_cast<T>(cfg.eps_loss));
            batch_loss += static_cast<double>(loss.val().data[0]);
            g.backward(loss);
        }
        batch_loss /= static_cast<double>(cfg.batch_size);

        if (!std::isfinite(batch_loss)) {
            std::string ids;
            for (const size_t idx : batch) ids += (ids.empty() ? "" : ",") + std::to_string(idx);
            throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                               " (batch samples " + ids + ")");
        }
        result.loss_trace.emplace_back(step, batch_loss);

        // Adam update; gradients in the sinks hold the batch sum.
        const double t = static_cast<double>(step);
        const double corr1 = 1.0 - std::pow(cfg.beta1, t);
        const double corr2 = 1.0 - std::pow(cfg.beta2, t);
        for (size_t p = 0; p < store.entries.size(); ++p) {
            auto& e = store.entries[p];
            for (size_t i = 0; i < e.value.numel(); ++i) {
                const double grad =
                    static_cast<double>(e.grad.data[i]) / static_cast<double>(cfg.batch_size);
                const double mi = cfg.beta1 * static_cast<double>(m[p].data[i]) +
                                  (1.0 - cfg.beta1) * grad;
                const double vi = cfg.beta2 * static_cast<double>(v[p].data[i]) +
                                  (1.0 - cfg.beta2) * grad * grad;
                m[p].data[i] = static_cast<T>(mi);
                v[p].data[i] = static_cast<T>(vi);
                e.value.data[i] -= static_cast<T>(cfg.learning_rate * (mi / corr1) /
                                                  (std::sqrt(vi / corr2) + cfg.adam_eps));
            }
        }
        store.zero_grads();

        if (checkpoint_cb && cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0)
            checkpoint_cb(step);
    }
    return result;
}

template std::vector<TrainingSampleT<float>> make_patches(const Sequence&, const Sequence&, int,
                                                          int, int, uint64_t);
template std::vector<TrainingSampleT<double>> make_patches(const Sequence&, const Sequence&, int,
                                                           int, int, uint64_t);
template TrainResult train(Net<float>&, const std::vector<TrainingSampleT<float>>&,
                           const TrainConfig&, const std::function<void(int)>&);
template TrainResult train(Net<double>&, const std::vector<TrainingSampleT<double>>&,
                           const TrainConfig&, const std::function<void(int)>&);

} // namespace ovqe
