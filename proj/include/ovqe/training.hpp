#pragma once

#include "ovqe/frame.hpp"
#include "ovqe/net.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace ovqe {

// Mean over all elements of sqrt((pred-target)^2 + eps).
double charbonnier_loss(std::span<const double> pred, std::span<const double> target, double eps);

// Analytic d(loss)/d(pred): (pred_k - target_k) / (M * sqrt(d^2 + eps)).
std::vector<double> charbonnier_grad(std::span<const double> pred,
                                     std::span<const double> target, double eps);

// One co-located raw/decoded patch pair plus its temporal input window,
// all normalized to [0,1].
template <typename T>
struct TrainingSampleT {
    TensorT<T> target;              // {1,P,P} raw crop
    std::vector<TensorT<T>> window; // 2R+1 x {1,P,P} decoded crops
    int frame = 0;                  // source frame index of the center crop
    int row = 0, col = 0;           // top-left corner in the frame
};

using TrainingSample = TrainingSampleT<float>;

// Cuts co-located P x P crops on a stride-S grid from every frame, builds
// the 2R+1 temporal window with replicate padding at the sequence ends,
// and returns the samples in a seed-shuffled order.
template <typename T>
std::vector<TrainingSampleT<T>> make_patches(const Sequence& raw, const Sequence& decoded,
                                             int patch_size, int stride, int temporal_radius,
                                             uint64_t seed);

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int steps = 1000;
    int batch_size = 8;
    int patch_size = 32;
    int stride = 32;
    double eps_loss = 1e-6; // Charbonnier epsilon
    uint64_t seed = 1;
    int checkpoint_interval = 0; // 0 disables interval checkpoints

    void validate() const;
};

struct TrainResult {
    // One (step, batch loss) row per optimization step, steps 1-based.
    std::vector<std::pair<int, double>> loss_trace;
};

// Mini-batch Adam on the Charbonnier objective over enhance-forward outputs.
// Deterministic for a fixed seed: sample order comes from seeded epoch
// shuffles and gradients accumulate in sample order on one thread.
// checkpoint_cb (when set) fires every checkpoint_interval steps.
template <typename T>
TrainResult train(Net<T>& net, const std::vector<TrainingSampleT<T>>& samples,
                  const TrainConfig& cfg,
                  const std::function<void(int step)>& checkpoint_cb = nullptr);

} // namespace ovqe
