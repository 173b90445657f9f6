#pragma once

#include "ovqe/frame.hpp"
#include "ovqe/graph.hpp"
#include "ovqe/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ovqe {

// Fixed Gaussian band split: low = blur(sigma_large), mid = blur(sigma_small)
// - blur(sigma_large), high = x - blur(sigma_small).
inline constexpr double kSigmaSmall = 1.0;
inline constexpr double kSigmaLarge = 2.0;

// Deformable alignment reads a 3x3 tap grid per pixel.
inline constexpr int kAlignKernelSide = 3;

struct ModelConfig {
    int channels = 32;       // feature width C
    int temporal_radius = 1; // R frames either side of the center
    int rounds = 1;          // bidirectional propagation rounds N
    int ofae_blocks = 2;     // frequency-enhancement blocks in the tail
    int offset_groups = 4;   // deformable-sampling channel groups
    uint64_t seed = 1;

    int band_channels() const { return std::max(channels / 2, 2); }
    int gate_channels() const { return std::max(channels / 4, 2); }

    void validate() const;
    bool same_architecture(const ModelConfig& other) const;
};

// Named parameter tensors in a fixed registration order (the checkpoint
// order), each paired with a persistent gradient accumulator.
template <typename T>
struct ParamStore {
    struct Entry {
        std::string name;
        TensorT<T> value;
        TensorT<T> grad;
    };

    std::vector<Entry> entries;

    void add(std::string name, TensorT<T> init);
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    void zero_grads();
    size_t total_elements() const;

  private:
    std::unordered_map<std::string, size_t> index_;
};

// Splits a feature map into complementary low/mid/high Gaussian bands that
// sum back to the input by construction. Requires H, W >= 4.
template <typename T>
std::array<TensorT<T>, 3> frequency_decompose(const TensorT<T>& feature);

// The enhancement network: per-frame multi-scale feature extraction with
// selective-kernel gating, deformable window alignment and fusion,
// bidirectional grid propagation, a stack of omni-frequency enhancement
// blocks, and a residual reconstruction head over the decoded luma.
//
// Builder methods append ops to a caller-owned Graph so the same topology
// serves inference (non-tracking) and training (tracking with gradient
// sinks into the param store).
template <typename T>
class Net {
  public:
    explicit Net(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }

    // Replaces every parameter with fan-in-scaled Gaussian noise (times
    // `scale`); used by gradient audits and perturbation tests that need
    // generic weights (the default init zeroes offset predictors and the
    // head, which would hide entire gradient paths).
    void randomize_all(uint64_t seed, double scale = 1.0);

    // {1,H,W} normalized luma -> {C,H,W}; H and W must be multiples of 4.
    Var<T> feature_extract(Graph<T>& g, const Var<T>& luma);
    // Aligns `state` toward `ref` via predicted per-pixel offsets.
    Var<T> align(Graph<T>& g, const std::string& prefix, const Var<T>& state, const Var<T>& ref);
    // Fuses the temporal window around `center` out of per-frame features
    // (indices clamp at the ends, i.e. replicate padding).
    Var<T> fuse_window(Graph<T>& g, const std::vector<Var<T>>& feats, int center);
    // Full window fusion from 2R+1 raw planes (extract + align + fuse).
    Var<T> stff_fuse(Graph<T>& g, const std::vector<Var<T>>& window);
    Var<T> ofae_block(Graph<T>& g, const std::string& prefix, const Var<T>& x);
    // Backward-then-forward recurrent passes, `rounds` times.
    std::vector<Var<T>> propagate_grid(Graph<T>& g, const std::vector<Var<T>>& feats);
    // OFAE tail + reconstruction head -> {1,H,W} residual.
    Var<T> final_stack(Graph<T>& g, Var<T> h);
    // Enhances the center frame of a 2R+1 window (normalized, unclamped).
    Var<T> enhance_window(Graph<T>& g, const std::vector<Var<T>>& frames);

    // Whole-sequence enhancement: luma in, luma + residual out (clamped,
    // re-quantized); chroma passes through untouched.
    Sequence enhance_sequence(const Sequence& decoded);

  private:
    Var<T> conv(Graph<T>& g, const std::string& name, const Var<T>& x, int dilation = 1);
    Var<T> sk_block(Graph<T>& g, const std::string& prefix, const Var<T>& x);

    ModelConfig cfg_;
    ParamStore<T> params_;
};

using Net32 = Net<float>;
using Net64 = Net<double>;

} // namespace ovqe
