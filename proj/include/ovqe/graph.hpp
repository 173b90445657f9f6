#pragma once

#include "ovqe/errors.hpp"
#include "ovqe/tensor.hpp"

#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace ovqe {

// A value living on a computation graph. `id` indexes the owning graph's
// gradient slots; it stays -1 on non-tracking graphs.
template <typename T>
struct Var {
    int id = -1;
    std::shared_ptr<const TensorT<T>> v;

    const TensorT<T>& val() const { return *v; }
    bool valid() const { return static_cast<bool>(v); }
};

// Tape-based reverse-mode autodiff over rank-3 {C,H,W} tensors.
//
// Ops compute forward values eagerly; with tracking enabled each op also
// pushes a closure onto the tape that accumulates gradients into
// per-node slots. backward() seeds the scalar loss with 1 and replays the
// tape in reverse, then flushes parameter gradients into their sinks.
// A non-tracking graph skips all bookkeeping and is safe to use for
// inference with intermediate values freed as Vars go out of scope.
template <typename T>
class Graph {
  public:
    using Tensor = TensorT<T>;

    explicit Graph(bool track) : track_(track) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool tracking() const { return track_; }

    // Leaf holding a constant (input) tensor.
    Var<T> value(Tensor t);
    // Leaf aliasing an externally owned parameter tensor. When tracking,
    // its gradient is added into *grad_sink by backward(). The referenced
    // tensor must outlive the graph.
    Var<T> param(const Tensor& value, Tensor* grad_sink);

    Var<T> add(const Var<T>& a, const Var<T>& b);
    Var<T> sub(const Var<T>& a, const Var<T>& b);
    Var<T> affine(const Var<T>& a, T scale, T shift);
    Var<T> silu(const Var<T>& x);
    Var<T> sigmoid(const Var<T>& x);
    Var<T> concat_ch(const std::vector<Var<T>>& parts);
    // Per-channel scaling: gate is {C,1,1}, broadcast over the plane.
    Var<T> mul_bcast(const Var<T>& x, const Var<T>& gate);
    // 2-D convolution, stride 1, "same" zero padding, odd square kernels.
    // x {Cin,H,W}, w {Cout,Cin,k,k}, b {Cout} -> {Cout,H,W}.
    Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int dilation = 1);
    Var<T> avg_pool2(const Var<T>& x);
    Var<T> upsample2(const Var<T>& x); // nearest-neighbour, 2x
    Var<T> global_avg(const Var<T>& x); // {C,H,W} -> {C,1,1}
    // Isotropic Gaussian blur, radius 3*sigma, symmetric boundary fold.
    Var<T> gaussian_blur(const Var<T>& x, double sigma);
    // Bilinear gather at per-pixel offset taps with per-tap modulation.
    // feat {C,H,W}, offsets {G*K*2,H,W} as (dy,dx) pairs, mask {G*K,H,W},
    // K = kernel_side^2 -> {K*C,H,W}. Out-of-frame samples read zero.
    Var<T> deformable_gather(const Var<T>& feat, const Var<T>& offsets, const Var<T>& mask,
                             int groups, int kernel_side);
    // Mean Charbonnier penalty sqrt(d^2 + eps) -> scalar {1}.
    Var<T> charbonnier(const Var<T>& pred, const Var<T>& target, T eps);

    void backward(const Var<T>& loss);
    const Tensor& grad(const Var<T>& x) const;

  private:
    Var<T> track_node(Tensor out);
    void record(std::function<void()> fn);
    Tensor& grad_at(int id) {
        if (id < 0) throw ArgumentError("graph: gradient requested for untracked value");
        return grads_[static_cast<size_t>(id)];
    }

    bool track_ = false;
    bool ran_backward_ = false;
    int next_id_ = 0;
    std::vector<Tensor> grads_;
    std::vector<std::function<void()>> tape_;
    std::vector<std::pair<int, Tensor*>> param_sinks_;
};

// Normalised 1-D Gaussian taps for the given sigma, radius round(3*sigma).
std::vector<double> gaussian_kernel(double sigma);

// Symmetric ("reflect with edge repeat") index fold onto [0, n).
inline int fold_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

} // namespace ovqe
