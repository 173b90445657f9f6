#include "ovqe/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ovqe {

void ModelConfig::validate() const {
    if (channels < 2 || channels % 2 != 0)
        throw ArgumentError("model config: channels must be an even count >= 2");
    if (temporal_radius < 0) throw ArgumentError("model config: temporal_radius must be >= 0");
    if (rounds < 1) throw ArgumentError("model config: rounds must be >= 1");
    if (ofae_blocks < 1) throw ArgumentError("model config: ofae_blocks must be >= 1");
    if (offset_groups < 1 || channels % offset_groups != 0)
        throw ArgumentError("model config: offset_groups must divide channels");
}

bool ModelConfig::same_architecture(const ModelConfig& other) const {
    return channels == other.channels && temporal_radius == other.temporal_radius &&
           rounds == other.rounds && ofae_blocks == other.ofae_blocks &&
           offset_groups == other.offset_groups;
}

template <typename T>
void ParamStore<T>::add(std::string name, TensorT<T> init) {
    if (has(name)) throw ArgumentError("param store: duplicate parameter " + name);
    index_[name] = entries.size();
    TensorT<T> grad(init.shape);
    entries.push_back(Entry{std::move(name), std::move(init), std::move(grad)});
}

template <typename T>
typename ParamStore<T>::Entry& ParamStore<T>::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("param store: unknown parameter " + name);
    return entries[it->second];
}

template <typename T>
const typename ParamStore<T>::Entry& ParamStore<T>::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ArgumentError("param store: unknown parameter " + name);
    return entries[it->second];
}

template <typename T>
void ParamStore<T>::zero_grads() {
    for (auto& e : entries) e.grad.fill(T(0));
}

template <typename T>
size_t ParamStore<T>::total_elements() const {
    size_t n = 0;
    for (const auto& e : entries) n += e.value.numel();
    return n;
}

template <typename T>
std::array<TensorT<T>, 3> frequency_decompose(const TensorT<T>& feature) {
    if (feature.rank() != 3) throw ArgumentError("frequency split: expected a {C,H,W} tensor");
    if (feature.dim(1) < 4 || feature.dim(2) < 4)
        throw ArgumentError("frequency split: spatial dims must be >= 4, got " +
                            shape_string(feature));
    Graph<T> g(false);
    Var<T> x = g.value(feature);
    Var<T> coarse = g.gaussian_blur(x, kSigmaLarge);
    Var<T> fine = g.gaussian_blur(x, kSigmaSmall);
    Var<T> mid = g.sub(fine, coarse);
    Var<T> high = g.sub(x, fine);
    return {coarse.val(), mid.val(), high.val()};
}

namespace {

enum class Init { He, Zero, TapIdentity };

template <typename T>
void add_conv(ParamStore<T>& store, std::mt19937_64& rng, const std::string& name, int cout,
              int cin, int k, Init init) {
    TensorT<T> w({cout, cin, k, k});
    if (init == Init::He) {
        std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (static_cast<double>(cin) * k * k)));
        for (T& v : w.data) v = static_cast<T>(nd(rng));
    } else if (init == Init::TapIdentity) {
        // Pass-through over the center sampling tap: the gather op halves
        // values through the sigmoid(0)=0.5 modulation mask at init, so a
        // weight of 2 makes zero-offset alignment an exact identity.
        const int taps = cin / cout;
        const int center = taps / 2;
        for (int c = 0; c < cout; ++c) w.data[(static_cast<size_t>(c) * cin + center * cout + c)] = T(2);
    }
    store.add(name + ".w", std::move(w));
    store.add(name + ".b", TensorT<T>({cout}));
}

template <typename T>
void add_sk_block(ParamStore<T>& store, std::mt19937_64& rng, const std::string& prefix, int c,
                  int gate) {
    add_conv(store, rng, prefix + ".conv_a", c, c, 3, Init::He);
    add_conv(store, rng, prefix + ".conv_b", c, c, 3, Init::He);
    add_conv(store, rng, prefix + ".fc1", gate, c, 1, Init::He);
    add_conv(store, rng, prefix + ".fc2a", c, gate, 1, Init::He);
    add_conv(store, rng, prefix + ".fc2b", c, gate, 1, Init::He);
}

template <typename T>
void add_align_block(ParamStore<T>& store, std::mt19937_64& rng, const std::string& prefix, int c,
                     int groups) {
    const int taps = kAlignKernelSide * kAlignKernelSide;
    add_conv(store, rng, prefix + ".off1", c, 2 * c, 3, Init::He);
    // Offsets and modulation logits start at zero so alignment degenerates
    // to the plain center tap until training moves it.
    add_conv(store, rng, prefix + ".off2o", groups * taps * 2, c, 1, Init::Zero);
    add_conv(store, rng, prefix + ".off2m", groups * taps, c, 1, Init::Zero);
    add_conv(store, rng, prefix + ".combine", c, taps * c, 1, Init::TapIdentity);
}

template <typename T>
void add_ofae_block(ParamStore<T>& store, std::mt19937_64& rng, const std::string& prefix, int c,
                    int band) {
    for (const char* bn : {"low", "mid", "high"}) {
        add_conv(store, rng, prefix + "." + bn + ".c1", band, c, 3, Init::He);
        add_conv(store, rng, prefix + "." + bn + ".c2", c, band, 3, Init::He);
    }
    add_conv(store, rng, prefix + ".fuse", c, 3 * c, 1, Init::He);
}

} // namespace

template <typename T>
Net<T>::Net(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    const int c = cfg_.channels;

    add_conv(params_, rng, "stff.embed", c, 1, 3, Init::He);
    add_sk_block(params_, rng, "stff.sk0", c, cfg_.gate_channels());
    add_sk_block(params_, rng, "stff.sk1", c, cfg_.gate_channels());
    add_conv(params_, rng, "stff.bottleneck", c, c, 3, Init::He);
    add_conv(params_, rng, "stff.dec1", c, 2 * c, 3, Init::He);
    add_conv(params_, rng, "stff.dec0", c, 2 * c, 3, Init::He);
    add_align_block(params_, rng, "stff.align", c, cfg_.offset_groups);
    add_conv(params_, rng, "stff.fuse", c, (2 * cfg_.temporal_radius + 1) * c, 1, Init::He);

    add_align_block(params_, rng, "prop.bwd.align", c, cfg_.offset_groups);
    add_conv(params_, rng, "prop.bwd.mix", c, 2 * c, 1, Init::He);
    add_ofae_block(params_, rng, "prop.bwd.ofae", c, cfg_.band_channels());
    add_align_block(params_, rng, "prop.fwd.align", c, cfg_.offset_groups);
    add_conv(params_, rng, "prop.fwd.mix", c, 3 * c, 1, Init::He);
    add_ofae_block(params_, rng, "prop.fwd.ofae", c, cfg_.band_channels());

    for (int i = 0; i < cfg_.ofae_blocks; ++i)
        add_ofae_block(params_, rng, "ofae" + std::to_string(i), c, cfg_.band_channels());

    add_conv(params_, rng, "rec.c1", c, c, 3, Init::He);
    // Zero head: the network starts as the exact identity on the decode.
    add_conv(params_, rng, "rec.c2", 1, c, 3, Init::Zero);
}

template <typename T>
void Net<T>::randomize_all(uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& e : params_.entries) {
        // Fan-in scaling keeps activations (and thus gradients) at a healthy
        // magnitude through the full depth, which matters for perturbation
        // probes and finite-difference comparisons.
        double std_dev = 0.05 * scale;
        if (e.value.rank() == 4) {
            const double fan_in =
                static_cast<double>(e.value.dim(1)) * e.value.dim(2) * e.value.dim(3);
            std_dev = scale * std::sqrt(2.0 / fan_in);
        }
        for (T& v : e.value.data) v = static_cast<T>(std_dev * nd(rng));
    }
}

template <typename T>
Var<T> Net<T>::conv(Graph<T>& g, const std::string& name, const Var<T>& x, int dilation) {
    auto& w = params_.at(name + ".w");
    auto& b = params_.at(name + ".b");
    return g.conv2d(x, g.param(w.value, &w.grad), g.param(b.value, &b.grad), dilation);
}

template <typename T>
Var<T> Net<T>::sk_block(Graph<T>& g, const std::string& prefix, const Var<T>& x) {
    Var<T> a = g.silu(conv(g, prefix + ".conv_a", x));
    Var<T> b = g.silu(conv(g, prefix + ".conv_b", x, /*dilation=*/2));
    Var<T> pooled = g.global_avg(g.add(a, b));
    Var<T> z = g.silu(conv(g, prefix + ".fc1", pooled));
    Var<T> gate_a = g.sigmoid(g.sub(conv(g, prefix + ".fc2a", z), conv(g, prefix + ".fc2b", z)));
    Var<T> gate_b = g.affine(gate_a, T(-1), T(1)); // softmax over two branches
    return g.add(x, g.add(g.mul_bcast(a, gate_a), g.mul_bcast(b, gate_b)));
}

template <typename T>
Var<T> Net<T>::feature_extract(Graph<T>& g, const Var<T>& luma) {
    const TensorT<T>& x = luma.val();
    if (x.rank() != 3 || x.dim(0) != 1)
        throw ArgumentError("net: feature extraction expects a {1,H,W} plane, got " +
                            shape_string(x));
    if (x.dim(1) % 4 != 0 || x.dim(2) % 4 != 0)
        throw ArgumentError("net: plane dims must be multiples of 4 for the two-level "
                            "encoder-decoder, got " +
                            shape_string(x));
    Var<T> e = g.silu(conv(g, "stff.embed", luma));
    Var<T> e0 = sk_block(g, "stff.sk0", e);
    Var<T> e1 = sk_block(g, "stff.sk1", g.avg_pool2(e0));
    Var<T> m = g.silu(conv(g, "stff.bottleneck", g.avg_pool2(e1)));
    Var<T> d1 = g.silu(conv(g, "stff.dec1", g.concat_ch({g.upsample2(m), e1})));
    Var<T> d0 = g.silu(conv(g, "stff.dec0", g.concat_ch({g.upsample2(d1), e0})));
    return d0;
}

template <typename T>
Var<T> Net<T>::align(Graph<T>& g, const std::string& prefix, const Var<T>& state,
                     const Var<T>& ref) {
    Var<T> z = g.silu(conv(g, prefix + ".off1", g.concat_ch({ref, state})));
    Var<T> offsets = conv(g, prefix + ".off2o", z);
    Var<T> mask = g.sigmoid(conv(g, prefix + ".off2m", z));
    Var<T> taps = g.deformable_gather(state, offsets, mask, cfg_.offset_groups, kAlignKernelSide);
    return conv(g, prefix + ".combine", taps);
}

template <typename T>
Var<T> Net<T>::fuse_window(Graph<T>& g, const std::vector<Var<T>>& feats, int center) {
    if (feats.empty()) throw ArgumentError("net: window fusion over empty feature list");
    const int n = static_cast<int>(feats.size());
    if (center < 0 || center >= n) throw ArgumentError("net: window center out of range");
    std::vector<Var<T>> aligned;
    aligned.reserve(static_cast<size_t>(2 * cfg_.temporal_radius + 1));
    for (int j = center - cfg_.temporal_radius; j <= center + cfg_.temporal_radius; ++j)
        aligned.push_back(align(g, "stff.align", feats[static_cast<size_t>(std::clamp(j, 0, n - 1))],
                                feats[static_cast<size_t>(center)]));
    return g.silu(conv(g, "stff.fuse", g.concat_ch(aligned)));
}

template <typename T>
Var<T> Net<T>::stff_fuse(Graph<T>& g, const std::vector<Var<T>>& window) {
    if (static_cast<int>(window.size()) != 2 * cfg_.temporal_radius + 1)
        throw ArgumentError("net: window length " + std::to_string(window.size()) +
                            " does not match temporal radius " +
                            std::to_string(cfg_.temporal_radius));
    std::vector<Var<T>> feats;
    feats.reserve(window.size());
    for (const auto& plane : window) feats.push_back(feature_extract(g, plane));
    return fuse_window(g, feats, cfg_.temporal_radius);
}

template <typename T>
Var<T> Net<T>::ofae_block(Graph<T>& g, const std::string& prefix, const Var<T>& x) {
    Var<T> coarse = g.gaussian_blur(x, kSigmaLarge);
    Var<T> fine = g.gaussian_blur(x, kSigmaSmall);
    Var<T> mid = g.sub(fine, coarse);
    Var<T> high = g.sub(x, fine);
    auto band = [&](const char* bn, const Var<T>& v) {
        const std::string base = prefix + "." + bn;
        return g.add(v, conv(g, base + ".c2", g.silu(conv(g, base + ".c1", v))));
    };
    Var<T> fused = conv(g, prefix + ".fuse",
                        g.concat_ch({band("low", coarse), band("mid", mid), band("high", high)}));
    return g.add(x, fused);
}

template <typename T>
std::vector<Var<T>> Net<T>::propagate_grid(Graph<T>& g, const std::vector<Var<T>>& feats) {
    if (feats.empty()) throw ArgumentError("net: propagation over empty feature list");
    const size_t n = feats.size();
    std::vector<Var<T>> f = feats;
    for (int round = 0; round < cfg_.rounds; ++round) {
        std::vector<Var<T>> back(n);
        Var<T> state = g.value(TensorT<T>(f[0].val().shape));
        for (size_t t = n; t-- > 0;) {
            Var<T> al = align(g, "prop.bwd.align", state, f[t]);
            Var<T> mixed = g.silu(conv(g, "prop.bwd.mix", g.concat_ch({f[t], al})));
            back[t] = ofae_block(g, "prop.bwd.ofae", mixed);
            state = back[t];
        }
        std::vector<Var<T>> fwd(n);
        state = g.value(TensorT<T>(f[0].val().shape));
        for (size_t t = 0; t < n; ++t) {
            Var<T> al = align(g, "prop.fwd.align", state, f[t]);
            Var<T> mixed = g.silu(conv(g, "prop.fwd.mix", g.concat_ch({f[t], back[t], al})));
            fwd[t] = ofae_block(g, "prop.fwd.ofae", mixed);
            state = fwd[t];
        }
        f = std::move(fwd); // this round's hidden states feed the next round
    }
    return f;
}

template <typename T>
Var<T> Net<T>::final_stack(Graph<T>& g, Var<T> h) {
    for (int i = 0; i < cfg_.ofae_blocks; ++i) h = ofae_block(g, "ofae" + std::to_string(i), h);
    return conv(g, "rec.c2", g.silu(conv(g, "rec.c1", h)));
}

template <typename T>
Var<T> Net<T>::enhance_window(Graph<T>& g, const std::vector<Var<T>>& frames) {
    const int len = 2 * cfg_.temporal_radius + 1;
    if (static_cast<int>(frames.size()) != len)
        throw ArgumentError("net: enhance window needs exactly " + std::to_string(len) +
                            " frames");
    std::vector<Var<T>> feats;
    feats.reserve(frames.size());
    for (const auto& fr : frames) feats.push_back(feature_extract(g, fr));
    std::vector<Var<T>> fused(frames.size());
    for (int t = 0; t < len; ++t) fused[static_cast<size_t>(t)] = fuse_window(g, feats, t);
    std::vector<Var<T>> hidden = propagate_grid(g, fused);
    Var<T> residual = final_stack(g, hidden[static_cast<size_t>(cfg_.temporal_radius)]);
    return g.add(frames[static_cast<size_t>(cfg_.temporal_radius)], residual);
}

template <typename T>
Sequence Net<T>::enhance_sequence(const Sequence& decoded) {
    decoded.validate();
    if (decoded.empty()) throw ArgumentError("net: empty sequence");

    const int h = decoded.height, w = decoded.width;
    const int hp = (h + 3) / 4 * 4, wp = (w + 3) / 4 * 4; // replicate-pad to /4
    const T peak = static_cast<T>((1 << decoded.bit_depth) - 1);
    const size_t n = decoded.frame_count();

    Graph<T> g(false);
    std::vector<Var<T>> inputs(n), feats(n);
    for (size_t t = 0; t < n; ++t) {
        TensorT<T> x({1, hp, wp});
        const Plane& y = decoded.frames[t].y;
        for (int r = 0; r < hp; ++r)
            for (int c = 0; c < wp; ++c)
                x.at(0, r, c) =
                    static_cast<T>(y.at(std::min(r, h - 1), std::min(c, w - 1))) / peak;
        inputs[t] = g.value(std::move(x));
        feats[t] = feature_extract(g, inputs[t]);
    }
    std::vector<Var<T>> fused(n);
    for (size_t t = 0; t < n; ++t) {
        fused[t] = fuse_window(g, feats, static_cast<int>(t));
        ensure_finite(fused[t].val(), "fused features of frame " + std::to_string(t));
    }
    feats.clear();
    std::vector<Var<T>> hidden = propagate_grid(g, fused);
    fused.clear();

    Sequence out = decoded;
    for (size_t t = 0; t < n; ++t) {
        Var<T> residual = final_stack(g, hidden[t]);
        ensure_finite(residual.val(), "residual of frame " + std::to_string(t));
        Var<T> enhanced = g.add(inputs[t], residual);
        Plane& y = out.frames[t].y;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double v = static_cast<double>(enhanced.val().at(0, r, c)) *
                                 static_cast<double>(peak);
                y.at(r, c) = static_cast<uint16_t>(
                    std::clamp<long long>(std::llround(v), 0, static_cast<long long>(peak)));
            }
        hidden[t] = Var<T>{}; // free this frame's state before the next one
    }
    return out;
}

template struct ParamStore<float>;
template struct ParamStore<double>;
template std::array<TensorT<float>, 3> frequency_decompose(const TensorT<float>&);
template std::array<TensorT<double>, 3> frequency_decompose(const TensorT<double>&);
template class Net<float>;
template class Net<double>;

} // namespace ovqe
