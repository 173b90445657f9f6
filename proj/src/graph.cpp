#include "ovqe/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace ovqe {

namespace {

template <typename T>
void axpy(TensorT<T>& dst, const TensorT<T>& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
using MatC = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>; // column-major
template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unrolls receptive fields into a (Cin*k*k) x (H*W) column-major matrix,
// zero-filled outside the plane ("same" padding).
template <typename T>
void im2col(const TensorT<T>& x, int k, int dilation, std::vector<T>& col) {
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int pad = dilation * (k - 1) / 2;
    const size_t K = static_cast<size_t>(C) * k * k;
    col.assign(K * H * W, T(0));
    for (int y = 0; y < H; ++y) {
        for (int xo = 0; xo < W; ++xo) {
            T* dst = col.data() + (static_cast<size_t>(y) * W + xo) * K;
            size_t r = 0;
            for (int c = 0; c < C; ++c) {
                const T* src = x.data.data() + static_cast<size_t>(c) * H * W;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = y + ky * dilation - pad;
                    if (iy < 0 || iy >= H) {
                        r += static_cast<size_t>(k);
                        continue;
                    }
                    for (int kx = 0; kx < k; ++kx, ++r) {
                        const int ix = xo + kx * dilation - pad;
                        if (ix >= 0 && ix < W) dst[r] = src[static_cast<size_t>(iy) * W + ix];
                    }
                }
            }
        }
    }
}

// Transpose of im2col: scatter-add columns back onto the input plane.
template <typename T>
void col2im_add(const std::vector<T>& col, int k, int dilation, TensorT<T>& dx) {
    const int C = dx.dim(0), H = dx.dim(1), W = dx.dim(2);
    const int pad = dilation * (k - 1) / 2;
    const size_t K = static_cast<size_t>(C) * k * k;
    for (int y = 0; y < H; ++y) {
        for (int xo = 0; xo < W; ++xo) {
            const T* src = col.data() + (static_cast<size_t>(y) * W + xo) * K;
            size_t r = 0;
            for (int c = 0; c < C; ++c) {
                T* dst = dx.data.data() + static_cast<size_t>(c) * H * W;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = y + ky * dilation - pad;
                    if (iy < 0 || iy >= H) {
                        r += static_cast<size_t>(k);
                        continue;
                    }
                    for (int kx = 0; kx < k; ++kx, ++r) {
                        const int ix = xo + kx * dilation - pad;
                        if (ix >= 0 && ix < W) dst[static_cast<size_t>(iy) * W + ix] += src[r];
                    }
                }
            }
        }
    }
}

// Horizontal blur pass with symmetric folding; `transpose` scatters instead
// of gathering (used for the adjoint). Interior pixels (no folding needed)
// take a branch-free path.
template <typename T>
void blur_rows(const T* in, T* out, int H, int W, const std::vector<T>& kern, bool transpose) {
    const int r = static_cast<int>(kern.size()) / 2;
    const int lo = std::min(r, W), hi = std::max(W - r, lo);
    for (int y = 0; y < H; ++y) {
        const T* src = in + static_cast<size_t>(y) * W;
        T* dst = out + static_cast<size_t>(y) * W;
        if (!transpose) {
            for (int x = 0; x < lo; ++x) {
                T acc = T(0);
                for (int j = -r; j <= r; ++j)
                    acc += kern[static_cast<size_t>(j + r)] * src[fold_index(x + j, W)];
                dst[x] = acc;
            }
            for (int x = lo; x < hi; ++x) {
                T acc = T(0);
                for (int j = -r; j <= r; ++j)
                    acc += kern[static_cast<size_t>(j + r)] * src[x + j];
                dst[x] = acc;
            }
            for (int x = hi; x < W; ++x) {
                T acc = T(0);
                for (int j = -r; j <= r; ++j)
                    acc += kern[static_cast<size_t>(j + r)] * src[fold_index(x + j, W)];
                dst[x] = acc;
            }
        } else {
            for (int x = 0; x < W; ++x) {
                const T g = src[x];
                if (x >= lo && x < hi) {
                    for (int j = -r; j <= r; ++j) dst[x + j] += kern[static_cast<size_t>(j + r)] * g;
                } else {
                    for (int j = -r; j <= r; ++j)
                        dst[fold_index(x + j, W)] += kern[static_cast<size_t>(j + r)] * g;
                }
            }
        }
    }
}

template <typename T>
void blur_cols(const T* in, T* out, int H, int W, const std::vector<T>& kern, bool transpose) {
    const int r = static_cast<int>(kern.size()) / 2;
    const int lo = std::min(r, H), hi = std::max(H - r, lo);
    // Row-at-a-time over y keeps the inner x loop unit-stride.
    if (!transpose) {
        for (int y = 0; y < H; ++y) {
            T* dst = out + static_cast<size_t>(y) * W;
            std::fill(dst, dst + W, T(0));
            const bool interior = y >= lo && y < hi;
            for (int j = -r; j <= r; ++j) {
                const int yy = interior ? y + j : fold_index(y + j, H);
                const T k = kern[static_cast<size_t>(j + r)];
                const T* src = in + static_cast<size_t>(yy) * W;
                for (int x = 0; x < W; ++x) dst[x] += k * src[x];
            }
        }
    } else {
        for (int y = 0; y < H; ++y) {
            const T* src = in + static_cast<size_t>(y) * W;
            const bool interior = y >= lo && y < hi;
            for (int j = -r; j <= r; ++j) {
                const int yy = interior ? y + j : fold_index(y + j, H);
                const T k = kern[static_cast<size_t>(j + r)];
                T* dst = out + static_cast<size_t>(yy) * W;
                for (int x = 0; x < W; ++x) dst[x] += k * src[x];
            }
        }
    }
}

// Bilinear sampling geometry at one fractional position, shared by all
// channels of an offset group: corner offsets into the plane, in-bounds
// flags, and the four corner weights.
template <typename T>
struct SampleGeom {
    size_t o00 = 0, o01 = 0, o10 = 0, o11 = 0;
    bool i00 = false, i01 = false, i10 = false, i11 = false;
    T wy = 0, wx = 0;
    T w00 = 0, w01 = 0, w10 = 0, w11 = 0;
};

template <typename T>
SampleGeom<T> sample_geom(int H, int W, T py, T px) {
    SampleGeom<T> s;
    const T fy = std::floor(py);
    const T fx = std::floor(px);
    const int y0 = static_cast<int>(fy);
    const int x0 = static_cast<int>(fx);
    s.wy = py - fy;
    s.wx = px - fx;
    const bool yin0 = y0 >= 0 && y0 < H, yin1 = y0 + 1 >= 0 && y0 + 1 < H;
    const bool xin0 = x0 >= 0 && x0 < W, xin1 = x0 + 1 >= 0 && x0 + 1 < W;
    s.i00 = yin0 && xin0;
    s.i01 = yin0 && xin1;
    s.i10 = yin1 && xin0;
    s.i11 = yin1 && xin1;
    if (s.i00) s.o00 = static_cast<size_t>(y0) * W + x0;
    if (s.i01) s.o01 = static_cast<size_t>(y0) * W + x0 + 1;
    if (s.i10) s.o10 = static_cast<size_t>(y0 + 1) * W + x0;
    if (s.i11) s.o11 = static_cast<size_t>(y0 + 1) * W + x0 + 1;
    s.w00 = (T(1) - s.wy) * (T(1) - s.wx);
    s.w01 = (T(1) - s.wy) * s.wx;
    s.w10 = s.wy * (T(1) - s.wx);
    s.w11 = s.wy * s.wx;
    return s;
}

} // namespace

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::lround(3.0 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i / sigma) * (i / sigma));
        k[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

template <typename T>
Var<T> Graph<T>::track_node(Tensor out) {
    Var<T> v;
    v.v = std::make_shared<const Tensor>(std::move(out));
    if (track_) {
        v.id = next_id_++;
        grads_.emplace_back(Tensor(v.v->shape));
    }
    return v;
}

template <typename T>
void Graph<T>::record(std::function<void()> fn) {
    tape_.push_back(std::move(fn));
}

template <typename T>
Var<T> Graph<T>::value(Tensor t) {
    return track_node(std::move(t));
}

template <typename T>
Var<T> Graph<T>::param(const Tensor& value, Tensor* grad_sink) {
    Var<T> v;
    v.v = std::shared_ptr<const Tensor>(&value, [](const Tensor*) {});
    if (track_) {
        v.id = next_id_++;
        grads_.emplace_back(Tensor(value.shape));
        if (grad_sink) {
            if (grad_sink->shape != value.shape)
                throw ArgumentError("graph: parameter gradient sink shape mismatch");
            param_sinks_.emplace_back(v.id, grad_sink);
        }
    }
    return v;
}

template <typename T>
Var<T> Graph<T>::add(const Var<T>& a, const Var<T>& b) {
    if (!a.val().same_shape(b.val())) throw ArgumentError("graph: add shape mismatch");
    Tensor out(a.val().shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.val().data[i] + b.val().data[i];
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, ai = a.id, bi = b.id, oi = o.id] {
            axpy(grad_at(ai), grad_at(oi));
            axpy(grad_at(bi), grad_at(oi));
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::sub(const Var<T>& a, const Var<T>& b) {
    if (!a.val().same_shape(b.val())) throw ArgumentError("graph: sub shape mismatch");
    Tensor out(a.val().shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.val().data[i] - b.val().data[i];
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, ai = a.id, bi = b.id, oi = o.id] {
            const Tensor& g = grad_at(oi);
            axpy(grad_at(ai), g);
            Tensor& gb = grad_at(bi);
            for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::affine(const Var<T>& a, T scale, T shift) {
    Tensor out(a.val().shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = scale * a.val().data[i] + shift;
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, ai = a.id, oi = o.id, scale] {
            const Tensor& g = grad_at(oi);
            Tensor& ga = grad_at(ai);
            for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += scale * g.data[i];
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::silu(const Var<T>& x) {
    Tensor out(x.val().shape);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const T v = x.val().data[i];
        out.data[i] = v / (T(1) + std::exp(-v));
    }
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, xv = x.v, xi = x.id, oi = o.id] {
            const Tensor& g = grad_at(oi);
            Tensor& gx = grad_at(xi);
            for (size_t i = 0; i < gx.data.size(); ++i) {
                const T v = xv->data[i];
                const T s = T(1) / (T(1) + std::exp(-v));
                gx.data[i] += g.data[i] * s * (T(1) + v * (T(1) - s));
            }
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::sigmoid(const Var<T>& x) {
    Tensor out(x.val().shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = T(1) / (T(1) + std::exp(-x.val().data[i]));
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, ov = o.v, xi = x.id, oi = o.id] {
            const Tensor& g = grad_at(oi);
            Tensor& gx = grad_at(xi);
            for (size_t i = 0; i < gx.data.size(); ++i) {
                const T s = ov->data[i];
                gx.data[i] += g.data[i] * s * (T(1) - s);
            }
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::concat_ch(const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw ArgumentError("graph: concat of nothing");
    const int H = parts[0].val().dim(1), W = parts[0].val().dim(2);
    int C = 0;
    for (const auto& p : parts) {
        if (p.val().rank() != 3 || p.val().dim(1) != H || p.val().dim(2) != W)
            throw ArgumentError("graph: concat spatial shape mismatch");
        C += p.val().dim(0);
    }
    Tensor out({C, H, W});
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.val().data.begin(), p.val().data.end(), out.data.begin() + off);
        off += p.val().numel();
    }
    Var<T> o = track_node(std::move(out));
    if (track_) {
        std::vector<std::pair<int, size_t>> spans;
        size_t pos = 0;
        for (const auto& p : parts) {
            spans.emplace_back(p.id, p.val().numel());
            pos += p.val().numel();
        }
        record([this, spans, oi = o.id] {
            const Tensor& g = grad_at(oi);
            size_t off2 = 0;
            for (const auto& [pid, n] : spans) {
                Tensor& gp = grad_at(pid);
                for (size_t i = 0; i < n; ++i) gp.data[i] += g.data[off2 + i];
                off2 += n;
            }
        });
    }
    return o;
}

template <typename T>
Var<T> Graph<T>::mul_bcast(const Var<T>& x, const Var<T>& gate) {
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    if (gate.val().dim(0) != C || gate.val().dim(1) != 1 || gate.val().dim(2) != 1)
        throw ArgumentError("graph: gate must be {C,1,1}");
    Tensor out(x.val().shape);
    const size_t hw = static_cast<size_t>(H) * W;
    for (int c = 0; c < C; ++c) {
        const T gc = gate.val().data[static_cast<size_t>(c)];
        const T* src = x.val().data.data() + c * hw;
        T* dst = out.data.data() + c * hw;
        for (size_t i = 0; i < hw; ++i) dst[i] = src[i] * gc;
    }
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, xv = x.v, gv = gate.v, xi = x.id, gi = gate.id, oi = o.id, C, hw] {
            const Tensor& g = grad_at(oi);
            Tensor& gx = grad_at(xi);
            Tensor& gg = grad_at(gi);
            for (int c = 0; c < C; ++c) {
                const T gc = gv->data[static_cast<size_t>(c)];
                T acc = T(0);
                for (size_t i = 0; i < hw; ++i) {
                    const size_t idx = c * hw + i;
                    gx.data[idx] += g.data[idx] * gc;
                    acc += g.data[idx] * xv->data[idx];
                }
                gg.data[static_cast<size_t>(c)] += acc;
            }
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int dilation) {
    const Tensor& xt = x.val();
    const Tensor& wt = w.val();
    if (xt.rank() != 3 || wt.rank() != 4) throw ArgumentError("graph: conv2d rank mismatch");
    const int Cin = xt.dim(0), H = xt.dim(1), W = xt.dim(2);
    const int Cout = wt.dim(0), k = wt.dim(2);
    if (wt.dim(1) != Cin || wt.dim(3) != k || k % 2 == 0)
        throw ArgumentError("graph: conv2d weight shape " + shape_string(wt) + " does not fit input " +
                            shape_string(xt));
    if (b.val().rank() != 1 || b.val().dim(0) != Cout)
        throw ArgumentError("graph: conv2d bias shape mismatch");

    const size_t K = static_cast<size_t>(Cin) * k * k;
    const size_t HW = static_cast<size_t>(H) * W;

    Tensor out({Cout, H, W});
    if (k == 1) {
        // 1x1 kernels need no unrolling: the input already is the (Cin x HW)
        // column matrix.
        Eigen::Map<const MatR<T>> Wm(wt.data.data(), Cout, Cin);
        Eigen::Map<const MatR<T>> Xm(xt.data.data(), Cin, static_cast<Eigen::Index>(HW));
        Eigen::Map<MatR<T>> Ym(out.data.data(), Cout, static_cast<Eigen::Index>(HW));
        Ym.noalias() = Wm * Xm;
    } else {
        std::vector<T> col;
        im2col(xt, k, dilation, col);
        Eigen::Map<const MatR<T>> Wm(wt.data.data(), Cout, static_cast<Eigen::Index>(K));
        Eigen::Map<const MatC<T>> Cm(col.data(), static_cast<Eigen::Index>(K),
                                     static_cast<Eigen::Index>(HW));
        Eigen::Map<MatR<T>> Ym(out.data.data(), Cout, static_cast<Eigen::Index>(HW));
        Ym.noalias() = Wm * Cm;
    }
    for (int c = 0; c < Cout; ++c) {
        const T bias = b.val().data[static_cast<size_t>(c)];
        T* row = out.data.data() + static_cast<size_t>(c) * HW;
        for (size_t i = 0; i < HW; ++i) row[i] += bias;
    }

    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, xv = x.v, wv = w.v, xi = x.id, wi = w.id, bi = b.id, oi = o.id, dilation, k,
                Cin, Cout, K, HW] {
            const Tensor& g = grad_at(oi);
            Eigen::Map<const MatR<T>> Gm(g.data.data(), Cout, static_cast<Eigen::Index>(HW));

            Tensor& db = grad_at(bi);
            for (int c = 0; c < Cout; ++c) {
                const T* row = g.data.data() + static_cast<size_t>(c) * HW;
                T acc = T(0);
                for (size_t i = 0; i < HW; ++i) acc += row[i];
                db.data[static_cast<size_t>(c)] += acc;
            }

            if (k == 1) {
                Eigen::Map<const MatR<T>> Xm(xv->data.data(), Cin,
                                             static_cast<Eigen::Index>(HW));
                Eigen::Map<MatR<T>> dWm(grad_at(wi).data.data(), Cout, Cin);
                dWm.noalias() += Gm * Xm.transpose();
                Eigen::Map<const MatR<T>> Wm(wv->data.data(), Cout, Cin);
                Eigen::Map<MatR<T>> dXm(grad_at(xi).data.data(), Cin,
                                        static_cast<Eigen::Index>(HW));
                dXm.noalias() += Wm.transpose() * Gm;
                return;
            }

            std::vector<T> col2;
            im2col(*xv, k, dilation, col2);
            Eigen::Map<const MatC<T>> Cm(col2.data(), static_cast<Eigen::Index>(K),
                                         static_cast<Eigen::Index>(HW));
            Eigen::Map<MatR<T>> dWm(grad_at(wi).data.data(), Cout, static_cast<Eigen::Index>(K));
            dWm.noalias() += Gm * Cm.transpose();

            Eigen::Map<const MatR<T>> Wm(wv->data.data(), Cout, static_cast<Eigen::Index>(K));
            std::vector<T> dcol(K * HW);
            Eigen::Map<MatC<T>> Dm(dcol.data(), static_cast<Eigen::Index>(K),
                                   static_cast<Eigen::Index>(HW));
            Dm.noalias() = Wm.transpose() * Gm;
            col2im_add(dcol, k, dilation, grad_at(xi));
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::avg_pool2(const Var<T>& x) {
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    if (H % 2 != 0 || W % 2 != 0) throw ArgumentError("graph: avg_pool2 needs even dimensions");
    Tensor out({C, H / 2, W / 2});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H / 2; ++y)
            for (int xo = 0; xo < W / 2; ++xo)
                out.at(c, y, xo) = (x.val().at(c, 2 * y, 2 * xo) + x.val().at(c, 2 * y, 2 * xo + 1) +
                                    x.val().at(c, 2 * y + 1, 2 * xo) +
                                    x.val().at(c, 2 * y + 1, 2 * xo + 1)) /
                                   T(4);
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, xi = x.id, oi = o.id, C, H, W] {
            const Tensor& g = grad_at(oi);
            Tensor& gx = grad_at(xi);
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H / 2; ++y)
                    for (int xo = 0; xo < W / 2; ++xo) {
                        const T q = g.at(c, y, xo) / T(4);
                        gx.at(c, 2 * y, 2 * xo) += q;
                        gx.at(c, 2 * y, 2 * xo + 1) += q;
                        gx.at(c, 2 * y + 1, 2 * xo) += q;
                        gx.at(c, 2 * y + 1, 2 * xo + 1) += q;
                    }
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::upsample2(const Var<T>& x) {
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y)
            for (int xo = 0; xo < 2 * W; ++xo) out.at(c, y, xo) = x.val().at(c, y / 2, xo / 2);
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, xi = x.id, oi = o.id, C, H, W] {
            const Tensor& g = grad_at(oi);
            Tensor& gx = grad_at(xi);
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < 2 * H; ++y)
                    for (int xo = 0; xo < 2 * W; ++xo) gx.at(c, y / 2, xo / 2) += g.at(c, y, xo);
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::global_avg(const Var<T>& x) {
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    const size_t hw = static_cast<size_t>(H) * W;
    Tensor out({C, 1, 1});
    for (int c = 0; c < C; ++c) {
        const T* src = x.val().data.data() + c * hw;
        T acc = T(0);
        for (size_t i = 0; i < hw; ++i) acc += src[i];
        out.data[static_cast<size_t>(c)] = acc / static_cast<T>(hw);
    }
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, xi = x.id, oi = o.id, C, hw] {
            const Tensor& g = grad_at(oi);
            Tensor& gx = grad_at(xi);
            for (int c = 0; c < C; ++c) {
                const T q = g.data[static_cast<size_t>(c)] / static_cast<T>(hw);
                T* dst = gx.data.data() + c * hw;
                for (size_t i = 0; i < hw; ++i) dst[i] += q;
            }
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::gaussian_blur(const Var<T>& x, double sigma) {
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    const std::vector<double> kern_d = gaussian_kernel(sigma);
    const std::vector<T> kern(kern_d.begin(), kern_d.end());
    Tensor out(x.val().shape);
    std::vector<T> tmp(static_cast<size_t>(H) * W);
    for (int c = 0; c < C; ++c) {
        const T* src = x.val().data.data() + static_cast<size_t>(c) * H * W;
        T* dst = out.data.data() + static_cast<size_t>(c) * H * W;
        blur_rows(src, tmp.data(), H, W, kern, false);
        blur_cols(tmp.data(), dst, H, W, kern, false);
    }
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, xi = x.id, oi = o.id, C, H, W, kern] {
            const Tensor& g = grad_at(oi);
            Tensor& gx = grad_at(xi);
            std::vector<T> dtmp(static_cast<size_t>(H) * W);
            for (int c = 0; c < C; ++c) {
                const T* src = g.data.data() + static_cast<size_t>(c) * H * W;
                T* dst = gx.data.data() + static_cast<size_t>(c) * H * W;
                std::fill(dtmp.begin(), dtmp.end(), T(0));
                blur_cols(src, dtmp.data(), H, W, kern, true);
                blur_rows(dtmp.data(), dst, H, W, kern, true);
            }
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::deformable_gather(const Var<T>& feat, const Var<T>& offsets, const Var<T>& mask,
                                   int groups, int kernel_side) {
    const Tensor& ft = feat.val();
    const int C = ft.dim(0), H = ft.dim(1), W = ft.dim(2);
    const int K = kernel_side * kernel_side;
    if (groups <= 0 || C % groups != 0)
        throw ArgumentError("graph: feature channels not divisible into offset groups");
    if (offsets.val().dim(0) != groups * K * 2 || offsets.val().dim(1) != H ||
        offsets.val().dim(2) != W)
        throw ArgumentError("graph: offset field shape mismatch, expected {" +
                            std::to_string(groups * K * 2) + "," + std::to_string(H) + "," +
                            std::to_string(W) + "} got " + shape_string(offsets.val()));
    if (mask.val().dim(0) != groups * K || mask.val().dim(1) != H || mask.val().dim(2) != W)
        throw ArgumentError("graph: mask field shape mismatch");

    const int cpg = C / groups;
    const int half = (kernel_side - 1) / 2;
    const size_t hw = static_cast<size_t>(H) * W;
    Tensor out({K * C, H, W});
    for (int g = 0; g < groups; ++g) {
        for (int k = 0; k < K; ++k) {
            const int bdy = k / kernel_side - half;
            const int bdx = k % kernel_side - half;
            const T* offy = offsets.val().data.data() + (static_cast<size_t>(g) * K + k) * 2 * hw;
            const T* offx = offy + hw;
            const T* mk = mask.val().data.data() + (static_cast<size_t>(g) * K + k) * hw;
            for (int y = 0; y < H; ++y)
                for (int xo = 0; xo < W; ++xo) {
                    const size_t p = static_cast<size_t>(y) * W + xo;
                    const T py = static_cast<T>(y + bdy) + offy[p];
                    const T px = static_cast<T>(xo + bdx) + offx[p];
                    const SampleGeom<T> s = sample_geom(H, W, py, px);
                    for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
                        const T* plane = ft.data.data() + static_cast<size_t>(c) * hw;
                        const T v = s.w00 * (s.i00 ? plane[s.o00] : T(0)) +
                                    s.w01 * (s.i01 ? plane[s.o01] : T(0)) +
                                    s.w10 * (s.i10 ? plane[s.o10] : T(0)) +
                                    s.w11 * (s.i11 ? plane[s.o11] : T(0));
                        out.data[(static_cast<size_t>(k) * C + c) * hw + p] = mk[p] * v;
                    }
                }
        }
    }

    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, fv = feat.v, ov = offsets.v, mv = mask.v, fi = feat.id, oi = offsets.id,
                mi = mask.id, ri = o.id, groups, kernel_side, C, H, W, K, cpg, half, hw] {
            const Tensor& g = grad_at(ri);
            Tensor& gfeat = grad_at(fi);
            Tensor& goff = grad_at(oi);
            Tensor& gmask = grad_at(mi);
            for (int gr = 0; gr < groups; ++gr) {
                for (int k = 0; k < K; ++k) {
                    const int bdy = k / kernel_side - half;
                    const int bdx = k % kernel_side - half;
                    const size_t offbase = (static_cast<size_t>(gr) * K + k) * 2 * hw;
                    const size_t mbase = (static_cast<size_t>(gr) * K + k) * hw;
                    const T* offy = ov->data.data() + offbase;
                    const T* offx = offy + hw;
                    const T* mk = mv->data.data() + mbase;
                    for (int y = 0; y < H; ++y)
                        for (int xo = 0; xo < W; ++xo) {
                            const size_t p = static_cast<size_t>(y) * W + xo;
                            const T py = static_cast<T>(y + bdy) + offy[p];
                            const T px = static_cast<T>(xo + bdx) + offx[p];
                            const SampleGeom<T> s = sample_geom(H, W, py, px);
                            T dpy_acc = T(0), dpx_acc = T(0), dmask_acc = T(0);
                            for (int c = gr * cpg; c < (gr + 1) * cpg; ++c) {
                                const T* plane = fv->data.data() + static_cast<size_t>(c) * hw;
                                const T v00 = s.i00 ? plane[s.o00] : T(0);
                                const T v01 = s.i01 ? plane[s.o01] : T(0);
                                const T v10 = s.i10 ? plane[s.o10] : T(0);
                                const T v11 = s.i11 ? plane[s.o11] : T(0);
                                const T go = g.data[(static_cast<size_t>(k) * C + c) * hw + p];
                                dmask_acc +=
                                    go * (s.w00 * v00 + s.w01 * v01 + s.w10 * v10 + s.w11 * v11);
                                const T dv = go * mk[p];
                                T* dplane = gfeat.data.data() + static_cast<size_t>(c) * hw;
                                if (s.i00) dplane[s.o00] += dv * s.w00;
                                if (s.i01) dplane[s.o01] += dv * s.w01;
                                if (s.i10) dplane[s.o10] += dv * s.w10;
                                if (s.i11) dplane[s.o11] += dv * s.w11;
                                dpy_acc += dv * ((v10 - v00) * (T(1) - s.wx) + (v11 - v01) * s.wx);
                                dpx_acc += dv * ((v01 - v00) * (T(1) - s.wy) + (v11 - v10) * s.wy);
                            }
                            goff.data[offbase + p] += dpy_acc;
                            goff.data[offbase + hw + p] += dpx_acc;
                            gmask.data[mbase + p] += dmask_acc;
                        }
                }
            }
        });
    return o;
}

template <typename T>
Var<T> Graph<T>::charbonnier(const Var<T>& pred, const Var<T>& target, T eps) {
    if (!pred.val().same_shape(target.val()))
        throw ArgumentError("graph: charbonnier shape mismatch");
    if (!(eps > T(0))) throw ArgumentError("graph: charbonnier eps must be positive");
    const size_t n = pred.val().numel();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(pred.val().data[i] - target.val().data[i]);
        acc += std::sqrt(d * d + static_cast<double>(eps));
    }
    Tensor out({1});
    out.data[0] = static_cast<T>(acc / static_cast<double>(n));
    Var<T> o = track_node(std::move(out));
    if (track_)
        record([this, pv = pred.v, tv = target.v, pi = pred.id, oi = o.id, eps, n] {
            const T g = grad_at(oi).data[0];
            Tensor& gp = grad_at(pi);
            for (size_t i = 0; i < n; ++i) {
                const T d = pv->data[i] - tv->data[i];
                gp.data[i] += g * d / (static_cast<T>(n) * std::sqrt(d * d + eps));
            }
        });
    return o;
}

template <typename T>
void Graph<T>::backward(const Var<T>& loss) {
    if (!track_) throw ArgumentError("graph: backward on a non-tracking graph");
    if (ran_backward_) throw ArgumentError("graph: backward ran twice");
    if (loss.val().numel() != 1) throw ArgumentError("graph: backward needs a scalar loss");
    ran_backward_ = true;
    grad_at(loss.id).data[0] = T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    for (auto& [id, sink] : param_sinks_) axpy(*sink, grad_at(id));
}

template <typename T>
const TensorT<T>& Graph<T>::grad(const Var<T>& x) const {
    if (!track_ || x.id < 0) throw ArgumentError("graph: no gradient recorded for this value");
    return grads_[static_cast<size_t>(x.id)];
}

template class Graph<float>;
template class Graph<double>;

} // namespace ovqe
