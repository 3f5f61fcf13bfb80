#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "mln/core/tensor.hpp"

namespace mln::core {

// Reverse-mode autodiff over Tensor<S>. One Tape owns the values and
// gradients of a single forward graph; graphs are rebuilt per step.
template <typename S>
class Tape {
public:
    using Var = int32_t;
    // Backward closure: receives the tape and the node's own index.
    using BackwardFn = std::function<void(Tape&, Var)>;

    struct Node {
        Tensor<S> value;
        Tensor<S> grad;
        BackwardFn backward;
        bool requires_grad = false;
        bool grad_ready = false;
    };

    Var leaf(Tensor<S> value, bool requires_grad) {
        nodes_.push_back(Node{std::move(value), {}, nullptr, requires_grad, false});
        return static_cast<Var>(nodes_.size() - 1);
    }

    Var constant(Tensor<S> value) { return leaf(std::move(value), false); }

    Var emit(Tensor<S> value, bool requires_grad, BackwardFn backward) {
        nodes_.push_back(Node{std::move(value), {}, std::move(backward), requires_grad, false});
        return static_cast<Var>(nodes_.size() - 1);
    }

    const Tensor<S>& value(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
    Tensor<S>& value(Var v) { return nodes_[static_cast<size_t>(v)].value; }

    bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v)].requires_grad; }

    // Gradient buffer, zero-initialized on first touch.
    Tensor<S>& grad(Var v) {
        Node& n = nodes_[static_cast<size_t>(v)];
        if (!n.grad_ready) {
            n.grad = Tensor<S>(n.value.shape);
            n.grad_ready = true;
        }
        return n.grad;
    }

    bool has_grad(Var v) const { return nodes_[static_cast<size_t>(v)].grad_ready; }

    void backward(Var loss, S seed = S(1)) {
        if (value(loss).numel() != 1)
            throw ShapeError("backward: loss must be a scalar node");
        grad(loss).data[0] += seed;
        for (int32_t i = static_cast<int32_t>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.backward && n.requires_grad && n.grad_ready) n.backward(*this, i);
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

namespace eig {
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Map = Eigen::Map<Mat<S>>;
template <typename S>
using CMap = Eigen::Map<const Mat<S>>;
}  // namespace eig

namespace ops {

template <typename S>
using Var = typename Tape<S>::Var;

// out = a + b, same shape
template <typename S>
Var<S> add(Tape<S>& t, Var<S> a, Var<S> b) {
    const auto& va = t.value(a);
    const auto& vb = t.value(b);
    if (!va.same_shape(vb)) throw ShapeError("add: shape mismatch");
    Tensor<S> out = va;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += vb.data[i];
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [a, b](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        if (tp.requires_grad(a)) {
            auto& ga = tp.grad(a);
            for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }
        if (tp.requires_grad(b)) {
            auto& gb = tp.grad(b);
            for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
        }
    });
}

// out[r, :] = x[r, :] + bias
template <typename S>
Var<S> add_rowvec(Tape<S>& t, Var<S> x, Var<S> bias) {
    const auto& vx = t.value(x);
    const auto& vb = t.value(bias);
    const int64_t cols = vx.last_dim();
    if (vb.numel() != cols) throw ShapeError("add_rowvec: bias length mismatch");
    Tensor<S> out = vx;
    const int64_t rows = vx.rows();
    for (int64_t r = 0; r < rows; ++r) {
        S* p = out.ptr() + r * cols;
        for (int64_t c = 0; c < cols; ++c) p[c] += vb.data[static_cast<size_t>(c)];
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(bias);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x, bias, rows, cols](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        if (tp.requires_grad(x)) {
            auto& gx = tp.grad(x);
            for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
        }
        if (tp.requires_grad(bias)) {
            auto& gb = tp.grad(bias);
            for (int64_t r = 0; r < rows; ++r) {
                const S* p = g.ptr() + r * cols;
                for (int64_t c = 0; c < cols; ++c) gb.data[static_cast<size_t>(c)] += p[c];
            }
        }
    });
}

template <typename S>
Var<S> scale(Tape<S>& t, Var<S> x, S c) {
    Tensor<S> out = t.value(x);
    for (S& v : out.data) v *= c;
    const bool rg = t.requires_grad(x);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x, c](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        auto& gx = tp.grad(x);
        for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += c * g.data[i];
    });
}

// C[M,N] = A[M,K] * B[K,N]
template <typename S>
Var<S> matmul(Tape<S>& t, Var<S> a, Var<S> b) {
    const auto& va = t.value(a);
    const auto& vb = t.value(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(va.shape) + " x " + shape_str(vb.shape));
    const int64_t M = va.dim(0), K = va.dim(1), N = vb.dim(1);
    Tensor<S> out({M, N});
    eig::Map<S>(out.ptr(), M, N).noalias() =
        eig::CMap<S>(va.ptr(), M, K) * eig::CMap<S>(vb.ptr(), K, N);
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [a, b, M, K, N](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        eig::CMap<S> G(g.ptr(), M, N);
        if (tp.requires_grad(a)) {
            eig::Map<S>(tp.grad(a).ptr(), M, K).noalias() +=
                G * eig::CMap<S>(tp.value(b).ptr(), K, N).transpose();
        }
        if (tp.requires_grad(b)) {
            eig::Map<S>(tp.grad(b).ptr(), K, N).noalias() +=
                eig::CMap<S>(tp.value(a).ptr(), M, K).transpose() * G;
        }
    });
}

// Batched matmul. A is [B,M,K]; B is [B,K,N], or [B,N,K] when trans_b.
template <typename S>
Var<S> bmm(Tape<S>& t, Var<S> a, Var<S> b, bool trans_b = false) {
    const auto& va = t.value(a);
    const auto& vb = t.value(b);
    if (va.rank() != 3 || vb.rank() != 3 || va.dim(0) != vb.dim(0))
        throw ShapeError("bmm: rank/batch mismatch");
    const int64_t B = va.dim(0), M = va.dim(1), K = va.dim(2);
    const int64_t N = trans_b ? vb.dim(1) : vb.dim(2);
    const int64_t bk = trans_b ? vb.dim(2) : vb.dim(1);
    if (bk != K) throw ShapeError("bmm: inner dim mismatch");
    Tensor<S> out({B, M, N});
    for (int64_t i = 0; i < B; ++i) {
        eig::CMap<S> A(va.ptr() + i * M * K, M, K);
        eig::Map<S> O(out.ptr() + i * M * N, M, N);
        if (trans_b) {
            eig::CMap<S> Bm(vb.ptr() + i * N * K, N, K);
            O.noalias() = A * Bm.transpose();
        } else {
            eig::CMap<S> Bm(vb.ptr() + i * K * N, K, N);
            O.noalias() = A * Bm;
        }
    }
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [a, b, B, M, K, N, trans_b](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        const auto& va = tp.value(a);
        const auto& vb = tp.value(b);
        const bool need_a = tp.requires_grad(a);
        const bool need_b = tp.requires_grad(b);
        for (int64_t i = 0; i < B; ++i) {
            eig::CMap<S> G(g.ptr() + i * M * N, M, N);
            eig::CMap<S> A(va.ptr() + i * M * K, M, K);
            if (trans_b) {
                eig::CMap<S> Bm(vb.ptr() + i * N * K, N, K);
                if (need_a)
                    eig::Map<S>(tp.grad(a).ptr() + i * M * K, M, K).noalias() += G * Bm;
                if (need_b)
                    eig::Map<S>(tp.grad(b).ptr() + i * N * K, N, K).noalias() += G.transpose() * A;
            } else {
                eig::CMap<S> Bm(vb.ptr() + i * K * N, K, N);
                if (need_a)
                    eig::Map<S>(tp.grad(a).ptr() + i * M * K, M, K).noalias() += G * Bm.transpose();
                if (need_b)
                    eig::Map<S>(tp.grad(b).ptr() + i * K * N, K, N).noalias() += A.transpose() * G;
            }
        }
    });
}

// Bijective element permutation: out.data[i] = x.data[map[i]].
// The map is owned by the caller and must outlive the tape.
template <typename S>
Var<S> gather(Tape<S>& t, Var<S> x, const std::vector<int64_t>* map, std::vector<int64_t> out_shape) {
    const auto& vx = t.value(x);
    if (static_cast<int64_t>(map->size()) != Tensor<S>::numel_of(out_shape))
        throw ShapeError("gather: map size does not match output shape");
    Tensor<S> out(std::move(out_shape));
    for (size_t i = 0; i < map->size(); ++i) out.data[i] = vx.data[static_cast<size_t>((*map)[i])];
    const bool rg = t.requires_grad(x);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x, map](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        auto& gx = tp.grad(x);
        for (size_t i = 0; i < map->size(); ++i)
            gx.data[static_cast<size_t>((*map)[i])] += g.data[i];
    });
}

// [R,Ca] ++ [R,Cb] -> [R,Ca+Cb]
template <typename S>
Var<S> concat_cols(Tape<S>& t, Var<S> a, Var<S> b) {
    const auto& va = t.value(a);
    const auto& vb = t.value(b);
    if (va.rank() != 2 || vb.rank() != 2 || va.dim(0) != vb.dim(0))
        throw ShapeError("concat_cols: row mismatch");
    const int64_t R = va.dim(0), Ca = va.dim(1), Cb = vb.dim(1);
    Tensor<S> out({R, Ca + Cb});
    for (int64_t r = 0; r < R; ++r) {
        std::copy_n(va.ptr() + r * Ca, Ca, out.ptr() + r * (Ca + Cb));
        std::copy_n(vb.ptr() + r * Cb, Cb, out.ptr() + r * (Ca + Cb) + Ca);
    }
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [a, b, R, Ca, Cb](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        if (tp.requires_grad(a)) {
            auto& ga = tp.grad(a);
            for (int64_t r = 0; r < R; ++r)
                for (int64_t c = 0; c < Ca; ++c)
                    ga.data[static_cast<size_t>(r * Ca + c)] += g.data[static_cast<size_t>(r * (Ca + Cb) + c)];
        }
        if (tp.requires_grad(b)) {
            auto& gb = tp.grad(b);
            for (int64_t r = 0; r < R; ++r)
                for (int64_t c = 0; c < Cb; ++c)
                    gb.data[static_cast<size_t>(r * Cb + c)] += g.data[static_cast<size_t>(r * (Ca + Cb) + Ca + c)];
        }
    });
}

// columns [c0, c1) of a 2-D tensor
template <typename S>
Var<S> slice_cols(Tape<S>& t, Var<S> x, int64_t c0, int64_t c1) {
    const auto& vx = t.value(x);
    if (vx.rank() != 2 || c0 < 0 || c1 > vx.dim(1) || c0 >= c1)
        throw ShapeError("slice_cols: bad range");
    const int64_t R = vx.dim(0), C = vx.dim(1), W = c1 - c0;
    Tensor<S> out({R, W});
    for (int64_t r = 0; r < R; ++r)
        std::copy_n(vx.ptr() + r * C + c0, W, out.ptr() + r * W);
    const bool rg = t.requires_grad(x);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x, R, C, W, c0](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        auto& gx = tp.grad(x);
        for (int64_t r = 0; r < R; ++r)
            for (int64_t c = 0; c < W; ++c)
                gx.data[static_cast<size_t>(r * C + c0 + c)] += g.data[static_cast<size_t>(r * W + c)];
    });
}

template <typename S>
Var<S> reshape(Tape<S>& t, Var<S> x, std::vector<int64_t> new_shape) {
    const auto& vx = t.value(x);
    if (Tensor<S>::numel_of(new_shape) != vx.numel())
        throw ShapeError("reshape: element count mismatch");
    Tensor<S> out(std::move(new_shape), vx.data);
    const bool rg = t.requires_grad(x);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        auto& gx = tp.grad(x);
        for (size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i];
    });
}

// GELU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
// Vectorized through Eigen's packet tanh.
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

template <typename S>
Var<S> gelu(Tape<S>& t, Var<S> x) {
    const S kC = static_cast<S>(kGeluC);
    const S kA = static_cast<S>(kGeluA);
    const auto& vx = t.value(x);
    Tensor<S> out(vx.shape);
    using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
    Eigen::Map<const Arr> z(vx.ptr(), vx.numel());
    Eigen::Map<Arr> o(out.ptr(), out.numel());
    o = S(0.5) * z * (S(1) + (kC * (z + kA * z.cube())).tanh());
    const bool rg = t.requires_grad(x);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x, kC, kA](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        const auto& vx = tp.value(x);
        auto& gx = tp.grad(x);
        using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
        Eigen::Map<const Arr> z(vx.ptr(), vx.numel());
        Eigen::Map<const Arr> go(g.ptr(), g.numel());
        Eigen::Map<Arr> gi(gx.ptr(), gx.numel());
        Arr u = kC * (z + kA * z.cube());
        Arr th = u.tanh();
        gi += go * (S(0.5) * (S(1) + th) +
                    S(0.5) * z * (S(1) - th.square()) * kC * (S(1) + S(3) * kA * z.square()));
    });
}

// Row-wise softmax over the last dimension.
template <typename S>
Var<S> softmax_lastdim(Tape<S>& t, Var<S> x) {
    const auto& vx = t.value(x);
    const int64_t C = vx.last_dim();
    const int64_t R = vx.rows();
    Tensor<S> out = vx;
    using ArrXX = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Vec = Eigen::Array<S, Eigen::Dynamic, 1>;
    Eigen::Map<ArrXX> m(out.ptr(), R, C);
    const Vec rowmax = m.rowwise().maxCoeff();
    m.colwise() -= rowmax;
    m = m.exp();
    const Vec rowsum = m.rowwise().sum();
    m.colwise() /= rowsum;
    const bool rg = t.requires_grad(x);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x, R, C](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        const auto& p = tp.value(self);
        auto& gx = tp.grad(x);
        for (int64_t r = 0; r < R; ++r) {
            const S* gp = g.ptr() + r * C;
            const S* pp = p.ptr() + r * C;
            S dot = S(0);
            for (int64_t c = 0; c < C; ++c) dot += gp[c] * pp[c];
            S* gxp = gx.ptr() + r * C;
            for (int64_t c = 0; c < C; ++c) gxp[c] += pp[c] * (gp[c] - dot);
        }
    });
}

// Per-row statistics captured during layer_norm (value-level, not differentiated).
struct RowStats {
    double mean_of_means = 0.0;
    double mean_of_stds = 0.0;
};

// Row-wise layer normalization with affine parameters.
// x: [R,C]; gamma, beta: [C]. eps is added to the variance.
template <typename S>
Var<S> layer_norm(Tape<S>& t, Var<S> x, Var<S> gamma, Var<S> beta, S eps,
                  RowStats* stats = nullptr) {
    const auto& vx = t.value(x);
    const int64_t C = vx.last_dim();
    const int64_t R = vx.rows();
    if (t.value(gamma).numel() != C || t.value(beta).numel() != C)
        throw ShapeError("layer_norm: affine parameter length mismatch");
    if (R < 1 || C < 1) throw ShapeError("layer_norm: empty input");

    Tensor<S> out(vx.shape);
    // xhat is retained for backward
    auto xhat = std::make_shared<Tensor<S>>(vx.shape);
    auto inv_std = std::make_shared<std::vector<S>>(static_cast<size_t>(R));
    const S* gm = t.value(gamma).ptr();
    const S* bt = t.value(beta).ptr();
    double acc_mean = 0.0, acc_std = 0.0;
    for (int64_t r = 0; r < R; ++r) {
        const S* p = vx.ptr() + r * C;
        S mean = S(0);
        for (int64_t c = 0; c < C; ++c) mean += p[c];
        mean /= static_cast<S>(C);
        S var = S(0);
        for (int64_t c = 0; c < C; ++c) {
            const S d = p[c] - mean;
            var += d * d;
        }
        var /= static_cast<S>(C);
        if (!std::isfinite(static_cast<double>(mean)) || !std::isfinite(static_cast<double>(var)))
            throw NumericError("layer_norm: non-finite input statistics");
        const S istd = S(1) / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(r)] = istd;
        S* xh = xhat->ptr() + r * C;
        S* po = out.ptr() + r * C;
        for (int64_t c = 0; c < C; ++c) {
            xh[c] = (p[c] - mean) * istd;
            po[c] = gm[c] * xh[c] + bt[c];
        }
        acc_mean += static_cast<double>(mean);
        acc_std += std::sqrt(static_cast<double>(var));
    }
    if (stats) {
        stats->mean_of_means = acc_mean / static_cast<double>(R);
        stats->mean_of_stds = acc_std / static_cast<double>(R);
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x, gamma, beta, xhat, inv_std, R, C](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        const S* gm = tp.value(gamma).ptr();
        const bool need_x = tp.requires_grad(x);
        const bool need_g = tp.requires_grad(gamma);
        const bool need_b = tp.requires_grad(beta);
        S* ggamma = need_g ? tp.grad(gamma).ptr() : nullptr;
        S* gbeta = need_b ? tp.grad(beta).ptr() : nullptr;
        for (int64_t r = 0; r < R; ++r) {
            const S* gp = g.ptr() + r * C;
            const S* xh = xhat->ptr() + r * C;
            if (need_g || need_b) {
                for (int64_t c = 0; c < C; ++c) {
                    if (need_g) ggamma[c] += gp[c] * xh[c];
                    if (need_b) gbeta[c] += gp[c];
                }
            }
            if (need_x) {
                S m1 = S(0), m2 = S(0);
                for (int64_t c = 0; c < C; ++c) {
                    const S dxh = gp[c] * gm[c];
                    m1 += dxh;
                    m2 += dxh * xh[c];
                }
                m1 /= static_cast<S>(C);
                m2 /= static_cast<S>(C);
                const S istd = (*inv_std)[static_cast<size_t>(r)];
                S* gx = tp.grad(x).ptr() + r * C;
                for (int64_t c = 0; c < C; ++c) {
                    const S dxh = gp[c] * gm[c];
                    gx[c] += istd * (dxh - m1 - xh[c] * m2);
                }
            }
        }
    });
}

// scores[b,i,j] += table[index[i*T+j], b % heads]
// index is owned by the caller; table is a learned [(2M-1)^2, heads] tensor.
template <typename S>
Var<S> add_relpos_bias(Tape<S>& t, Var<S> scores, Var<S> table, const std::vector<int32_t>* index,
                       int64_t heads) {
    const auto& vs = t.value(scores);
    if (vs.rank() != 3) throw ShapeError("add_relpos_bias: scores must be [B,T,T]");
    const int64_t B = vs.dim(0), Ti = vs.dim(1), Tj = vs.dim(2);
    if (static_cast<int64_t>(index->size()) != Ti * Tj)
        throw ShapeError("add_relpos_bias: index size mismatch");
    const auto& vt = t.value(table);
    Tensor<S> out = vs;
    for (int64_t b = 0; b < B; ++b) {
        const int64_t h = b % heads;
        S* p = out.ptr() + b * Ti * Tj;
        for (int64_t ij = 0; ij < Ti * Tj; ++ij)
            p[ij] += vt.data[static_cast<size_t>((*index)[static_cast<size_t>(ij)] * heads + h)];
    }
    const bool rg = t.requires_grad(scores) || t.requires_grad(table);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [scores, table, index, B, Ti, Tj, heads](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        if (tp.requires_grad(scores)) {
            auto& gs = tp.grad(scores);
            for (size_t i = 0; i < g.data.size(); ++i) gs.data[i] += g.data[i];
        }
        if (tp.requires_grad(table)) {
            auto& gt = tp.grad(table);
            for (int64_t b = 0; b < B; ++b) {
                const int64_t h = b % heads;
                const S* p = g.ptr() + b * Ti * Tj;
                for (int64_t ij = 0; ij < Ti * Tj; ++ij)
                    gt.data[static_cast<size_t>((*index)[static_cast<size_t>(ij)] * heads + h)] += p[ij];
            }
        }
    });
}

// scores[b,i,j] += mask[b / heads, i, j]; mask is a fixed tensor.
template <typename S>
Var<S> add_window_mask(Tape<S>& t, Var<S> scores, const Tensor<S>* mask, int64_t heads) {
    const auto& vs = t.value(scores);
    const int64_t B = vs.dim(0), Ti = vs.dim(1), Tj = vs.dim(2);
    if (mask->rank() != 3 || mask->dim(1) != Ti || mask->dim(2) != Tj || mask->dim(0) * heads != B)
        throw ShapeError("add_window_mask: mask shape mismatch");
    Tensor<S> out = vs;
    for (int64_t b = 0; b < B; ++b) {
        S* p = out.ptr() + b * Ti * Tj;
        const S* m = mask->ptr() + (b / heads) * Ti * Tj;
        for (int64_t ij = 0; ij < Ti * Tj; ++ij) p[ij] += m[ij];
    }
    const bool rg = t.requires_grad(scores);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [scores](Tape<S>& tp, Var<S> self) {
        const auto& g = tp.grad(self);
        auto& gs = tp.grad(scores);
        for (size_t i = 0; i < g.data.size(); ++i) gs.data[i] += g.data[i];
    });
}

template <typename S>
Var<S> sum_all(Tape<S>& t, Var<S> x) {
    const auto& vx = t.value(x);
    S s = S(0);
    for (S v : vx.data) s += v;
    Tensor<S> out({1});
    out.data[0] = s;
    const bool rg = t.requires_grad(x);
    return t.emit(std::move(out), rg, !rg ? typename Tape<S>::BackwardFn(nullptr) : [x](Tape<S>& tp, Var<S> self) {
        const S g = tp.grad(self).data[0];
        auto& gx = tp.grad(x);
        for (S& v : gx.data) v += g;
    });
}

}  // namespace ops
}  // namespace mln::core
