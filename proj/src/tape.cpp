#include "samslr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace samslr {

namespace {

std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    return st;
}

// Broadcast shape for equal-rank inputs: each dim equal, or 1 on one side.
Shape broadcast_shape(const Shape& a, const Shape& b) {
    if (a.size() != b.size())
        throw input_error("broadcast: rank mismatch " + shape_str(a) + " vs " + shape_str(b));
    Shape out(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] == b[i] || b[i] == 1)
            out[i] = a[i];
        else if (a[i] == 1)
            out[i] = b[i];
        else
            throw input_error("broadcast: incompatible " + shape_str(a) + " vs " + shape_str(b));
    }
    return out;
}

// Iterate over all multi-indices of `shape`, calling fn(out_off, a_off, b_off)
// with strides zeroed along broadcast dims.
template <typename Fn>
void broadcast_iter(const Shape& shape, const Shape& sa, const Shape& sb, Fn fn) {
    const int r = static_cast<int>(shape.size());
    auto sta = row_major_strides(sa);
    auto stb = row_major_strides(sb);
    for (int i = 0; i < r; ++i) {
        if (sa[static_cast<size_t>(i)] == 1 && shape[static_cast<size_t>(i)] != 1) sta[static_cast<size_t>(i)] = 0;
        if (sb[static_cast<size_t>(i)] == 1 && shape[static_cast<size_t>(i)] != 1) stb[static_cast<size_t>(i)] = 0;
    }
    std::vector<int> idx(static_cast<size_t>(r), 0);
    const int64_t total = shape_numel(shape);
    int64_t oa = 0, ob = 0;
    for (int64_t o = 0; o < total; ++o) {
        fn(o, oa, ob);
        for (int i = r - 1; i >= 0; --i) {
            auto ui = static_cast<size_t>(i);
            if (++idx[ui] < shape[ui]) {
                oa += sta[ui];
                ob += stb[ui];
                break;
            }
            oa -= sta[ui] * (shape[ui] - 1);
            ob -= stb[ui] * (shape[ui] - 1);
            idx[ui] = 0;
        }
    }
}

}  // namespace

Tape::Id Tape::push(NdArray value, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{value, NdArray::zeros(value.shape()), std::move(back)});
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::constant(NdArray v) { return push(std::move(v), nullptr); }

Tape::Id Tape::param(const ParamPtr& p) {
    Id id = push(p->value, nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, p](Tape& t) {
        const NdArray& g = t.grad(id);
        for (int64_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    };
    return id;
}

Tape::Id Tape::add(Id a, Id b) {
    const NdArray& va = value(a);
    const NdArray& vb = value(b);
    if (!va.same_shape(vb)) throw input_error("tape add: shape mismatch " + shape_str(va.shape()) + " vs " + shape_str(vb.shape()));
    NdArray out = va;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, b](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& ga = t.grad_mut(a);
        NdArray& gb = t.grad_mut(b);
        for (int64_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    };
    return id;
}

Tape::Id Tape::sub(Id a, Id b) {
    const NdArray& va = value(a);
    const NdArray& vb = value(b);
    if (!va.same_shape(vb)) throw input_error("tape sub: shape mismatch");
    NdArray out = va;
    for (int64_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, b](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& ga = t.grad_mut(a);
        NdArray& gb = t.grad_mut(b);
        for (int64_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    };
    return id;
}

Tape::Id Tape::mul(Id a, Id b) {
    const NdArray& va = value(a);
    const NdArray& vb = value(b);
    if (!va.same_shape(vb)) throw input_error("tape mul: shape mismatch");
    NdArray out = va;
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, b](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& va2 = t.value(a);
        const NdArray& vb2 = t.value(b);
        NdArray& ga = t.grad_mut(a);
        NdArray& gb = t.grad_mut(b);
        for (int64_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * vb2[i];
            gb[i] += g[i] * va2[i];
        }
    };
    return id;
}

Tape::Id Tape::scale(Id a, double s) {
    NdArray out = value(a);
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= s;
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, s](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& ga = t.grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    };
    return id;
}

Tape::Id Tape::reshape(Id a, Shape s) {
    NdArray out = value(a).reshaped(std::move(s));
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& ga = t.grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
    return id;
}

Tape::Id Tape::permute(Id a, const std::vector<int>& axes) {
    const NdArray& va = value(a);
    const int r = va.rank();
    if (static_cast<int>(axes.size()) != r) throw input_error("permute: axes rank mismatch");
    Shape out_shape(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) out_shape[static_cast<size_t>(i)] = va.dim(axes[static_cast<size_t>(i)]);
    auto in_strides = row_major_strides(va.shape());
    NdArray out(out_shape);
    std::vector<int> idx(static_cast<size_t>(r), 0);
    // mapping from output flat offset to input flat offset
    std::vector<int64_t> perm_strides(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) perm_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(axes[static_cast<size_t>(i)])];
    int64_t in_off = 0;
    for (int64_t o = 0; o < out.size(); ++o) {
        out[o] = va[in_off];
        for (int i = r - 1; i >= 0; --i) {
            auto ui = static_cast<size_t>(i);
            if (++idx[ui] < out_shape[ui]) {
                in_off += perm_strides[ui];
                break;
            }
            in_off -= perm_strides[ui] * (out_shape[ui] - 1);
            idx[ui] = 0;
        }
    }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, out_shape, perm_strides, r](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& ga = t.grad_mut(a);
        std::vector<int> ix(static_cast<size_t>(r), 0);
        int64_t in_off2 = 0;
        for (int64_t o = 0; o < g.size(); ++o) {
            ga[in_off2] += g[o];
            for (int i = r - 1; i >= 0; --i) {
                auto ui = static_cast<size_t>(i);
                if (++ix[ui] < out_shape[ui]) {
                    in_off2 += perm_strides[ui];
                    break;
                }
                in_off2 -= perm_strides[ui] * (out_shape[ui] - 1);
                ix[ui] = 0;
            }
        }
    };
    return id;
}

Tape::Id Tape::sigmoid(Id a) {
    NdArray out = value(a);
    for (int64_t i = 0; i < out.size(); ++i) out[i] = samslr::sigmoid(out[i]);
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& y = t.value(id);
        NdArray& ga = t.grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    };
    return id;
}

Tape::Id Tape::swish(Id a) {
    const NdArray& va = value(a);
    NdArray out = va;
    for (int64_t i = 0; i < out.size(); ++i) out[i] = samslr::swish(out[i]);
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& x = t.value(a);
        NdArray& ga = t.grad_mut(a);
        for (int64_t i = 0; i < g.size(); ++i) {
            const double s = samslr::sigmoid(x[i]);
            ga[i] += g[i] * (s + x[i] * s * (1.0 - s));
        }
    };
    return id;
}

Tape::Id Tape::bmul(Id a, Id b) {
    const NdArray& va = value(a);
    const NdArray& vb = value(b);
    Shape os = broadcast_shape(va.shape(), vb.shape());
    NdArray out(os);
    broadcast_iter(os, va.shape(), vb.shape(),
                   [&](int64_t o, int64_t oa, int64_t ob) { out[o] = va[oa] * vb[ob]; });
    Shape sa = va.shape(), sb = vb.shape();  // copy before push: push may invalidate va/vb
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, b, os, sa, sb](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& xa = t.value(a);
        const NdArray& xb = t.value(b);
        NdArray& ga = t.grad_mut(a);
        NdArray& gb = t.grad_mut(b);
        broadcast_iter(os, sa, sb, [&](int64_t o, int64_t oa, int64_t ob) {
            ga[oa] += g[o] * xb[ob];
            gb[ob] += g[o] * xa[oa];
        });
    };
    return id;
}

Tape::Id Tape::badd(Id a, Id b) {
    const NdArray& va = value(a);
    const NdArray& vb = value(b);
    Shape os = broadcast_shape(va.shape(), vb.shape());
    NdArray out(os);
    broadcast_iter(os, va.shape(), vb.shape(),
                   [&](int64_t o, int64_t oa, int64_t ob) { out[o] = va[oa] + vb[ob]; });
    Shape sa = va.shape(), sb = vb.shape();  // copy before push: push may invalidate va/vb
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, b, os, sa, sb](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& ga = t.grad_mut(a);
        NdArray& gb = t.grad_mut(b);
        broadcast_iter(os, sa, sb, [&](int64_t o, int64_t oa, int64_t ob) {
            ga[oa] += g[o];
            gb[ob] += g[o];
        });
    };
    return id;
}

Tape::Id Tape::mean_axes(Id a, const std::vector<int>& axes) {
    const NdArray& va = value(a);
    Shape os = va.shape();
    int64_t count = 1;
    for (int ax : axes) {
        count *= os[static_cast<size_t>(ax)];
        os[static_cast<size_t>(ax)] = 1;
    }
    NdArray out(os);
    broadcast_iter(va.shape(), os, va.shape(), [&](int64_t, int64_t oo, int64_t ia) { out[oo] += va[ia]; });
    for (int64_t i = 0; i < out.size(); ++i) out[i] /= static_cast<double>(count);
    Shape in_shape = va.shape();  // copy before push: push may reallocate nodes_ and invalidate va
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, os, in_shape, count](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& ga = t.grad_mut(a);
        broadcast_iter(in_shape, os, in_shape,
                       [&](int64_t, int64_t oo, int64_t ia) { ga[ia] += g[oo] / static_cast<double>(count); });
    };
    return id;
}

Tape::Id Tape::matmul(Id a, Id b) {
    NdArray out = samslr::matmul(value(a), value(b));
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, a, b](Tape& t) {
        const NdArray& g = t.grad(id);  // [m,n]
        const NdArray& va = t.value(a); // [m,k]
        const NdArray& vb = t.value(b); // [k,n]
        NdArray& ga = t.grad_mut(a);
        NdArray& gb = t.grad_mut(b);
        const int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                double acc = 0.0;
                const double* grow = g.data() + static_cast<int64_t>(i) * n;
                const double* brow = vb.data() + static_cast<int64_t>(p) * n;
                for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                ga[static_cast<int64_t>(i) * k + p] += acc;
            }
        for (int p = 0; p < k; ++p)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i)
                    acc += va[static_cast<int64_t>(i) * k + p] * g[static_cast<int64_t>(i) * n + j];
                gb[static_cast<int64_t>(p) * n + j] += acc;
            }
    };
    return id;
}

Tape::Id Tape::conv_temporal(Id x, Id kernel, int stride) {
    const NdArray& vx = value(x);
    const NdArray& vk = value(kernel);
    if (vx.rank() != 4 || vk.rank() != 3)
        throw input_error("tape conv_temporal: expected x [N,C,T,V], kernel [C',C,kt]");
    const int N = vx.dim(0), C = vx.dim(1), T = vx.dim(2), V = vx.dim(3);
    const int Co = vk.dim(0), kt = vk.dim(2);
    if (vk.dim(1) != C)
        throw input_error("tape conv_temporal: kernel channels " + std::to_string(vk.dim(1)) +
                          " != input channels " + std::to_string(C));
    if (kt % 2 == 0) throw config_error("conv_temporal: kernel size must be odd, got " + std::to_string(kt));
    const int pad = (kt - 1) / 2;
    const int To = (T + 2 * pad - kt) / stride + 1;
    NdArray out({N, Co, To, V});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int to = 0; to < To; ++to) {
                double* orow = out.data() + (((static_cast<int64_t>(n) * Co + co) * To + to) * V);
                for (int c = 0; c < C; ++c)
                    for (int k = 0; k < kt; ++k) {
                        const int t = to * stride - pad + k;
                        if (t < 0 || t >= T) continue;
                        const double w = vk.at({co, c, k});
                        if (w == 0.0) continue;
                        const double* xrow = vx.data() + (((static_cast<int64_t>(n) * C + c) * T + t) * V);
                        for (int v = 0; v < V; ++v) orow[v] += w * xrow[v];
                    }
            }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, x, kernel, stride, N, C, T, V, Co, kt, pad, To](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& vx2 = t.value(x);
        const NdArray& vk2 = t.value(kernel);
        NdArray& gx = t.grad_mut(x);
        NdArray& gk = t.grad_mut(kernel);
        for (int n = 0; n < N; ++n)
            for (int co = 0; co < Co; ++co)
                for (int to = 0; to < To; ++to) {
                    const double* grow = g.data() + (((static_cast<int64_t>(n) * Co + co) * To + to) * V);
                    for (int c = 0; c < C; ++c)
                        for (int k = 0; k < kt; ++k) {
                            const int tt = to * stride - pad + k;
                            if (tt < 0 || tt >= T) continue;
                            const double w = vk2.at({co, c, k});
                            const double* xrow = vx2.data() + (((static_cast<int64_t>(n) * C + c) * T + tt) * V);
                            double* gxrow = gx.data() + (((static_cast<int64_t>(n) * C + c) * T + tt) * V);
                            double acc = 0.0;
                            for (int v = 0; v < V; ++v) {
                                gxrow[v] += w * grow[v];
                                acc += xrow[v] * grow[v];
                            }
                            gk.at({co, c, k}) += acc;
                        }
                }
    };
    return id;
}

Tape::Id Tape::pool_avg_temporal(Id x) {
    const NdArray& vx = value(x);
    if (vx.rank() != 4) throw input_error("tape pool_avg_temporal: expected [N,C,T,V]");
    const int N = vx.dim(0), C = vx.dim(1), T = vx.dim(2), V = vx.dim(3);
    NdArray out({N, C, V});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int v = 0; v < V; ++v) {
                double acc = 0.0;
                for (int t = 0; t < T; ++t) acc += vx.at({n, c, t, v});
                out.at({n, c, v}) = acc / T;
            }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, x, N, C, T, V](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& gx = t.grad_mut(x);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int v = 0; v < V; ++v) {
                    const double gv = g.at({n, c, v}) / T;
                    for (int tt = 0; tt < T; ++tt) gx.at({n, c, tt, v}) += gv;
                }
    };
    return id;
}

Tape::Id Tape::conv2d(Id x, Id kernel, int groups, int pad) {
    const NdArray& vx = value(x);
    const NdArray& vk = value(kernel);
    if (vx.rank() != 4 || vk.rank() != 4)
        throw input_error("conv2d: expected x [N,C,H,W], kernel [Co,Ci/g,kh,kw]");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    const int Co = vk.dim(0), Cig = vk.dim(1), kh = vk.dim(2), kw = vk.dim(3);
    if (groups < 1 || C % groups != 0 || Co % groups != 0)
        throw config_error("conv2d: group count " + std::to_string(groups) + " must divide channels " +
                           std::to_string(C) + " and " + std::to_string(Co));
    if (Cig != C / groups) throw config_error("conv2d: kernel expects " + std::to_string(Cig) + " channels per group");
    const int Ho = H + 2 * pad - kh + 1;
    const int Wo = W + 2 * pad - kw + 1;
    if (Ho < 1 || Wo < 1) throw config_error("conv2d: kernel larger than padded input");
    const int cog = Co / groups;
    NdArray out({N, Co, Ho, Wo});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
            const int gidx = co / cog;
            for (int ho = 0; ho < Ho; ++ho)
                for (int wo = 0; wo < Wo; ++wo) {
                    double acc = 0.0;
                    for (int cl = 0; cl < Cig; ++cl) {
                        const int c = gidx * Cig + cl;
                        for (int i = 0; i < kh; ++i) {
                            const int h = ho - pad + i;
                            if (h < 0 || h >= H) continue;
                            for (int j = 0; j < kw; ++j) {
                                const int w = wo - pad + j;
                                if (w < 0 || w >= W) continue;
                                acc += vx.at({n, c, h, w}) * vk.at({co, cl, i, j});
                            }
                        }
                    }
                    out.at({n, co, ho, wo}) = acc;
                }
        }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, x, kernel, N, C, H, W, Co, Cig, kh, kw, pad, Ho, Wo, cog](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& vx2 = t.value(x);
        const NdArray& vk2 = t.value(kernel);
        NdArray& gx = t.grad_mut(x);
        NdArray& gk = t.grad_mut(kernel);
        for (int n = 0; n < N; ++n)
            for (int co = 0; co < Co; ++co) {
                const int gidx = co / cog;
                for (int ho = 0; ho < Ho; ++ho)
                    for (int wo = 0; wo < Wo; ++wo) {
                        const double gv = g.at({n, co, ho, wo});
                        if (gv == 0.0) continue;
                        for (int cl = 0; cl < Cig; ++cl) {
                            const int c = gidx * Cig + cl;
                            for (int i = 0; i < kh; ++i) {
                                const int h = ho - pad + i;
                                if (h < 0 || h >= H) continue;
                                for (int j = 0; j < kw; ++j) {
                                    const int w = wo - pad + j;
                                    if (w < 0 || w >= W) continue;
                                    gx.at({n, c, h, w}) += gv * vk2.at({co, cl, i, j});
                                    gk.at({co, cl, i, j}) += gv * vx2.at({n, c, h, w});
                                }
                            }
                        }
                    }
            }
    };
    return id;
}

Tape::Id Tape::node_mix(Id x, Id adj) {
    const NdArray& vx = value(x);
    const NdArray& va = value(adj);
    if (vx.rank() != 4 || va.rank() != 3)
        throw input_error("node_mix: expected x [N,C,T,V], adj [G,V,V]");
    const int N = vx.dim(0), C = vx.dim(1), T = vx.dim(2), V = vx.dim(3);
    const int G = va.dim(0);
    if (va.dim(1) != V || va.dim(2) != V) throw config_error("node_mix: adjacency node count mismatch");
    if (C % G != 0)
        throw config_error("node_mix: channel count " + std::to_string(C) + " not divisible by group count " +
                           std::to_string(G));
    const int cpg = C / G;
    NdArray out({N, C, T, V});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const int g = c / cpg;
            for (int t = 0; t < T; ++t) {
                const double* xrow = vx.data() + (((static_cast<int64_t>(n) * C + c) * T + t) * V);
                double* orow = out.data() + (((static_cast<int64_t>(n) * C + c) * T + t) * V);
                for (int u = 0; u < V; ++u) {
                    const double xv = xrow[u];
                    if (xv == 0.0) continue;
                    const double* arow = va.data() + ((static_cast<int64_t>(g) * V + u) * V);
                    for (int v = 0; v < V; ++v) orow[v] += xv * arow[v];
                }
            }
        }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, x, adj, N, C, T, V, cpg](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& vx2 = t.value(x);
        const NdArray& va2 = t.value(adj);
        NdArray& gx = t.grad_mut(x);
        NdArray& ga = t.grad_mut(adj);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const int gi = c / cpg;
                for (int tt = 0; tt < T; ++tt) {
                    const double* grow = g.data() + (((static_cast<int64_t>(n) * C + c) * T + tt) * V);
                    const double* xrow = vx2.data() + (((static_cast<int64_t>(n) * C + c) * T + tt) * V);
                    double* gxrow = gx.data() + (((static_cast<int64_t>(n) * C + c) * T + tt) * V);
                    for (int u = 0; u < V; ++u) {
                        const double* arow = va2.data() + ((static_cast<int64_t>(gi) * V + u) * V);
                        double* garow = ga.data() + ((static_cast<int64_t>(gi) * V + u) * V);
                        double acc = 0.0;
                        for (int v = 0; v < V; ++v) {
                            acc += grow[v] * arow[v];
                            garow[v] += grow[v] * xrow[u];
                        }
                        gxrow[u] += acc;
                    }
                }
            }
    };
    return id;
}

Tape::Id Tape::channel_norm(Id x, Id gamma, Id beta, NormState& state, bool training,
                            double momentum, double eps) {
    const NdArray& vx = value(x);
    if (vx.rank() != 4) throw input_error("channel_norm: expected rank-4 input");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    if (value(gamma).size() != C || value(beta).size() != C)
        throw config_error("channel_norm: scale/offset size must equal channel count");
    const int64_t cnt = static_cast<int64_t>(N) * H * W;
    NdArray mean({C}), var({C});
    if (training) {
        for (int c = 0; c < C; ++c) {
            double m = 0.0;
            for (int n = 0; n < N; ++n)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) m += vx.at({n, c, h, w});
            m /= static_cast<double>(cnt);
            double v = 0.0;
            for (int n = 0; n < N; ++n)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        const double d = vx.at({n, c, h, w}) - m;
                        v += d * d;
                    }
            v /= static_cast<double>(cnt);
            mean[c] = m;
            var[c] = v;
            state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * m;
            state.running_var[c] = (1.0 - momentum) * state.running_var[c] + momentum * v;
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }
    const NdArray& vg = value(gamma);
    const NdArray& vb = value(beta);
    NdArray out({N, C, H, W});
    NdArray xhat({N, C, H, W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double inv = 1.0 / std::sqrt(var[c] + eps);
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double xh = (vx.at({n, c, h, w}) - mean[c]) * inv;
                    xhat.at({n, c, h, w}) = xh;
                    out.at({n, c, h, w}) = vg[c] * xh + vb[c];
                }
        }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, x, gamma, beta, xhat, var, eps, training, N, C, H, W, cnt](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& vg2 = t.value(gamma);
        NdArray& gx = t.grad_mut(x);
        NdArray& gg = t.grad_mut(gamma);
        NdArray& gb = t.grad_mut(beta);
        for (int c = 0; c < C; ++c) {
            const double inv = 1.0 / std::sqrt(var[c] + eps);
            double sum_g = 0.0, sum_gx = 0.0;
            for (int n = 0; n < N; ++n)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        const double gv = g.at({n, c, h, w});
                        sum_g += gv;
                        sum_gx += gv * xhat.at({n, c, h, w});
                    }
            gg[c] += sum_gx;
            gb[c] += sum_g;
            if (training) {
                const double mg = sum_g / static_cast<double>(cnt);
                const double mgx = sum_gx / static_cast<double>(cnt);
                for (int n = 0; n < N; ++n)
                    for (int h = 0; h < H; ++h)
                        for (int w = 0; w < W; ++w)
                            gx.at({n, c, h, w}) +=
                                vg2[c] * inv * (g.at({n, c, h, w}) - mg - xhat.at({n, c, h, w}) * mgx);
            } else {
                for (int n = 0; n < N; ++n)
                    for (int h = 0; h < H; ++h)
                        for (int w = 0; w < W; ++w) gx.at({n, c, h, w}) += vg2[c] * inv * g.at({n, c, h, w});
            }
        }
    };
    return id;
}

Tape::Id Tape::layer_norm(Id x, Id gamma, Id beta, double eps) {
    const NdArray& vx = value(x);
    if (vx.rank() != 2) throw input_error("layer_norm: expected [rows, features]");
    const int R = vx.dim(0), F = vx.dim(1);
    if (value(gamma).size() != F || value(beta).size() != F)
        throw config_error("layer_norm: scale/offset size must equal feature count");
    const NdArray& vg = value(gamma);
    const NdArray& vb = value(beta);
    NdArray out({R, F}), xhat({R, F}), inv_sd({R});
    for (int r = 0; r < R; ++r) {
        double m = 0.0;
        for (int f = 0; f < F; ++f) m += vx.at({r, f});
        m /= F;
        double v = 0.0;
        for (int f = 0; f < F; ++f) {
            const double d = vx.at({r, f}) - m;
            v += d * d;
        }
        v /= F;
        const double inv = 1.0 / std::sqrt(v + eps);
        inv_sd[r] = inv;
        for (int f = 0; f < F; ++f) {
            const double xh = (vx.at({r, f}) - m) * inv;
            xhat.at({r, f}) = xh;
            out.at({r, f}) = vg[f] * xh + vb[f];
        }
    }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, x, gamma, beta, xhat, inv_sd, R, F](Tape& t) {
        const NdArray& g = t.grad(id);
        const NdArray& vg2 = t.value(gamma);
        NdArray& gx = t.grad_mut(x);
        NdArray& gg = t.grad_mut(gamma);
        NdArray& gb = t.grad_mut(beta);
        for (int r = 0; r < R; ++r) {
            double sum_h = 0.0, sum_hx = 0.0;
            for (int f = 0; f < F; ++f) {
                const double h = g.at({r, f}) * vg2[f];
                sum_h += h;
                sum_hx += h * xhat.at({r, f});
                gg[f] += g.at({r, f}) * xhat.at({r, f});
                gb[f] += g.at({r, f});
            }
            const double mh = sum_h / F;
            const double mhx = sum_hx / F;
            for (int f = 0; f < F; ++f)
                gx.at({r, f}) += inv_sd[r] * (g.at({r, f}) * vg2[f] - mh - xhat.at({r, f}) * mhx);
        }
    };
    return id;
}

Tape::Id Tape::smoothed_ce(Id logits, const std::vector<int>& labels, double epsilon) {
    const NdArray& vl = value(logits);
    if (vl.rank() != 2) throw input_error("smoothed_ce: expected logits [N,K]");
    const int N = vl.dim(0), K = vl.dim(1);
    if (static_cast<int>(labels.size()) != N) throw input_error("smoothed_ce: label count mismatch");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw config_error("smoothed_ce: epsilon must be in [0,1)");
    for (int y : labels)
        if (y < 0 || y >= K) throw input_error("smoothed_ce: label out of range");
    if (!vl.all_finite()) throw numeric_error("smoothed_ce: non-finite logits");
    NdArray probs({N, K});
    double loss = 0.0;
    for (int n = 0; n < N; ++n) {
        double mx = vl.at({n, 0});
        for (int k = 1; k < K; ++k) mx = std::max(mx, vl.at({n, k}));
        double se = 0.0;
        for (int k = 0; k < K; ++k) se += std::exp(vl.at({n, k}) - mx);
        const double lse = mx + std::log(se);
        double dot = 0.0;
        for (int k = 0; k < K; ++k) {
            probs.at({n, k}) = std::exp(vl.at({n, k}) - lse);
            const double q = (k == labels[static_cast<size_t>(n)] ? 1.0 - epsilon : 0.0) + epsilon / K;
            dot += q * vl.at({n, k});
        }
        loss += lse - dot;
    }
    loss /= N;
    Id id = push(NdArray({1}, {loss}), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, logits, probs, labels, epsilon, N, K](Tape& t) {
        const double g = t.grad(id)[0];
        NdArray& gl = t.grad_mut(logits);
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < K; ++k) {
                const double q = (k == labels[static_cast<size_t>(n)] ? 1.0 - epsilon : 0.0) + epsilon / K;
                gl.at({n, k}) += g * (probs.at({n, k}) - q) / N;
            }
    };
    return id;
}

Tape::Id Tape::weighted_modal_sum(Id weights, std::vector<NdArray> mods) {
    const NdArray& vw = value(weights);
    if (vw.rank() != 2) throw input_error("weighted_modal_sum: expected weights [S,M]");
    const int S = vw.dim(0), M = vw.dim(1);
    if (static_cast<int>(mods.size()) != M) throw fusion_error("weighted_modal_sum: modality count mismatch");
    const int C = mods[0].dim(1);
    for (const auto& m : mods)
        if (m.rank() != 2 || m.dim(0) != S || m.dim(1) != C)
            throw fusion_error("weighted_modal_sum: modality shape mismatch");
    NdArray out({S, C});
    for (int s = 0; s < S; ++s)
        for (int m = 0; m < M; ++m) {
            const double w = vw.at({s, m});
            for (int c = 0; c < C; ++c) out.at({s, c}) += w * mods[static_cast<size_t>(m)].at({s, c});
        }
    Id id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [id, weights, mods, S, M, C](Tape& t) {
        const NdArray& g = t.grad(id);
        NdArray& gw = t.grad_mut(weights);
        for (int s = 0; s < S; ++s)
            for (int m = 0; m < M; ++m) {
                double acc = 0.0;
                for (int c = 0; c < C; ++c) acc += g.at({s, c}) * mods[static_cast<size_t>(m)].at({s, c});
                gw.at({s, m}) += acc;
            }
    };
    return id;
}

void Tape::backward(Id loss_id) {
    NdArray& seed = grad_mut(loss_id);
    for (int64_t i = 0; i < seed.size(); ++i) seed[i] = 1.0;
    for (Id i = loss_id; i >= 0; --i) {
        auto& node = nodes_[static_cast<size_t>(i)];
        if (node.back) node.back(*this);
    }
}

double grad_check(const std::function<double()>& loss_fn, ParamSet& params, double eps,
                  int max_coords_per_param, unsigned seed) {
    params.zero_grad();
    const double base = loss_fn();
    if (!std::isfinite(base)) throw numeric_error("grad_check: non-finite loss");
    // snapshot analytic grads
    std::vector<NdArray> analytic;
    analytic.reserve(params.items.size());
    for (const auto& p : params.items) analytic.push_back(p->grad);

    std::mt19937 rng(seed);
    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.items.size(); ++pi) {
        Param& p = *params.items[pi];
        const int64_t n = p.value.size();
        std::vector<int64_t> coords;
        if (n <= max_coords_per_param) {
            for (int64_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            std::uniform_int_distribution<int64_t> dist(0, n - 1);
            for (int i = 0; i < max_coords_per_param; ++i) coords.push_back(dist(rng));
        }
        for (int64_t ci : coords) {
            const double orig = p.value[ci];
            p.value[ci] = orig + eps;
            params.zero_grad();
            const double lp = loss_fn();
            p.value[ci] = orig - eps;
            params.zero_grad();
            const double lm = loss_fn();
            p.value[ci] = orig;
            if (!std::isfinite(lp) || !std::isfinite(lm)) throw numeric_error("grad_check: non-finite loss");
            const double numeric = (lp - lm) / (2.0 * eps);
            const double rel = std::fabs(analytic[pi][ci] - numeric) / std::max(1.0, std::fabs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    // leave the params with their analytic grads restored
    params.zero_grad();
    loss_fn();
    return max_rel;
}

}  // namespace samslr
