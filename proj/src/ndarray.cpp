#include "samslr/ndarray.hpp"

namespace samslr {

NdArray matmul(const NdArray& a, const NdArray& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw input_error("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    NdArray out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = a[static_cast<int64_t>(i) * k + p];
            if (av == 0.0) continue;
            const double* brow = b.data() + static_cast<int64_t>(p) * n;
            double* orow = out.data() + static_cast<int64_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

// x [C,T,V], kernel [C',C,kt], zero padding (kt-1)/2, T' = ceil(T/stride)
NdArray conv_temporal(const NdArray& x, const NdArray& kernel, int stride) {
    if (x.rank() != 3 || kernel.rank() != 3)
        throw input_error("conv_temporal: expected x rank 3 and kernel rank 3");
    const int C = x.dim(0), T = x.dim(1), V = x.dim(2);
    const int Co = kernel.dim(0), Ck = kernel.dim(1), kt = kernel.dim(2);
    if (Ck != C)
        throw input_error("conv_temporal: kernel input channels " + std::to_string(Ck) +
                          " != input channels " + std::to_string(C));
    if (kt % 2 == 0) throw config_error("conv_temporal: kernel size must be odd, got " + std::to_string(kt));
    if (stride < 1) throw config_error("conv_temporal: stride must be >= 1");
    const int pad = (kt - 1) / 2;
    const int To = (T + 2 * pad - kt) / stride + 1;
    NdArray out({Co, To, V});
    for (int co = 0; co < Co; ++co)
        for (int to = 0; to < To; ++to)
            for (int v = 0; v < V; ++v) {
                double acc = 0.0;
                for (int c = 0; c < C; ++c)
                    for (int k = 0; k < kt; ++k) {
                        const int t = to * stride - pad + k;
                        if (t < 0 || t >= T) continue;
                        acc += x.at({c, t, v}) * kernel.at({co, c, k});
                    }
                out.at({co, to, v}) = acc;
            }
    return out;
}

NdArray pool_avg_temporal(const NdArray& x) {
    if (x.rank() != 3) throw input_error("pool_avg_temporal: expected rank 3 [C,T,V]");
    const int C = x.dim(0), T = x.dim(1), V = x.dim(2);
    if (T < 1) throw input_error("pool_avg_temporal: empty temporal axis");
    NdArray out({C, V});
    for (int c = 0; c < C; ++c)
        for (int v = 0; v < V; ++v) {
            double acc = 0.0;
            for (int t = 0; t < T; ++t) acc += x.at({c, t, v});
            out.at({c, v}) = acc / T;
        }
    return out;
}

}  // namespace samslr
