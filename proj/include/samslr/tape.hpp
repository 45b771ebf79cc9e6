#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "samslr/ndarray.hpp"

namespace samslr {

// A trainable parameter with its gradient buffer. Gradients accumulate
// across backward passes until zero_grad().
struct Param {
    std::string name;
    NdArray value;
    NdArray grad;

    Param() = default;
    Param(std::string n, NdArray v) : name(std::move(n)), value(v), grad(NdArray::zeros(v.shape())) {}
    void zero_grad() { grad = NdArray::zeros(value.shape()); }
};

using ParamPtr = std::shared_ptr<Param>;

struct ParamSet {
    std::vector<ParamPtr> items;

    ParamPtr make(const std::string& name, NdArray v) {
        auto p = std::make_shared<Param>(name, std::move(v));
        items.push_back(p);
        return p;
    }
    void add(const ParamPtr& p) { items.push_back(p); }
    void append(const ParamSet& other) {
        for (const auto& p : other.items) items.push_back(p);
    }
    void zero_grad() {
        for (auto& p : items) p->zero_grad();
    }
    int64_t count() const {
        int64_t n = 0;
        for (const auto& p : items) n += p->value.size();
        return n;
    }
};

// Running statistics for batch-style normalization layers.
struct NormState {
    NdArray running_mean;
    NdArray running_var;
    explicit NormState(int channels)
        : running_mean(NdArray::zeros({channels})), running_var(NdArray::full({channels}, 1.0)) {}
};

// Reverse-mode tape. Ops append nodes holding forward values; backward()
// replays recorded closures in reverse and accumulates into Param::grad
// for every registered parameter leaf.
class Tape {
public:
    using Id = int;

    Id constant(NdArray v);
    Id param(const ParamPtr& p);

    const NdArray& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
    const NdArray& grad(Id id) const { return nodes_[static_cast<size_t>(id)].grad; }

    // elementwise / shape
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id scale(Id a, double s);
    Id reshape(Id a, Shape s);
    Id permute(Id a, const std::vector<int>& axes);
    Id sigmoid(Id a);
    Id swish(Id a);
    // b broadcasts against a: equal rank, every dim equal or 1 on either side
    // (result takes the max extent per dim).
    Id bmul(Id a, Id b);
    Id badd(Id a, Id b);
    // mean over the given axes, keeping them as size-1 dims
    Id mean_axes(Id a, const std::vector<int>& axes);

    // linear algebra / convolution
    Id matmul(Id a, Id b);
    Id conv_temporal(Id x, Id kernel, int stride);     // x [N,C,T,V], k [C',C,kt]
    Id pool_avg_temporal(Id x);                        // [N,C,T,V] -> [N,C,V]
    Id conv2d(Id x, Id kernel, int groups, int pad);   // x [N,C,H,W], k [Co,Ci/g,kh,kw]
    // y[n,c,t,v] = sum_u x[n,c,t,u] * A[group(c),u,v]; adj [G,V,V], G | C
    Id node_mix(Id x, Id adj);

    // normalization
    Id channel_norm(Id x, Id gamma, Id beta, NormState& state, bool training,
                    double momentum = 0.1, double eps = 1e-5);
    Id layer_norm(Id x, Id gamma, Id beta, double eps = 1e-5);  // x [R,F]

    // losses / fusion
    // logits [N,K]; returns scalar [1]: mean over rows of H(q', p)
    Id smoothed_ce(Id logits, const std::vector<int>& labels, double epsilon);
    // weights [S,M]; mods[i] constant [S,C]; grad flows to weights only
    Id weighted_modal_sum(Id weights, std::vector<NdArray> mods);

    void backward(Id loss_id);

private:
    struct Node {
        NdArray value;
        NdArray grad;
        std::function<void(Tape&)> back;
    };

    Id push(NdArray value, std::function<void(Tape&)> back);
    NdArray& grad_mut(Id id) { return nodes_[static_cast<size_t>(id)].grad; }

    std::vector<Node> nodes_;
};

// Max relative error between analytic gradients and central finite
// differences over sampled coordinates of every parameter in `params`.
// `loss_fn` must rebuild its tape, call backward, and leave accumulated
// gradients in the params (grads are zeroed here before each call).
double grad_check(const std::function<double()>& loss_fn, ParamSet& params,
                  double eps = 1e-4, int max_coords_per_param = 24,
                  unsigned seed = 12345);

}  // namespace samslr
