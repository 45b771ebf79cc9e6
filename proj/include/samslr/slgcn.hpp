#pragma once

#include <memory>
#include <vector>

#include "samslr/graph.hpp"
#include "samslr/streams.hpp"
#include "samslr/tape.hpp"

namespace samslr {

struct SLGCNConfig {
    int units = 10;
    std::vector<int> channels = {64, 64, 64, 64, 128, 128, 128, 256, 256, 256};
    std::vector<int> strides = {1, 1, 1, 1, 2, 1, 1, 2, 1, 1};
    int decouple_groups = 8;
    int temporal_kernel = 9;
    double dropgraph_keep_prob = 0.9;
    int classes = 0;
    int in_channels = 3;
    int nodes = kReducedNodeCount;
    PartitionScheme partition = PartitionScheme::SpatialThree;
    bool stc_attention = true;
    bool residual = true;
    bool unit_activation = true;  // Swish at unit output; false = linear

    void validate() const;

    // All-identity ladder: one partition, G=1, k_t=1, no attention, no
    // residual, linear activation. Weights must still be set to identity
    // by the caller (see SLGCNModel::set_identity_weights).
    static SLGCNConfig identity_ladder(int channels_count, int units_count);
};

// STC attention parameters for one unit.
struct STCParams {
    ParamPtr spatial_kernel, spatial_bias;    // conv over node axis
    ParamPtr temporal_kernel, temporal_bias;  // conv over frame axis
    ParamPtr ch_w1, ch_b1, ch_w2, ch_b2;      // squeeze-excite bottleneck
};

struct SLGCNUnitParams {
    std::vector<ParamPtr> partition_weights;  // [C_out, C_in, 1] per partition
    std::vector<ParamPtr> partition_adj;      // [G, V, V] per partition (decoupled, trainable)
    STCParams stc;
    ParamPtr temporal_weights;  // [C_out, C_out, k_t]
    ParamPtr bn_gamma, bn_beta;
    std::unique_ptr<NormState> bn_state;
    ParamPtr res_weights;  // [C_out, C_in, 1] when projection needed
    ParamPtr res_gamma, res_beta;
    std::unique_ptr<NormState> res_state;
};

class SLGCNModel {
public:
    SLGCNModel(SLGCNConfig cfg, const NormalizedAdjacency& adj, const SkeletonGraph& graph, Rng& rng);

    // input [N, C_in, T, V] -> logits [N, classes]
    Tape::Id forward(Tape& tape, const NdArray& input, bool training, Rng* rng = nullptr);

    // input -> features [N, C_last, T', V] (units only, no head)
    Tape::Id backbone_forward(Tape& tape, const NdArray& input, bool training, Rng* rng = nullptr);

    NdArray predict(const NdArray& input);  // eval-mode logits

    ParamSet& params() { return params_; }
    const SLGCNConfig& config() const { return cfg_; }

    // Sets every partition weight, adjacency, and temporal kernel to the
    // identity so the ladder configuration is an identity map.
    void set_identity_weights();

private:
    Tape::Id unit_forward(Tape& tape, Tape::Id x, int unit, bool training, Rng* rng);
    Tape::Id stc_forward(Tape& tape, Tape::Id x, int unit);

    SLGCNConfig cfg_;
    std::vector<NdArray> adj_init_;  // per partition [V,V]
    std::vector<std::vector<int>> neighbors_;  // 1-hop lists for DropGraph
    ParamSet params_;
    ParamPtr in_gamma_, in_beta_;
    std::unique_ptr<NormState> in_state_;
    std::vector<SLGCNUnitParams> units_;
    ParamPtr fc_w_, fc_b_;
};

// Weighted sum of per-stream logit matrices.
NdArray multi_stream_fuse(const std::vector<NdArray>& stream_logits, const std::vector<double>& weights);

}  // namespace samslr
