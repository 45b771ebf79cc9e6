#include "samslr/slgcn.hpp"

#include <cmath>

namespace samslr {

namespace {

NdArray randn(Shape shape, double std, Rng& rng) {
    std::normal_distribution<double> dist(0.0, std);
    NdArray out(std::move(shape));
    for (int64_t i = 0; i < out.size(); ++i) out[i] = dist(rng);
    return out;
}

NdArray identity_pointwise(int c) {
    NdArray k({c, c, 1});
    for (int i = 0; i < c; ++i) k.at({i, i, 0}) = 1.0;
    return k;
}

int odd_at_most(int want, int limit) {
    int k = std::min(want, limit);
    if (k % 2 == 0) --k;
    return std::max(k, 1);
}

}  // namespace

void SLGCNConfig::validate() const {
    if (units < 1) throw config_error("sl_gcn: need at least one unit");
    if (static_cast<int>(channels.size()) != units || static_cast<int>(strides.size()) != units)
        throw config_error("sl_gcn: channels and strides lists must have one entry per unit");
    if (temporal_kernel % 2 == 0) throw config_error("sl_gcn: temporal kernel must be odd");
    if (classes < 1) throw config_error("sl_gcn: class count must be positive");
    if (dropgraph_keep_prob <= 0.0 || dropgraph_keep_prob > 1.0)
        throw config_error("sl_gcn: dropgraph keep probability must be in (0,1]");
    for (int s : strides)
        if (s != 1 && s != 2) throw config_error("sl_gcn: strides must be 1 or 2");
    for (int c : channels)
        if (c % decouple_groups != 0)
            throw config_error("sl_gcn: decouple group count " + std::to_string(decouple_groups) +
                               " must divide channel count " + std::to_string(c));
}

SLGCNConfig SLGCNConfig::identity_ladder(int channels_count, int units_count) {
    SLGCNConfig c;
    c.units = units_count;
    c.channels.assign(static_cast<size_t>(units_count), channels_count);
    c.strides.assign(static_cast<size_t>(units_count), 1);
    c.decouple_groups = 1;
    c.temporal_kernel = 1;
    c.in_channels = channels_count;
    c.partition = PartitionScheme::Single;
    c.stc_attention = false;
    c.residual = false;
    c.unit_activation = false;
    c.dropgraph_keep_prob = 1.0;
    c.classes = 1;
    return c;
}

SLGCNModel::SLGCNModel(SLGCNConfig cfg, const NormalizedAdjacency& adj, const SkeletonGraph& graph, Rng& rng)
    : cfg_(std::move(cfg)) {
    cfg_.validate();
    const size_t want_parts = cfg_.partition == PartitionScheme::Single ? 1 : 3;
    if (adj.partitions.size() != want_parts)
        throw config_error("sl_gcn: adjacency has " + std::to_string(adj.partitions.size()) +
                           " partitions, config wants " + std::to_string(want_parts));
    adj_init_ = adj.partitions;
    const int V = cfg_.nodes;
    for (const auto& p : adj_init_)
        if (p.dim(0) != V) throw config_error("sl_gcn: adjacency node count mismatch");

    // 1-hop neighbor lists for DropGraph
    neighbors_.assign(static_cast<size_t>(V), {});
    for (const auto& [a, b] : graph.edges) {
        neighbors_[static_cast<size_t>(a)].push_back(b);
        neighbors_[static_cast<size_t>(b)].push_back(a);
    }

    in_gamma_ = params_.make("input.norm.gamma", NdArray::full({cfg_.in_channels}, 1.0));
    in_beta_ = params_.make("input.norm.beta", NdArray::zeros({cfg_.in_channels}));
    in_state_ = std::make_unique<NormState>(cfg_.in_channels);

    int cin = cfg_.in_channels;
    for (int u = 0; u < cfg_.units; ++u) {
        const int cout = cfg_.channels[static_cast<size_t>(u)];
        const std::string base = "unit" + std::to_string(u) + ".";
        SLGCNUnitParams up;
        for (size_t p = 0; p < adj_init_.size(); ++p) {
            up.partition_weights.push_back(params_.make(
                base + "spatial.w" + std::to_string(p), randn({cout, cin, 1}, std::sqrt(2.0 / cin), rng)));
            NdArray a0({cfg_.decouple_groups, V, V});
            for (int g = 0; g < cfg_.decouple_groups; ++g)
                for (int i = 0; i < V; ++i)
                    for (int j = 0; j < V; ++j) a0.at({g, i, j}) = adj_init_[p].at({i, j});
            up.partition_adj.push_back(params_.make(base + "spatial.adj" + std::to_string(p), a0));
        }
        // STC gates start nearly closed so the module is near-identity
        const int kv = odd_at_most(9, V);
        up.stc.spatial_kernel = params_.make(base + "stc.spatial.k", NdArray::zeros({1, 1, kv}));
        up.stc.spatial_bias = params_.make(base + "stc.spatial.b", NdArray::full({1}, -4.0));
        up.stc.temporal_kernel = params_.make(base + "stc.temporal.k", NdArray::zeros({1, 1, 9}));
        up.stc.temporal_bias = params_.make(base + "stc.temporal.b", NdArray::full({1}, -4.0));
        const int hidden = std::max(1, cout / 4);
        up.stc.ch_w1 = params_.make(base + "stc.channel.w1", randn({cout, hidden}, std::sqrt(2.0 / cout), rng));
        up.stc.ch_b1 = params_.make(base + "stc.channel.b1", NdArray::zeros({hidden}));
        up.stc.ch_w2 = params_.make(base + "stc.channel.w2", NdArray::zeros({hidden, cout}));
        up.stc.ch_b2 = params_.make(base + "stc.channel.b2", NdArray::full({cout}, -4.0));

        up.temporal_weights = params_.make(
            base + "temporal.w",
            randn({cout, cout, cfg_.temporal_kernel}, std::sqrt(2.0 / (cout * cfg_.temporal_kernel)), rng));
        up.bn_gamma = params_.make(base + "norm.gamma", NdArray::full({cout}, 1.0));
        up.bn_beta = params_.make(base + "norm.beta", NdArray::zeros({cout}));
        up.bn_state = std::make_unique<NormState>(cout);
        const int stride = cfg_.strides[static_cast<size_t>(u)];
        if (cfg_.residual && (cin != cout || stride != 1)) {
            up.res_weights = params_.make(base + "res.w", randn({cout, cin, 1}, std::sqrt(2.0 / cin), rng));
            up.res_gamma = params_.make(base + "res.gamma", NdArray::full({cout}, 1.0));
            up.res_beta = params_.make(base + "res.beta", NdArray::zeros({cout}));
            up.res_state = std::make_unique<NormState>(cout);
        }
        units_.push_back(std::move(up));
        cin = cout;
    }
    const int feat = cin * V;
    fc_w_ = params_.make("head.fc.w", randn({feat, cfg_.classes}, std::sqrt(1.0 / feat), rng));
    fc_b_ = params_.make("head.fc.b", NdArray::zeros({cfg_.classes}));
}

void SLGCNModel::set_identity_weights() {
    const int V = cfg_.nodes;
    // eval-mode channel norm divides by sqrt(running_var + eps) = sqrt(1 + eps);
    // set gamma to cancel it exactly so the ladder is a true identity
    const double bn_eps = 1e-5;
    const double gamma_identity = std::sqrt(1.0 + bn_eps);
    in_gamma_->value = NdArray::full({cfg_.in_channels}, gamma_identity);
    for (size_t u = 0; u < units_.size(); ++u) {
        auto& up = units_[u];
        const int c = cfg_.channels[u];
        for (auto& w : up.partition_weights) w->value = identity_pointwise(c);
        for (auto& a : up.partition_adj) {
            a->value = NdArray::zeros({cfg_.decouple_groups, V, V});
            for (int g = 0; g < cfg_.decouple_groups; ++g)
                for (int i = 0; i < V; ++i) a->value.at({g, i, i}) = 1.0;
        }
        if (cfg_.temporal_kernel == 1) up.temporal_weights->value = identity_pointwise(c);
        up.bn_gamma->value = NdArray::full({c}, gamma_identity);
    }
}

Tape::Id SLGCNModel::stc_forward(Tape& tape, Tape::Id x, int unit) {
    const auto& st = units_[static_cast<size_t>(unit)].stc;
    const NdArray& vx = tape.value(x);
    const int N = vx.dim(0), C = vx.dim(1), T = vx.dim(2), V = vx.dim(3);

    // spatial: per-node gate from channel+frame pooled map
    {
        Tape::Id m = tape.mean_axes(x, {1, 2});                    // [N,1,1,V]
        Tape::Id mp = tape.permute(m, {0, 1, 3, 2});               // [N,1,V,1]
        Tape::Id c = tape.conv_temporal(mp, tape.param(st.spatial_kernel), 1);
        Tape::Id cb = tape.badd(c, tape.reshape(tape.param(st.spatial_bias), {1, 1, 1, 1}));
        Tape::Id gate = tape.sigmoid(tape.permute(cb, {0, 1, 3, 2}));  // [N,1,1,V]
        x = tape.add(x, tape.bmul(x, gate));
    }
    // temporal: per-frame gate
    {
        Tape::Id m = tape.mean_axes(x, {1, 3});  // [N,1,T,1]
        Tape::Id c = tape.conv_temporal(m, tape.param(st.temporal_kernel), 1);
        Tape::Id cb = tape.badd(c, tape.reshape(tape.param(st.temporal_bias), {1, 1, 1, 1}));
        Tape::Id gate = tape.sigmoid(cb);
        x = tape.add(x, tape.bmul(x, gate));
    }
    // channel: squeeze-excite bottleneck
    {
        Tape::Id m = tape.reshape(tape.mean_axes(x, {2, 3}), {N, C});
        Tape::Id h = tape.swish(tape.badd(tape.matmul(m, tape.param(st.ch_w1)), tape.reshape(tape.param(st.ch_b1), {1, tape.value(tape.param(st.ch_b1)).dim(0)})));
        Tape::Id g2 = tape.sigmoid(tape.badd(tape.matmul(h, tape.param(st.ch_w2)), tape.reshape(tape.param(st.ch_b2), {1, C})));
        Tape::Id gate = tape.reshape(g2, {N, C, 1, 1});
        x = tape.add(x, tape.bmul(x, gate));
    }
    (void)T;
    (void)V;
    return x;
}

Tape::Id SLGCNModel::unit_forward(Tape& tape, Tape::Id x, int unit, bool training, Rng* rng) {
    auto& up = units_[static_cast<size_t>(unit)];
    const int stride = cfg_.strides[static_cast<size_t>(unit)];
    const NdArray& vx = tape.value(x);
    const int cin = vx.dim(1), cout = cfg_.channels[static_cast<size_t>(unit)];

    Tape::Id y = -1;
    for (size_t p = 0; p < up.partition_weights.size(); ++p) {
        Tape::Id xp = tape.conv_temporal(x, tape.param(up.partition_weights[p]), 1);
        Tape::Id yp = tape.node_mix(xp, tape.param(up.partition_adj[p]));
        y = (p == 0) ? yp : tape.add(y, yp);
    }
    if (cfg_.stc_attention) y = stc_forward(tape, y, unit);
    y = tape.conv_temporal(y, tape.param(up.temporal_weights), stride);
    y = tape.channel_norm(y, tape.param(up.bn_gamma), tape.param(up.bn_beta), *up.bn_state, training);
    if (cfg_.unit_activation) y = tape.swish(y);
    if (cfg_.residual) {
        Tape::Id r;
        if (cin == cout && stride == 1) {
            r = x;
        } else {
            r = tape.conv_temporal(x, tape.param(up.res_weights), stride);
            r = tape.channel_norm(r, tape.param(up.res_gamma), tape.param(up.res_beta), *up.res_state, training);
        }
        y = tape.add(y, r);
    }
    if (training && cfg_.dropgraph_keep_prob < 1.0) {
        if (!rng) throw config_error("sl_gcn: training forward needs an RNG for DropGraph");
        const NdArray& vy = tape.value(y);
        const int V = vy.dim(3);
        double avg_deg = 0.0;
        for (const auto& nb : neighbors_) avg_deg += static_cast<double>(nb.size());
        avg_deg /= V;
        const double seed_prob = (1.0 - cfg_.dropgraph_keep_prob) / (1.0 + avg_deg);
        std::uniform_real_distribution<double> unit_dist(0.0, 1.0);
        NdArray mask({1, 1, 1, V});
        for (int v = 0; v < V; ++v) mask.at({0, 0, 0, v}) = 1.0;
        for (int v = 0; v < V; ++v)
            if (unit_dist(*rng) < seed_prob) {
                mask.at({0, 0, 0, v}) = 0.0;
                for (int nb : neighbors_[static_cast<size_t>(v)]) mask.at({0, 0, 0, nb}) = 0.0;
            }
        for (int v = 0; v < V; ++v) mask.at({0, 0, 0, v}) /= cfg_.dropgraph_keep_prob;
        y = tape.bmul(y, tape.constant(mask));
    }
    return y;
}

Tape::Id SLGCNModel::backbone_forward(Tape& tape, const NdArray& input, bool training, Rng* rng) {
    if (input.rank() != 4 || input.dim(1) != cfg_.in_channels || input.dim(3) != cfg_.nodes)
        throw config_error("sl_gcn forward: expected input [N," + std::to_string(cfg_.in_channels) + ",T," +
                           std::to_string(cfg_.nodes) + "], got " + shape_str(input.shape()));
    Tape::Id x = tape.constant(input);
    x = tape.channel_norm(x, tape.param(in_gamma_), tape.param(in_beta_), *in_state_, training);
    for (int u = 0; u < cfg_.units; ++u) x = unit_forward(tape, x, u, training, rng);
    return x;
}

Tape::Id SLGCNModel::forward(Tape& tape, const NdArray& input, bool training, Rng* rng) {
    Tape::Id x = backbone_forward(tape, input, training, rng);
    Tape::Id pooled = tape.pool_avg_temporal(x);  // [N,C,V]
    const NdArray& vp = tape.value(pooled);
    Tape::Id flat = tape.reshape(pooled, {vp.dim(0), vp.dim(1) * vp.dim(2)});
    Tape::Id logits = tape.badd(tape.matmul(flat, tape.param(fc_w_)), tape.reshape(tape.param(fc_b_), {1, cfg_.classes}));
    return logits;
}

NdArray SLGCNModel::predict(const NdArray& input) {
    Tape tape;
    return tape.value(forward(tape, input, /*training=*/false));
}

NdArray multi_stream_fuse(const std::vector<NdArray>& stream_logits, const std::vector<double>& weights) {
    if (stream_logits.empty()) throw fusion_error("multi_stream_fuse: no streams");
    if (stream_logits.size() != weights.size())
        throw fusion_error("multi_stream_fuse: weight count does not match stream count");
    NdArray out = NdArray::zeros(stream_logits[0].shape());
    for (size_t i = 0; i < stream_logits.size(); ++i) {
        if (!stream_logits[i].same_shape(out))
            throw fusion_error("multi_stream_fuse: logit shape mismatch at stream " + std::to_string(i));
        for (int64_t j = 0; j < out.size(); ++j) out[j] += weights[i] * stream_logits[i][j];
    }
    return out;
}

}  // namespace samslr
