#include "samslr/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace samslr {

void check_aligned(const std::vector<LogitMatrix>& mods) {
    if (mods.empty()) throw fusion_error("fusion: no modalities given");
    const auto& first = mods[0];
    for (const auto& m : mods) {
        if (m.data.rank() != 2) throw fusion_error("fusion: modality '" + m.modality + "' is not a 2-D logit matrix");
        if (m.samples() != first.samples() || m.classes() != first.classes())
            throw fusion_error("fusion: shape mismatch between '" + first.modality + "' " +
                               shape_str(first.data.shape()) + " and '" + m.modality + "' " +
                               shape_str(m.data.shape()));
        if (!m.sample_ids.empty() && !first.sample_ids.empty() && m.sample_ids != first.sample_ids)
            throw fusion_error("fusion: sample manifests of '" + first.modality + "' and '" + m.modality +
                               "' are not aligned");
    }
}

LogitMatrix fuse_fixed(const std::vector<LogitMatrix>& mods, const std::vector<double>& alpha) {
    check_aligned(mods);
    if (alpha.size() != mods.size())
        throw fusion_error("fuse_fixed: " + std::to_string(alpha.size()) + " weights for " +
                           std::to_string(mods.size()) + " modalities");
    bool any_nonzero = false;
    for (double a : alpha) {
        if (!std::isfinite(a)) throw fusion_error("fuse_fixed: non-finite weight");
        if (a != 0.0) any_nonzero = true;
    }
    if (!any_nonzero) throw fusion_error("fuse_fixed: all weights are zero");
    LogitMatrix out;
    out.modality = "fused";
    out.sample_ids = mods[0].sample_ids;
    out.data = NdArray::zeros(mods[0].data.shape());
    for (size_t i = 0; i < mods.size(); ++i)
        for (int64_t j = 0; j < out.data.size(); ++j) out.data[j] += alpha[i] * mods[i].data[j];
    return out;
}

void GEMConfig::validate() const {
    if (modalities < 2) throw config_error("gem: need at least 2 modalities");
    if (classes < 2) throw config_error("gem: need at least 2 classes");
    if (conv_filters < 1 || hidden < 1 || hidden_layers < 0) throw config_error("gem: bad layer sizes");
}

namespace {
NdArray randn(Shape shape, double std, Rng& rng) {
    std::normal_distribution<double> dist(0.0, std);
    NdArray out(std::move(shape));
    for (int64_t i = 0; i < out.size(); ++i) out[i] = dist(rng);
    return out;
}
}  // namespace

GEMModel::GEMModel(GEMConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int C = cfg_.classes, F = cfg_.conv_filters, H = cfg_.hidden;
    conv_w_ = params_.make("gem.conv.w", randn({C, F}, std::sqrt(1.0 / C), rng));
    conv_b_ = params_.make("gem.conv.b", NdArray::zeros({F}));
    ln0_gamma_ = params_.make("gem.ln0.gamma", NdArray::full({F}, 1.0));
    ln0_beta_ = params_.make("gem.ln0.beta", NdArray::zeros({F}));
    int in = F;
    for (int l = 0; l < cfg_.hidden_layers; ++l) {
        fc_w_.push_back(params_.make("gem.fc" + std::to_string(l) + ".w", randn({in, H}, std::sqrt(2.0 / in), rng)));
        fc_b_.push_back(params_.make("gem.fc" + std::to_string(l) + ".b", NdArray::zeros({H})));
        ln_gamma_.push_back(params_.make("gem.ln" + std::to_string(l + 1) + ".gamma", NdArray::full({H}, 1.0)));
        ln_beta_.push_back(params_.make("gem.ln" + std::to_string(l + 1) + ".beta", NdArray::zeros({H})));
        in = H;
    }
    out_w_ = params_.make("gem.out.w", randn({in, 1}, std::sqrt(1.0 / in), rng));
    // raw weights start near 1 so the initial fusion is close to equal-weight
    out_b_ = params_.make("gem.out.b", NdArray::full({1}, 1.0));
}

Tape::Id GEMModel::weights_forward(Tape& tape, const std::vector<LogitMatrix>& mods) {
    check_aligned(mods);
    if (static_cast<int>(mods.size()) != cfg_.modalities)
        throw config_error("gem: model built for " + std::to_string(cfg_.modalities) + " modalities, got " +
                           std::to_string(mods.size()));
    if (mods[0].classes() != cfg_.classes)
        throw config_error("gem: model built for " + std::to_string(cfg_.classes) + " classes");
    const int S = mods[0].samples(), C = cfg_.classes, M = cfg_.modalities;

    // concatenated prediction block, one row of C scores per (sample, modality)
    NdArray block({S, M, C});
    for (int s = 0; s < S; ++s)
        for (int m = 0; m < M; ++m)
            for (int c = 0; c < C; ++c) block.at({s, m, c}) = mods[static_cast<size_t>(m)].data.at({s, c});
    // Cx1 convolution collapses the class axis
    Tape::Id x = tape.reshape(tape.constant(block), {S * M, C});
    x = tape.badd(tape.matmul(x, tape.param(conv_w_)), tape.reshape(tape.param(conv_b_), {1, cfg_.conv_filters}));
    x = tape.layer_norm(x, tape.param(ln0_gamma_), tape.param(ln0_beta_));
    x = tape.swish(x);
    for (size_t l = 0; l < fc_w_.size(); ++l) {
        x = tape.badd(tape.matmul(x, tape.param(fc_w_[l])),
                      tape.reshape(tape.param(fc_b_[l]), {1, cfg_.hidden}));
        x = tape.layer_norm(x, tape.param(ln_gamma_[l]), tape.param(ln_beta_[l]));
        x = tape.swish(x);
    }
    x = tape.badd(tape.matmul(x, tape.param(out_w_)), tape.reshape(tape.param(out_b_), {1, 1}));
    return tape.reshape(x, {S, M});
}

Tape::Id GEMModel::fused_forward(Tape& tape, const std::vector<LogitMatrix>& mods) {
    Tape::Id w = weights_forward(tape, mods);
    std::vector<NdArray> mats;
    for (const auto& m : mods) mats.push_back(m.data);
    return tape.weighted_modal_sum(w, std::move(mats));
}

GEMModel::Output GEMModel::predict(const std::vector<LogitMatrix>& mods) {
    Tape tape;
    Tape::Id w = weights_forward(tape, mods);
    NdArray weights = tape.value(w);
    const int S = weights.dim(0), M = weights.dim(1);
    if (cfg_.global_weights) {
        NdArray avg({S, M});
        for (int m = 0; m < M; ++m) {
            double acc = 0.0;
            for (int s = 0; s < S; ++s) acc += weights.at({s, m});
            acc /= S;
            for (int s = 0; s < S; ++s) avg.at({s, m}) = acc;
        }
        weights = avg;
    }
    NdArray fused = NdArray::zeros(mods[0].data.shape());
    for (int s = 0; s < S; ++s)
        for (int m = 0; m < M; ++m) {
            const double wv = weights.at({s, m});
            for (int c = 0; c < mods[0].classes(); ++c)
                fused.at({s, c}) += wv * mods[static_cast<size_t>(m)].data.at({s, c});
        }
    return Output{weights, fused};
}

GEMTrainResult gem_train(GEMModel& model, const std::vector<LogitMatrix>& mods,
                         const std::vector<int>& labels, const GEMTrainConfig& cfg) {
    check_aligned(mods);
    const int S = mods[0].samples();
    if (static_cast<int>(labels.size()) != S) throw input_error("gem_train: label count mismatch");
    // need >= 2 samples per class so a held-out split exists
    std::vector<int> per_class;
    for (int y : labels) {
        if (y < 0) throw input_error("gem_train: negative label");
        if (y >= static_cast<int>(per_class.size())) per_class.resize(static_cast<size_t>(y + 1), 0);
        per_class[static_cast<size_t>(y)]++;
    }
    for (size_t c = 0; c < per_class.size(); ++c)
        if (per_class[c] == 1)
            throw data_error("gem_train: class " + std::to_string(c) + " has fewer than 2 samples");

    // stratified split: every class contributes to the held-out set
    Rng rng(cfg.seed);
    std::vector<int> order(static_cast<size_t>(S));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> held_count(per_class.size(), 0);
    std::vector<char> in_holdout(static_cast<size_t>(S), 0);
    for (int i : order) {
        const auto y = static_cast<size_t>(labels[static_cast<size_t>(i)]);
        const int want = std::max(1, static_cast<int>(std::floor(cfg.holdout_frac * per_class[y])));
        if (held_count[y] < want && held_count[y] + 1 < per_class[y]) {
            in_holdout[static_cast<size_t>(i)] = 1;
            held_count[y]++;
        }
    }
    auto subset = [&](bool held) {
        std::vector<int> rows;
        for (int i = 0; i < S; ++i)
            if (static_cast<bool>(in_holdout[static_cast<size_t>(i)]) == held) rows.push_back(i);
        return rows;
    };
    const std::vector<int> train_rows = subset(false), hold_rows = subset(true);
    auto take = [&](const std::vector<int>& rows) {
        std::vector<LogitMatrix> sub;
        std::vector<int> ly;
        for (const auto& m : mods) {
            LogitMatrix sm;
            sm.modality = m.modality;
            sm.data = NdArray({static_cast<int>(rows.size()), m.classes()});
            for (size_t r = 0; r < rows.size(); ++r)
                for (int c = 0; c < m.classes(); ++c) sm.data.at({static_cast<int>(r), c}) = m.data.at({rows[r], c});
            sub.push_back(std::move(sm));
        }
        for (int r : rows) ly.push_back(labels[static_cast<size_t>(r)]);
        return std::make_pair(sub, ly);
    };
    auto [train_mods, train_labels] = take(train_rows);
    auto [hold_mods, hold_labels] = take(hold_rows);

    GEMTrainResult res;
    SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
    std::vector<NdArray> best_values;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape tape;
        Tape::Id fused = model.fused_forward(tape, train_mods);
        Tape::Id loss = tape.smoothed_ce(fused, train_labels, cfg.label_smoothing);
        model.params().zero_grad();
        tape.backward(loss);
        opt.step(model.params(), cosine_lr(cfg.lr, epoch, cfg.epochs));
        res.train_losses.push_back(tape.value(loss)[0]);

        const Metrics hm = evaluate(model.predict(hold_mods).fused, hold_labels);
        res.holdout_top1.push_back(hm.top1);
        // ties keep the later epoch: when the held-out score saturates the
        // longer-trained parameters carry the lower training loss
        if (hm.top1 >= res.best_holdout_top1 || res.best_epoch < 0) {
            res.best_holdout_top1 = hm.top1;
            res.best_epoch = epoch;
            best_values.clear();
            for (const auto& p : model.params().items) best_values.push_back(p->value);
        }
    }
    if (res.best_epoch >= 0)
        for (size_t i = 0; i < model.params().items.size(); ++i)
            model.params().items[i]->value = best_values[i];
    return res;
}

SweepResult sensitivity_sweep(const std::vector<LogitMatrix>& mods, const std::vector<int>& labels,
                              const std::vector<double>& base, const std::vector<double>& grid) {
    check_aligned(mods);
    if (grid.empty()) throw input_error("sensitivity_sweep: empty grid");
    if (base.size() != mods.size()) throw fusion_error("sensitivity_sweep: base weight count mismatch");
    SweepResult res;
    for (size_t mi = 0; mi < mods.size(); ++mi) {
        double best_top1 = -1.0, best_w = grid[0];
        for (double g : grid) {
            std::vector<double> alpha = base;
            alpha[mi] = g;
            bool all_zero = true;
            for (double a : alpha) all_zero = all_zero && a == 0.0;
            double top1;
            if (all_zero) {
                top1 = 0.0;  // degenerate row: no signal at all
            } else {
                top1 = evaluate(fuse_fixed(mods, alpha).data, labels).top1;
            }
            res.rows.push_back(SweepRow{static_cast<int>(mi), g, top1});
            if (top1 > best_top1) {
                best_top1 = top1;
                best_w = g;
            }
        }
        res.best_weight_per_modality.push_back(best_w);
    }
    return res;
}

}  // namespace samslr
