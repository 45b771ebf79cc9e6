#include "samslr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace samslr {

NdArray smooth_labels(int y, int num_classes, double epsilon) {
    if (num_classes < 2) throw config_error("smooth_labels: need at least 2 classes");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw config_error("smooth_labels: epsilon must be in (0,1)");
    if (y < 0 || y >= num_classes) throw input_error("smooth_labels: label out of range");
    NdArray q({num_classes});
    for (int k = 0; k < num_classes; ++k) q[k] = epsilon / num_classes;
    q[y] += 1.0 - epsilon;
    return q;
}

double smoothed_ce_value(const NdArray& logits, const std::vector<int>& labels, double epsilon) {
    if (logits.rank() != 2) throw input_error("smoothed_ce_value: expected [N,K]");
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N) throw input_error("smoothed_ce_value: label count mismatch");
    double loss = 0.0;
    for (int n = 0; n < N; ++n) {
        double mx = logits.at({n, 0});
        for (int k = 1; k < K; ++k) mx = std::max(mx, logits.at({n, k}));
        double se = 0.0;
        for (int k = 0; k < K; ++k) se += std::exp(logits.at({n, k}) - mx);
        const double lse = mx + std::log(se);
        double dot = 0.0;
        for (int k = 0; k < K; ++k) {
            const double q = (k == labels[static_cast<size_t>(n)] ? 1.0 - epsilon : 0.0) + epsilon / K;
            dot += q * logits.at({n, k});
        }
        loss += lse - dot;
    }
    return loss / N;
}

void SgdOptimizer::step(ParamSet& params, double lr) {
    if (velocity_.empty())
        for (const auto& p : params.items) velocity_.push_back(NdArray::zeros(p->value.shape()));
    if (velocity_.size() != params.items.size()) throw config_error("sgd: parameter set changed between steps");
    for (size_t i = 0; i < params.items.size(); ++i) {
        Param& p = *params.items[i];
        NdArray& v = velocity_[i];
        for (int64_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            if (!std::isfinite(g))
                throw numeric_error("sgd: non-finite gradient in parameter '" + p.name + "' at index " +
                                    std::to_string(j));
            v[j] = momentum_ * v[j] + g + weight_decay_ * p.value[j];
            p.value[j] -= lr * v[j];
        }
    }
}

double cosine_lr(double base_lr, int step, int total_steps) {
    if (total_steps <= 1) return base_lr;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

Metrics evaluate(const NdArray& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || logits.dim(0) == 0) throw input_error("evaluate: empty or malformed logits");
    const int S = logits.dim(0), C = logits.dim(1);
    if (static_cast<int>(labels.size()) != S) throw input_error("evaluate: label count mismatch");
    const int k5 = std::min(5, C);

    auto rank_of_label = [&](int s) {
        const int y = labels[static_cast<size_t>(s)];
        const double ly = logits.at({s, y});
        int rank = 0;
        for (int c = 0; c < C; ++c) {
            if (c == y) continue;
            const double lc = logits.at({s, c});
            if (lc > ly || (lc == ly && c < y)) ++rank;
        }
        return rank;
    };

    int hits1 = 0, hits5 = 0;
    std::vector<int> cls_count, cls_hit1, cls_hit5;
    const int max_label = *std::max_element(labels.begin(), labels.end());
    cls_count.assign(static_cast<size_t>(std::max(max_label + 1, 1)), 0);
    cls_hit1 = cls_count;
    cls_hit5 = cls_count;
    for (int s = 0; s < S; ++s) {
        const int r = rank_of_label(s);
        const int y = labels[static_cast<size_t>(s)];
        cls_count[static_cast<size_t>(y)]++;
        if (r < 1) {
            ++hits1;
            cls_hit1[static_cast<size_t>(y)]++;
        }
        if (r < k5) {
            ++hits5;
            cls_hit5[static_cast<size_t>(y)]++;
        }
    }
    Metrics m;
    m.top1 = static_cast<double>(hits1) / S;
    m.top5 = static_cast<double>(hits5) / S;
    double pc1 = 0.0, pc5 = 0.0;
    int present = 0;
    for (size_t c = 0; c < cls_count.size(); ++c) {
        if (cls_count[c] == 0) continue;
        ++present;
        pc1 += static_cast<double>(cls_hit1[c]) / cls_count[c];
        pc5 += static_cast<double>(cls_hit5[c]) / cls_count[c];
    }
    m.per_class_top1 = pc1 / present;
    m.per_class_top5 = pc5 / present;
    return m;
}

LabeledSequences generate_synthetic(const SyntheticGestureSpec& spec, Rng& rng) {
    if (spec.classes < 2 || spec.samples_per_class < 1 || spec.frames < 2)
        throw input_error("generate_synthetic: invalid spec");
    const auto& ref = reduced_reference_pose();
    const auto& idx = reduced_keypoint_indices();
    std::normal_distribution<double> gauss(0.0, 1.0);

    LabeledSequences out;
    for (int cls = 0; cls < spec.classes; ++cls) {
        // class archetype: distinct frequency/phase/amplitude on hand nodes
        const double freq = 1.0 + 0.5 * cls;
        const double phase = 0.9 * cls;
        const double amp = 30.0 + 6.0 * (cls % 4);
        const bool both_hands = (cls % 2) == 0;
        for (int s = 0; s < spec.samples_per_class; ++s) {
            KeypointSequence seq;
            seq.frame_w = spec.frame_w;
            seq.frame_h = spec.frame_h;
            seq.data = NdArray({spec.frames, kWholeBodyLandmarks, 3});
            for (int t = 0; t < spec.frames; ++t) {
                const double tau = static_cast<double>(t) / spec.frames;
                const double dx = amp * std::sin(2.0 * M_PI * freq * tau + phase);
                const double dy = amp * std::cos(2.0 * M_PI * freq * tau + 0.5 * phase);
                // background landmarks sit near the face center
                for (int l = 0; l < kWholeBodyLandmarks; ++l) {
                    seq.data.at({t, l, 0}) = spec.frame_w * 0.5;
                    seq.data.at({t, l, 1}) = spec.frame_h * 0.3;
                    seq.data.at({t, l, 2}) = 0.9;
                }
                for (int n = 0; n < kReducedNodeCount; ++n) {
                    const int l = idx[static_cast<size_t>(n)];
                    double x = spec.frame_w * (0.5 + 0.18 * ref[static_cast<size_t>(n)].first);
                    double y = spec.frame_h * (0.3 + 0.28 * ref[static_cast<size_t>(n)].second);
                    const bool left_hand = n >= 7 && n <= 16;
                    const bool right_hand = n >= 17;
                    if (left_hand || (right_hand && both_hands)) {
                        x += dx;
                        y += dy;
                    } else if (right_hand) {
                        x -= dx;  // anti-phase for odd classes
                        y += dy * 0.5;
                    }
                    seq.data.at({t, l, 0}) = x;
                    seq.data.at({t, l, 1}) = y;
                }
            }
            if (spec.noise_std > 0.0) {
                const double px_noise = spec.noise_std * spec.frame_w * 0.5;
                for (int64_t i = 0; i < seq.data.size(); ++i)
                    if (i % 3 != 2) seq.data[i] += px_noise * gauss(rng);
            }
            out.sequences.push_back(std::move(seq));
            out.labels.push_back(cls);
        }
    }
    return out;
}

NdArray stack_batch(const std::vector<NdArray>& samples, const std::vector<int>& idx) {
    if (idx.empty()) throw input_error("stack_batch: empty batch");
    const Shape& s0 = samples[static_cast<size_t>(idx[0])].shape();
    Shape out_shape;
    out_shape.push_back(static_cast<int>(idx.size()));
    for (int d : s0) out_shape.push_back(d);
    NdArray out(out_shape);
    const int64_t per = samples[static_cast<size_t>(idx[0])].size();
    for (size_t b = 0; b < idx.size(); ++b) {
        const NdArray& s = samples[static_cast<size_t>(idx[b])];
        if (s.shape() != s0) throw input_error("stack_batch: inconsistent sample shapes");
        for (int64_t i = 0; i < per; ++i) out[static_cast<int64_t>(b) * per + i] = s[i];
    }
    return out;
}

TrainResult train_model(const ForwardFn& forward, ParamSet& params, const std::vector<NdArray>& samples,
                        const std::vector<int>& labels, const TrainConfig& cfg,
                        const std::function<void(int, double)>& on_step) {
    if (samples.empty() || samples.size() != labels.size()) throw input_error("train_model: bad dataset");
    Rng rng(cfg.seed);
    SgdOptimizer opt(cfg.momentum, cfg.weight_decay);
    const int n = static_cast<int>(samples.size());
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    size_t cursor = 0;

    TrainResult res;
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<int> batch_idx;
        std::vector<int> batch_labels;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const int i = order[cursor++];
            batch_idx.push_back(i);
            batch_labels.push_back(labels[static_cast<size_t>(i)]);
        }
        NdArray batch = stack_batch(samples, batch_idx);
        Tape tape;
        Tape::Id logits = forward(tape, batch, /*training=*/true, &rng);
        Tape::Id loss = tape.smoothed_ce(logits, batch_labels, cfg.label_smoothing);
        params.zero_grad();
        tape.backward(loss);
        const double lr = cfg.cosine_schedule ? cosine_lr(cfg.lr, step, cfg.steps) : cfg.lr;
        opt.step(params, lr);
        res.losses.push_back(tape.value(loss)[0]);
        res.steps_run = step + 1;
        if (on_step) on_step(step, res.losses.back());
    }
    NdArray all_logits = predict_all(forward, samples);
    res.train_metrics = evaluate(all_logits, labels);
    return res;
}

NdArray predict_all(const ForwardFn& forward, const std::vector<NdArray>& samples, int batch_size) {
    if (samples.empty()) throw input_error("predict_all: empty dataset");
    NdArray out;
    std::vector<double> rows;
    int cols = 0;
    for (size_t start = 0; start < samples.size(); start += static_cast<size_t>(batch_size)) {
        std::vector<int> idx;
        for (size_t i = start; i < std::min(samples.size(), start + static_cast<size_t>(batch_size)); ++i)
            idx.push_back(static_cast<int>(i));
        NdArray batch = stack_batch(samples, idx);
        Tape tape;
        Tape::Id logits = forward(tape, batch, /*training=*/false, nullptr);
        const NdArray& v = tape.value(logits);
        cols = v.dim(1);
        for (int64_t i = 0; i < v.size(); ++i) rows.push_back(v[i]);
    }
    return NdArray({static_cast<int>(samples.size()), cols}, std::move(rows));
}

}  // namespace samslr
