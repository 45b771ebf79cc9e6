#pragma once

#include <functional>
#include <vector>

#include "samslr/graph.hpp"
#include "samslr/streams.hpp"
#include "samslr/tape.hpp"

namespace samslr {

// Eq-style smoothed target: (1-eps) at y plus eps/K everywhere.
NdArray smooth_labels(int y, int num_classes, double epsilon);

// Mean over rows of the label-smoothed cross-entropy (log-sum-exp
// stabilized). Plain value; the differentiable path is Tape::smoothed_ce.
double smoothed_ce_value(const NdArray& logits, const std::vector<int>& labels, double epsilon);

// SGD with momentum and weight decay:
//   v = momentum*v + g + wd*p;  p -= lr*v
class SgdOptimizer {
public:
    SgdOptimizer(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}
    void step(ParamSet& params, double lr);

private:
    double momentum_;
    double weight_decay_;
    std::vector<NdArray> velocity_;
};

double cosine_lr(double base_lr, int step, int total_steps);

struct Metrics {
    double top1 = 0.0, top5 = 0.0;
    double per_class_top1 = 0.0, per_class_top5 = 0.0;
};

// Tie-break: among equal logits the lower class index ranks first.
Metrics evaluate(const NdArray& logits, const std::vector<int>& labels);

struct SyntheticGestureSpec {
    int classes = 8;
    int samples_per_class = 20;
    int frames = 48;
    double noise_std = 0.02;
    double frame_w = 512.0;
    double frame_h = 512.0;
};

struct LabeledSequences {
    std::vector<KeypointSequence> sequences;  // 133-landmark, (x,y,s)
    std::vector<int> labels;
};

// Per-class sinusoidal hand trajectories over the canonical pose, plus
// gaussian pixel noise. Deterministic for a fixed RNG state.
LabeledSequences generate_synthetic(const SyntheticGestureSpec& spec, Rng& rng);

struct TrainConfig {
    int steps = 500;
    int batch_size = 16;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double label_smoothing = 0.1;
    bool cosine_schedule = true;
    unsigned seed = 1;
};

struct TrainResult {
    std::vector<double> losses;
    Metrics train_metrics;
    int steps_run = 0;
};

// Samples share one shape; a batch is stacked along a new leading axis.
using ForwardFn = std::function<Tape::Id(Tape&, const NdArray& batch, bool training, Rng*)>;

NdArray stack_batch(const std::vector<NdArray>& samples, const std::vector<int>& idx);

TrainResult train_model(const ForwardFn& forward, ParamSet& params, const std::vector<NdArray>& samples,
                        const std::vector<int>& labels, const TrainConfig& cfg,
                        const std::function<void(int, double)>& on_step = nullptr);

// Eval-mode logits for a whole dataset, batched.
NdArray predict_all(const ForwardFn& forward, const std::vector<NdArray>& samples, int batch_size = 32);

}  // namespace samslr
