#pragma once

#include <string>
#include <vector>

#include "samslr/tape.hpp"
#include "samslr/train.hpp"

namespace samslr {

// Per-modality pre-softmax scores, row-aligned to a shared sample manifest.
struct LogitMatrix {
    std::string modality;
    NdArray data;  // [S, C]
    std::vector<std::string> sample_ids;

    int samples() const { return data.dim(0); }
    int classes() const { return data.dim(1); }
};

// Throws fusion_error naming offending modalities if shapes or manifests
// are misaligned.
void check_aligned(const std::vector<LogitMatrix>& mods);

// Elementwise sum of alpha_i * q_i.
LogitMatrix fuse_fixed(const std::vector<LogitMatrix>& mods, const std::vector<double>& alpha);

struct GEMConfig {
    int modalities = 0;
    int classes = 0;
    int conv_filters = 16;  // filters of the CxI collapse convolution
    int hidden = 64;
    int hidden_layers = 2;
    bool global_weights = false;  // average per-sample weights at eval time

    void validate() const;
};

class GEMModel {
public:
    GEMModel(GEMConfig cfg, Rng& rng);

    // per-sample fusion weights [S, M]
    Tape::Id weights_forward(Tape& tape, const std::vector<LogitMatrix>& mods);
    // fused logits [S, C] (differentiable w.r.t. GEM params)
    Tape::Id fused_forward(Tape& tape, const std::vector<LogitMatrix>& mods);

    struct Output {
        NdArray weights;  // [S, M]
        NdArray fused;    // [S, C]
    };
    Output predict(const std::vector<LogitMatrix>& mods);

    ParamSet& params() { return params_; }
    const GEMConfig& config() const { return cfg_; }

private:
    GEMConfig cfg_;
    ParamSet params_;
    ParamPtr conv_w_, conv_b_;
    ParamPtr ln0_gamma_, ln0_beta_;
    std::vector<ParamPtr> fc_w_, fc_b_, ln_gamma_, ln_beta_;
    ParamPtr out_w_, out_b_;
};

struct GEMTrainConfig {
    int epochs = 150;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    double label_smoothing = 0.1;
    double holdout_frac = 0.25;
    unsigned seed = 7;
};

struct GEMTrainResult {
    std::vector<double> train_losses;
    std::vector<double> holdout_top1;
    double best_holdout_top1 = 0.0;
    int best_epoch = -1;
};

// Minimizes smoothed CE of the fused logits; keeps the parameters of the
// best held-out top-1 epoch. Zero epochs leaves the model untouched.
GEMTrainResult gem_train(GEMModel& model, const std::vector<LogitMatrix>& mods,
                         const std::vector<int>& labels, const GEMTrainConfig& cfg);

struct SweepRow {
    int modality;
    double weight;
    double top1;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<double> best_weight_per_modality;
};

// One-at-a-time sweep: modality i takes each grid value while the others
// stay at their base weights.
SweepResult sensitivity_sweep(const std::vector<LogitMatrix>& mods, const std::vector<int>& labels,
                              const std::vector<double>& base, const std::vector<double>& grid);

}  // namespace samslr
