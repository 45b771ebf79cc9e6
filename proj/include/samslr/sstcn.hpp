#pragma once

#include <array>
#include <memory>

#include "samslr/streams.hpp"
#include "samslr/tape.hpp"

namespace samslr {

constexpr int kFeatureJoints = 33;
constexpr int kFeatureFrames = 60;
constexpr int kFeatureSize = 24;

// The 33 heatmap channels kept from the 133 whole-body set: nose, 4 mouth
// points, shoulders/elbows/wrists, and 11 per hand.
const std::array<int, kFeatureJoints>& feature_joint_indices();

// raw [F0, 133, H0, W0] -> [frames, joints, size, size]: channel selection,
// frame sampling per the stream sampling rules, then blockwise max pooling.
NdArray prepare_features(const NdArray& raw, int target_frames = kFeatureFrames,
                         int target_size = kFeatureSize, bool training = false, Rng* rng = nullptr);

struct SSTCNConfig {
    int frames = kFeatureFrames;
    int joints = kFeatureJoints;
    int height = kFeatureSize;
    int width = kFeatureSize;
    int classes = 0;
    int hidden = 256;
    double dropout = 0.25;

    void validate() const;
};

// Four-stage separable spatio-temporal network over keypoint heatmap
// features, with residual paths across stages 0-2.
class SSTCNModel {
public:
    SSTCNModel(SSTCNConfig cfg, Rng& rng);

    // input [N, frames, joints, H, W] -> logits [N, classes]
    Tape::Id forward(Tape& tape, const NdArray& input, bool training, Rng* rng = nullptr);
    NdArray predict(const NdArray& input);

    ParamSet& params() { return params_; }
    const SSTCNConfig& config() const { return cfg_; }

private:
    Tape::Id dropout_mask(Tape& tape, Tape::Id x, bool training, Rng* rng);

    SSTCNConfig cfg_;
    ParamSet params_;
    ParamPtr s0_depthwise_, s0_pointwise_, s0_gamma_, s0_beta_;
    ParamPtr s1_temporal_, s1_gamma_, s1_beta_;
    ParamPtr s2_kernel_, s2_gamma_, s2_beta_;
    ParamPtr s3_kernel_, s3_gamma_, s3_beta_;
    ParamPtr fc1_w_, fc1_b_, fc2_w_, fc2_b_;
    std::unique_ptr<NormState> s0_state_, s1_state_, s2_state_, s3_state_;
};

}  // namespace samslr
