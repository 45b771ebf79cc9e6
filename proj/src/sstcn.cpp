#include "samslr/sstcn.hpp"

#include <cmath>

namespace samslr {

const std::array<int, kFeatureJoints>& feature_joint_indices() {
    static const std::array<int, kFeatureJoints> idx = {
        0,                                                     // nose
        71, 74, 77, 80,                                        // mouth corners + mid top/bottom
        5, 6, 7, 8, 9, 10,                                     // shoulders, elbows, wrists
        91, 93, 95, 96, 99, 100, 103, 104, 107, 108, 111,      // left hand
        112, 114, 116, 117, 120, 121, 124, 125, 128, 129, 132, // right hand
    };
    return idx;
}

NdArray prepare_features(const NdArray& raw, int target_frames, int target_size, bool training, Rng* rng) {
    if (raw.rank() != 4) throw format_error("prepare_features: expected [frames, 133, H, W]");
    const int F0 = raw.dim(0), L = raw.dim(1), H0 = raw.dim(2), W0 = raw.dim(3);
    if (L != kWholeBodyLandmarks)
        throw format_error("prepare_features: expected " + std::to_string(kWholeBodyLandmarks) + " channels, got " +
                           std::to_string(L));
    if (H0 < target_size || W0 < target_size)
        throw format_error("prepare_features: heatmaps " + std::to_string(H0) + "x" + std::to_string(W0) +
                           " smaller than target " + std::to_string(target_size));
    if (F0 < 1) throw input_error("prepare_features: empty sequence");

    // frame sampling per the stream rules: tile short, window long
    std::vector<int> frame_idx(static_cast<size_t>(target_frames));
    if (F0 >= target_frames) {
        int offset = (F0 - target_frames) / 2;
        if (training) {
            if (!rng) throw config_error("prepare_features: training sampling needs an RNG");
            std::uniform_int_distribution<int> dist(0, F0 - target_frames);
            offset = dist(*rng);
        }
        for (int t = 0; t < target_frames; ++t) frame_idx[static_cast<size_t>(t)] = offset + t;
    } else {
        for (int t = 0; t < target_frames; ++t) frame_idx[static_cast<size_t>(t)] = t % F0;
    }

    const auto& joints = feature_joint_indices();
    NdArray out({target_frames, kFeatureJoints, target_size, target_size});
    for (int t = 0; t < target_frames; ++t) {
        const int src_t = frame_idx[static_cast<size_t>(t)];
        for (int j = 0; j < kFeatureJoints; ++j) {
            const int src_j = joints[static_cast<size_t>(j)];
            for (int oh = 0; oh < target_size; ++oh) {
                const int h0 = oh * H0 / target_size;
                const int h1 = (oh + 1) * H0 / target_size;
                for (int ow = 0; ow < target_size; ++ow) {
                    const int w0 = ow * W0 / target_size;
                    const int w1 = (ow + 1) * W0 / target_size;
                    double mx = raw.at({src_t, src_j, h0, w0});
                    for (int h = h0; h < h1; ++h)
                        for (int w = w0; w < w1; ++w) mx = std::max(mx, raw.at({src_t, src_j, h, w}));
                    out.at({t, j, oh, ow}) = mx;
                }
            }
        }
    }
    return out;
}

void SSTCNConfig::validate() const {
    if (frames < 1 || joints < 1 || height < 3 || width < 3)
        throw config_error("sstcn: feature dimensions too small");
    if (classes < 1) throw config_error("sstcn: class count must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw config_error("sstcn: dropout rate must be in [0,1)");
}

namespace {
NdArray randn(Shape shape, double std, Rng& rng) {
    std::normal_distribution<double> dist(0.0, std);
    NdArray out(std::move(shape));
    for (int64_t i = 0; i < out.size(); ++i) out[i] = dist(rng);
    return out;
}
}  // namespace

SSTCNModel::SSTCNModel(SSTCNConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int F = cfg_.frames, J = cfg_.joints;
    s0_depthwise_ = params_.make("s0.depthwise", randn({J, 1, 3, 3}, std::sqrt(2.0 / 9.0), rng));
    s0_pointwise_ = params_.make("s0.pointwise", randn({J, J, 1, 1}, std::sqrt(2.0 / J), rng));
    s0_gamma_ = params_.make("s0.gamma", NdArray::full({J}, 1.0));
    s0_beta_ = params_.make("s0.beta", NdArray::zeros({J}));
    s0_state_ = std::make_unique<NormState>(J);

    s1_temporal_ = params_.make("s1.temporal", randn({F, F, 1, 1}, std::sqrt(2.0 / F), rng));
    s1_gamma_ = params_.make("s1.gamma", NdArray::full({F}, 1.0));
    s1_beta_ = params_.make("s1.beta", NdArray::zeros({F}));
    s1_state_ = std::make_unique<NormState>(F);

    s2_kernel_ = params_.make("s2.kernel", randn({F * J, J, 3, 3}, std::sqrt(2.0 / (9.0 * J)), rng));
    s2_gamma_ = params_.make("s2.gamma", NdArray::full({F * J}, 1.0));
    s2_beta_ = params_.make("s2.beta", NdArray::zeros({F * J}));
    s2_state_ = std::make_unique<NormState>(F * J);

    s3_kernel_ = params_.make("s3.kernel", randn({J * F, F, 3, 3}, std::sqrt(2.0 / (9.0 * F)), rng));
    s3_gamma_ = params_.make("s3.gamma", NdArray::full({J * F}, 1.0));
    s3_beta_ = params_.make("s3.beta", NdArray::zeros({J * F}));
    s3_state_ = std::make_unique<NormState>(J * F);

    const int feat = J * F;
    fc1_w_ = params_.make("head.fc1.w", randn({feat, cfg_.hidden}, std::sqrt(2.0 / feat), rng));
    fc1_b_ = params_.make("head.fc1.b", NdArray::zeros({cfg_.hidden}));
    fc2_w_ = params_.make("head.fc2.w", randn({cfg_.hidden, cfg_.classes}, std::sqrt(1.0 / cfg_.hidden), rng));
    fc2_b_ = params_.make("head.fc2.b", NdArray::zeros({cfg_.classes}));
}

Tape::Id SSTCNModel::dropout_mask(Tape& tape, Tape::Id x, bool training, Rng* rng) {
    if (!training || cfg_.dropout <= 0.0) return x;
    if (!rng) throw config_error("sstcn: training forward needs an RNG for dropout");
    const NdArray& v = tape.value(x);
    NdArray mask(v.shape());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep = 1.0 - cfg_.dropout;
    for (int64_t i = 0; i < mask.size(); ++i) mask[i] = unit(*rng) < keep ? 1.0 / keep : 0.0;
    return tape.mul(x, tape.constant(mask));
}

Tape::Id SSTCNModel::forward(Tape& tape, const NdArray& input, bool training, Rng* rng) {
    const int F = cfg_.frames, J = cfg_.joints, H = cfg_.height, W = cfg_.width;
    if (input.rank() != 5 || input.dim(1) != F || input.dim(2) != J || input.dim(3) != H || input.dim(4) != W)
        throw config_error("sstcn stage 0: expected input [N," + std::to_string(F) + "," + std::to_string(J) + "," +
                           std::to_string(H) + "," + std::to_string(W) + "], got " + shape_str(input.shape()));
    const int N = input.dim(0);

    // stage 0: per-frame separable 2D convolution over the joint channels
    Tape::Id x = tape.reshape(tape.constant(input), {N * F, J, H, W});
    {
        Tape::Id y = tape.conv2d(x, tape.param(s0_depthwise_), /*groups=*/J, /*pad=*/1);
        y = tape.conv2d(y, tape.param(s0_pointwise_), 1, 0);
        y = tape.channel_norm(y, tape.param(s0_gamma_), tape.param(s0_beta_), *s0_state_, training);
        y = tape.swish(y);
        y = dropout_mask(tape, y, training, rng);
        x = tape.add(x, y);
    }

    // stage 1: flatten joints into the height axis (j*H + h) and mix frames
    x = tape.reshape(x, {N, F, J * H, W});
    {
        Tape::Id y = tape.conv2d(x, tape.param(s1_temporal_), 1, 0);
        y = tape.channel_norm(y, tape.param(s1_gamma_), tape.param(s1_beta_), *s1_state_, training);
        y = tape.swish(y);
        y = dropout_mask(tape, y, training, rng);
        x = tape.add(x, y);
    }

    // stage 2: frame-major grouping, 3x3 spatial conv within each frame
    x = tape.reshape(x, {N, F * J, H, W});
    {
        Tape::Id y = tape.conv2d(x, tape.param(s2_kernel_), F, 1);
        y = tape.channel_norm(y, tape.param(s2_gamma_), tape.param(s2_beta_), *s2_state_, training);
        y = tape.swish(y);
        y = dropout_mask(tape, y, training, rng);
        x = tape.add(x, y);
    }

    // stage 3: shuffle to joint-major, 3x3 spatio-temporal conv per joint
    x = tape.reshape(x, {N, F, J, H, W});
    x = tape.permute(x, {0, 2, 1, 3, 4});
    x = tape.reshape(x, {N, J * F, H, W});
    {
        x = tape.conv2d(x, tape.param(s3_kernel_), J, 1);
        x = tape.channel_norm(x, tape.param(s3_gamma_), tape.param(s3_beta_), *s3_state_, training);
        x = tape.swish(x);
        x = dropout_mask(tape, x, training, rng);
    }

    // head: spatial pooling + two fully connected layers
    x = tape.reshape(tape.mean_axes(x, {2, 3}), {N, J * F});
    x = tape.badd(tape.matmul(x, tape.param(fc1_w_)), tape.reshape(tape.param(fc1_b_), {1, cfg_.hidden}));
    x = tape.swish(x);
    x = dropout_mask(tape, x, training, rng);
    x = tape.badd(tape.matmul(x, tape.param(fc2_w_)), tape.reshape(tape.param(fc2_b_), {1, cfg_.classes}));
    return x;
}

NdArray SSTCNModel::predict(const NdArray& input) {
    Tape tape;
    return tape.value(forward(tape, input, /*training=*/false));
}

}  // namespace samslr
