#pragma once

#include <random>
#include <string>

#include "samslr/graph.hpp"
#include "samslr/ndarray.hpp"

namespace samslr {

using Rng = std::mt19937;

enum class StreamKind { Joint, Bone, JointMotion, BoneMotion };

const char* stream_kind_name(StreamKind k);
StreamKind stream_kind_from_name(const std::string& name);

// One stream as a (channels x frames x nodes) tensor. Channels are
// (x, y, s) or (x, y, z, s) with the confidence channel last.
struct StreamTensor {
    StreamKind kind = StreamKind::Joint;
    NdArray data;  // [C, T, V]

    int channels() const { return data.dim(0); }
    int frames() const { return data.dim(1); }
    int nodes() const { return data.dim(2); }
};

enum class TemporalSampling { RepeatTile, RandomWindow };

struct AugmentationConfig {
    double mirror_prob = 0.5;
    double rotation_range_deg = 13.0;
    double scale_range = 0.1;  // scale drawn from [1 - r, 1 + r]
    double jitter_std = 0.01;
    double shift_range = 0.1;
    TemporalSampling temporal_sampling = TemporalSampling::RandomWindow;

    static AugmentationConfig identity() {
        AugmentationConfig c;
        c.mirror_prob = 0.0;
        c.rotation_range_deg = 0.0;
        c.scale_range = 0.0;
        c.jitter_std = 0.0;
        c.shift_range = 0.0;
        return c;
    }
};

// x -> 2x/W - 1, y -> 2y/H - 1; s (and z) unchanged.
KeypointSequence normalize_coords(const KeypointSequence& seq, double frame_w, double frame_h);

// L < T: tile frames cyclically; L >= T: window of T frames (random offset
// when training, centered otherwise).
KeypointSequence sample_frames(const KeypointSequence& seq, int target_frames, bool training, Rng& rng);

// Order: mirror -> rotate -> scale -> shift -> jitter. Mirror negates x and
// swaps left/right nodes; rotation/scale act on (x,y) about the origin;
// shift is one constant offset per sequence; s is never touched.
KeypointSequence augment(const KeypointSequence& seq, const AugmentationConfig& cfg, Rng& rng);

// [T,V,C] sequence -> [C,T,V] joint stream
StreamTensor to_stream(const KeypointSequence& seq);

// bone[child] = child - parent coordinates over the tree edges; the root's
// bone is zero; confidence = child confidence.
StreamTensor derive_bones(const StreamTensor& joints, const SkeletonGraph& graph);

// frame t = frame(t+1) - frame(t) on coordinate channels, last frame zero;
// confidence copied from frame t.
StreamTensor derive_motion(const StreamTensor& x);

struct FourStreams {
    StreamTensor joint, bone, joint_motion, bone_motion;
    const StreamTensor& by_kind(StreamKind k) const;
};

FourStreams derive_all_streams(const StreamTensor& joint, const SkeletonGraph& graph);

}  // namespace samslr
