#include "samslr/streams.hpp"

#include <cmath>

namespace samslr {

const char* stream_kind_name(StreamKind k) {
    switch (k) {
        case StreamKind::Joint: return "joint";
        case StreamKind::Bone: return "bone";
        case StreamKind::JointMotion: return "joint_motion";
        case StreamKind::BoneMotion: return "bone_motion";
    }
    return "?";
}

StreamKind stream_kind_from_name(const std::string& name) {
    if (name == "joint") return StreamKind::Joint;
    if (name == "bone") return StreamKind::Bone;
    if (name == "joint_motion") return StreamKind::JointMotion;
    if (name == "bone_motion") return StreamKind::BoneMotion;
    throw config_error("unknown stream kind: " + name);
}

KeypointSequence normalize_coords(const KeypointSequence& seq, double frame_w, double frame_h) {
    if (frame_w <= 0.0 || frame_h <= 0.0) throw input_error("normalize_coords: frame size must be positive");
    KeypointSequence out = seq;
    const int T = seq.frames(), L = seq.landmarks();
    for (int t = 0; t < T; ++t)
        for (int n = 0; n < L; ++n) {
            out.data.at({t, n, 0}) = 2.0 * seq.data.at({t, n, 0}) / frame_w - 1.0;
            out.data.at({t, n, 1}) = 2.0 * seq.data.at({t, n, 1}) / frame_h - 1.0;
        }
    return out;
}

KeypointSequence sample_frames(const KeypointSequence& seq, int target_frames, bool training, Rng& rng) {
    const int L = seq.frames();
    if (L < 1) throw input_error("sample_frames: empty sequence");
    if (target_frames < 1) throw input_error("sample_frames: target must be positive");
    const int V = seq.landmarks(), C = seq.channels();
    KeypointSequence out;
    out.frame_w = seq.frame_w;
    out.frame_h = seq.frame_h;
    out.data = NdArray({target_frames, V, C});
    int offset = 0;
    if (L >= target_frames) {
        if (training) {
            std::uniform_int_distribution<int> dist(0, L - target_frames);
            offset = dist(rng);
        } else {
            offset = (L - target_frames) / 2;
        }
    }
    for (int t = 0; t < target_frames; ++t) {
        const int src = (L >= target_frames) ? offset + t : t % L;
        for (int n = 0; n < V; ++n)
            for (int c = 0; c < C; ++c) out.data.at({t, n, c}) = seq.data.at({src, n, c});
    }
    return out;
}

KeypointSequence augment(const KeypointSequence& seq, const AugmentationConfig& cfg, Rng& rng) {
    if (cfg.mirror_prob < 0.0 || cfg.mirror_prob > 1.0 || cfg.rotation_range_deg < 0.0 ||
        cfg.scale_range < 0.0 || cfg.jitter_std < 0.0 || cfg.shift_range < 0.0)
        throw config_error("augment: ranges must be non-negative, mirror_prob in [0,1]");
    KeypointSequence out = seq;
    const int T = seq.frames(), V = seq.landmarks(), C = seq.channels();
    const int coord_channels = C - 1;  // s is last

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool do_mirror = cfg.mirror_prob > 0.0 && unit(rng) < cfg.mirror_prob;
    if (do_mirror) {
        if (V != kReducedNodeCount) throw config_error("augment: mirroring requires the 27-node layout");
        for (int t = 0; t < T; ++t) {
            for (const auto& [a, b] : reduced_mirror_pairs())
                for (int c = 0; c < C; ++c)
                    std::swap(out.data.at({t, a, c}), out.data.at({t, b, c}));
            for (int n = 0; n < V; ++n) out.data.at({t, n, 0}) = -out.data.at({t, n, 0});
        }
    }

    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    const double theta = cfg.rotation_range_deg * sym(rng) * M_PI / 180.0;
    const double s = 1.0 + cfg.scale_range * sym(rng);
    const double shift_x = cfg.shift_range * sym(rng);
    const double shift_y = cfg.shift_range * sym(rng);
    const double ct = std::cos(theta), st = std::sin(theta);
    std::normal_distribution<double> gauss(0.0, cfg.jitter_std > 0.0 ? cfg.jitter_std : 1.0);

    for (int t = 0; t < T; ++t)
        for (int n = 0; n < V; ++n) {
            const double x = out.data.at({t, n, 0});
            const double y = out.data.at({t, n, 1});
            // counter-clockwise rotation: (1,0) -> (cos, sin)
            double rx = ct * x - st * y;
            double ry = st * x + ct * y;
            rx = rx * s + shift_x;
            ry = ry * s + shift_y;
            if (cfg.jitter_std > 0.0) {
                rx += gauss(rng);
                ry += gauss(rng);
            }
            out.data.at({t, n, 0}) = rx;
            out.data.at({t, n, 1}) = ry;
            if (coord_channels > 2) {
                double z = out.data.at({t, n, 2});
                if (cfg.jitter_std > 0.0) z += gauss(rng);
                out.data.at({t, n, 2}) = z;
            }
        }
    return out;
}

StreamTensor to_stream(const KeypointSequence& seq) {
    const int T = seq.frames(), V = seq.landmarks(), C = seq.channels();
    StreamTensor st;
    st.kind = StreamKind::Joint;
    st.data = NdArray({C, T, V});
    for (int t = 0; t < T; ++t)
        for (int n = 0; n < V; ++n)
            for (int c = 0; c < C; ++c) st.data.at({c, t, n}) = seq.data.at({t, n, c});
    return st;
}

namespace {

// parent[child] over the tree edges; root has parent -1
std::vector<int> tree_parents(const SkeletonGraph& graph) {
    std::vector<int> parent(static_cast<size_t>(graph.node_count), -1);
    std::vector<char> has_parent(static_cast<size_t>(graph.node_count), 0);
    for (const auto& [p, c] : graph.edges) {
        if (c == graph.root || has_parent[static_cast<size_t>(c)])
            throw validation_error("derive_bones: edge orientation is not a tree rooted at node " +
                                   std::to_string(graph.root));
        parent[static_cast<size_t>(c)] = p;
        has_parent[static_cast<size_t>(c)] = 1;
    }
    if (static_cast<int>(graph.edges.size()) != graph.node_count - 1)
        throw validation_error("derive_bones: edge count does not form a tree");
    return parent;
}

}  // namespace

StreamTensor derive_bones(const StreamTensor& joints, const SkeletonGraph& graph) {
    if (joints.nodes() != graph.node_count) throw validation_error("derive_bones: node count mismatch");
    const auto parent = tree_parents(graph);
    const int C = joints.channels(), T = joints.frames(), V = joints.nodes();
    StreamTensor out;
    out.kind = StreamKind::Bone;
    out.data = NdArray({C, T, V});
    const int s_ch = C - 1;
    for (int t = 0; t < T; ++t)
        for (int v = 0; v < V; ++v) {
            const int p = parent[static_cast<size_t>(v)];
            for (int c = 0; c < s_ch; ++c)
                out.data.at({c, t, v}) =
                    (p < 0) ? 0.0 : joints.data.at({c, t, v}) - joints.data.at({c, t, p});
            out.data.at({s_ch, t, v}) = joints.data.at({s_ch, t, v});
        }
    return out;
}

StreamTensor derive_motion(const StreamTensor& x) {
    const int C = x.channels(), T = x.frames(), V = x.nodes();
    if (T < 2) throw input_error("derive_motion: need at least 2 frames");
    StreamTensor out;
    out.kind = (x.kind == StreamKind::Bone) ? StreamKind::BoneMotion : StreamKind::JointMotion;
    out.data = NdArray({C, T, V});
    const int s_ch = C - 1;
    for (int t = 0; t < T; ++t)
        for (int v = 0; v < V; ++v) {
            for (int c = 0; c < s_ch; ++c)
                out.data.at({c, t, v}) = (t + 1 < T) ? x.data.at({c, t + 1, v}) - x.data.at({c, t, v}) : 0.0;
            out.data.at({s_ch, t, v}) = x.data.at({s_ch, t, v});
        }
    return out;
}

const StreamTensor& FourStreams::by_kind(StreamKind k) const {
    switch (k) {
        case StreamKind::Joint: return joint;
        case StreamKind::Bone: return bone;
        case StreamKind::JointMotion: return joint_motion;
        case StreamKind::BoneMotion: return bone_motion;
    }
    throw config_error("by_kind: bad stream kind");
}

FourStreams derive_all_streams(const StreamTensor& joint, const SkeletonGraph& graph) {
    FourStreams fs;
    fs.joint = joint;
    fs.bone = derive_bones(joint, graph);
    fs.joint_motion = derive_motion(joint);
    fs.bone_motion = derive_motion(fs.bone);
    return fs;
}

}  // namespace samslr
