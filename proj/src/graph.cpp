#include "samslr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace samslr {

const std::array<int, kReducedNodeCount>& reduced_keypoint_indices() {
    // COCO-WholeBody layout: body 0-16, feet 17-22, face 23-90,
    // left hand 91-111, right hand 112-132.
    static const std::array<int, kReducedNodeCount> idx = {
        0,   1,   2,   5,   6,   7,   8,                       // nose, eyes, shoulders, elbows
        91,  95,  96,  99,  100, 103, 104, 107, 108, 111,      // left hand
        112, 116, 117, 120, 121, 124, 125, 128, 129, 132,      // right hand
    };
    return idx;
}

const std::vector<std::pair<int, int>>& reduced_mirror_pairs() {
    static const std::vector<std::pair<int, int>> pairs = {
        {1, 2},  {3, 4},  {5, 6},  {7, 17},  {8, 18},  {9, 19},  {10, 20},
        {11, 21}, {12, 22}, {13, 23}, {14, 24}, {15, 25}, {16, 26},
    };
    return pairs;
}

const std::vector<std::pair<double, double>>& reduced_reference_pose() {
    // Image-style coordinates (y grows downward), upright signer facing
    // the camera; "left" is the signer's left (image right).
    static const std::vector<std::pair<double, double>> pose = {
        {0.00, 0.00},                                     // nose
        {0.08, -0.05}, {-0.08, -0.05},                    // eyes
        {0.35, 0.30},  {-0.35, 0.30},                     // shoulders
        {0.55, 0.65},  {-0.55, 0.65},                     // elbows
        // left hand: wrist, thumb tip, then knuckle/tip per finger
        {0.60, 1.00},  {0.52, 1.10}, {0.58, 1.12}, {0.57, 1.24},
        {0.61, 1.13},  {0.61, 1.26}, {0.64, 1.12}, {0.65, 1.24},
        {0.67, 1.10},  {0.68, 1.20},
        // right hand (mirrored)
        {-0.60, 1.00}, {-0.52, 1.10}, {-0.58, 1.12}, {-0.57, 1.24},
        {-0.61, 1.13}, {-0.61, 1.26}, {-0.64, 1.12}, {-0.65, 1.24},
        {-0.67, 1.10}, {-0.68, 1.20},
    };
    return pose;
}

SkeletonGraph reduced_graph() {
    SkeletonGraph g;
    g.node_count = kReducedNodeCount;
    g.root = 0;
    g.edges = {
        {0, 1}, {0, 2}, {0, 3}, {0, 4}, {3, 5}, {4, 6}, {5, 7}, {6, 17},
        // left hand
        {7, 8}, {7, 9}, {9, 10}, {7, 11}, {11, 12}, {7, 13}, {13, 14}, {7, 15}, {15, 16},
        // right hand
        {17, 18}, {17, 19}, {19, 20}, {17, 21}, {21, 22}, {17, 23}, {23, 24}, {17, 25}, {25, 26},
    };
    g.node_labels = {
        "nose", "eye_l", "eye_r", "shoulder_l", "shoulder_r", "elbow_l", "elbow_r",
        "wrist_l", "thumb_tip_l", "index_mcp_l", "index_tip_l", "middle_mcp_l", "middle_tip_l",
        "ring_mcp_l", "ring_tip_l", "pinky_mcp_l", "pinky_tip_l",
        "wrist_r", "thumb_tip_r", "index_mcp_r", "index_tip_r", "middle_mcp_r", "middle_tip_r",
        "ring_mcp_r", "ring_tip_r", "pinky_mcp_r", "pinky_tip_r",
    };
    return g;
}

NdArray build_adjacency(const SkeletonGraph& graph) {
    const int V = graph.node_count;
    if (V < 1) throw validation_error("build_adjacency: empty graph");
    NdArray A({V, V});
    for (const auto& [i, j] : graph.edges) {
        if (i < 0 || j < 0 || i >= V || j >= V) throw validation_error("build_adjacency: edge index out of range");
        if (i == j) throw validation_error("build_adjacency: self-loop edge");
        A.at({i, j}) = 1.0;
        A.at({j, i}) = 1.0;
    }
    // connectivity check (BFS from node 0)
    std::vector<char> seen(static_cast<size_t>(V), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v = 0; v < V; ++v)
            if (A.at({u, v}) > 0.0 && !seen[static_cast<size_t>(v)]) {
                seen[static_cast<size_t>(v)] = 1;
                ++reached;
                q.push(v);
            }
    }
    if (reached != V)
        throw validation_error("build_adjacency: graph is disconnected (" + std::to_string(reached) + "/" +
                               std::to_string(V) + " nodes reachable)");
    return A;
}

NormalizedAdjacency normalize_adjacency(const NdArray& A, PartitionScheme scheme,
                                        const std::vector<std::pair<double, double>>& positions) {
    if (A.rank() != 2 || A.dim(0) != A.dim(1)) throw validation_error("normalize_adjacency: A must be square");
    const int V = A.dim(0);
    for (int i = 0; i < V; ++i) {
        if (A.at({i, i}) != 0.0) throw validation_error("normalize_adjacency: nonzero diagonal");
        for (int j = 0; j < V; ++j)
            if (A.at({i, j}) != A.at({j, i})) throw validation_error("normalize_adjacency: A not symmetric");
    }
    std::vector<double> deg(static_cast<size_t>(V));
    for (int i = 0; i < V; ++i) {
        double d = 1.0;  // self-loop from I
        for (int j = 0; j < V; ++j) d += A.at({i, j});
        deg[static_cast<size_t>(i)] = d;
    }
    NdArray norm({V, V});
    for (int i = 0; i < V; ++i)
        for (int j = 0; j < V; ++j) {
            const double aij = A.at({i, j}) + (i == j ? 1.0 : 0.0);
            if (aij != 0.0)
                norm.at({i, j}) = aij / std::sqrt(deg[static_cast<size_t>(i)] * deg[static_cast<size_t>(j)]);
        }

    NormalizedAdjacency out;
    if (scheme == PartitionScheme::Single) {
        out.partitions.push_back(norm);
        return out;
    }
    if (static_cast<int>(positions.size()) != V)
        throw config_error("normalize_adjacency: spatial partitioning needs one reference position per node");
    double cx = 0.0, cy = 0.0;
    for (const auto& [x, y] : positions) {
        cx += x;
        cy += y;
    }
    cx /= V;
    cy /= V;
    std::vector<double> dist(static_cast<size_t>(V));
    for (int i = 0; i < V; ++i) {
        const double dx = positions[static_cast<size_t>(i)].first - cx;
        const double dy = positions[static_cast<size_t>(i)].second - cy;
        dist[static_cast<size_t>(i)] = std::hypot(dx, dy);
    }
    NdArray self({V, V}), centripetal({V, V}), centrifugal({V, V});
    for (int i = 0; i < V; ++i)
        for (int j = 0; j < V; ++j) {
            const double v = norm.at({i, j});
            if (v == 0.0) continue;
            if (i == j)
                self.at({i, j}) = v;
            else if (dist[static_cast<size_t>(j)] < dist[static_cast<size_t>(i)])
                centripetal.at({i, j}) = v;
            else
                centrifugal.at({i, j}) = v;
        }
    out.partitions = {self, centripetal, centrifugal};
    return out;
}

KeypointSequence reduce_sequence(const KeypointSequence& seq) {
    if (seq.landmarks() != kWholeBodyLandmarks)
        throw format_error("reduce_sequence: expected " + std::to_string(kWholeBodyLandmarks) +
                           " landmarks per frame, got " + std::to_string(seq.landmarks()));
    const int T = seq.frames(), C = seq.channels();
    const auto& idx = reduced_keypoint_indices();
    KeypointSequence out;
    out.frame_w = seq.frame_w;
    out.frame_h = seq.frame_h;
    out.data = NdArray({T, kReducedNodeCount, C});
    for (int t = 0; t < T; ++t)
        for (int n = 0; n < kReducedNodeCount; ++n)
            for (int c = 0; c < C; ++c) out.data.at({t, n, c}) = seq.data.at({t, idx[static_cast<size_t>(n)], c});
    return out;
}

namespace {

double depth_lookup(const NdArray& map, int px, int py) {
    const int H = map.dim(0), W = map.dim(1);
    px = std::clamp(px, 0, W - 1);
    py = std::clamp(py, 0, H - 1);
    double z = map.at({py, px});
    if (z == 0.0) {
        // masked pixel: median of the non-zero 5x5 neighborhood, else 0
        std::vector<double> nb;
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
                const int qx = px + dx, qy = py + dy;
                if (qx < 0 || qy < 0 || qx >= W || qy >= H) continue;
                const double v = map.at({qy, qx});
                if (v != 0.0) nb.push_back(v);
            }
        if (!nb.empty()) {
            std::nth_element(nb.begin(), nb.begin() + static_cast<long>(nb.size() / 2), nb.end());
            z = nb[nb.size() / 2];
        }
    }
    return z;
}

}  // namespace

KeypointSequence attach_depth(const KeypointSequence& seq, const std::vector<NdArray>& depth_maps) {
    if (depth_maps.empty() || static_cast<int>(depth_maps.size()) != seq.frames())
        throw mode_error("attach_depth: depth maps missing or frame count mismatch; use the 2D pipeline");
    if (seq.channels() != 3) throw format_error("attach_depth: input must be (x,y,s) sequences");
    const int T = seq.frames(), L = seq.landmarks();

    NdArray raw_z({T, L});
    std::vector<double> samples;
    samples.reserve(static_cast<size_t>(T) * static_cast<size_t>(L));
    for (int t = 0; t < T; ++t) {
        const NdArray& map = depth_maps[static_cast<size_t>(t)];
        if (map.rank() != 2) throw format_error("attach_depth: depth map must be 2-D");
        for (int n = 0; n < L; ++n) {
            const int px = static_cast<int>(std::lround(seq.data.at({t, n, 0})));
            const int py = static_cast<int>(std::lround(seq.data.at({t, n, 1})));
            const double z = depth_lookup(map, px, py);
            raw_z.at({t, n}) = z;
            samples.push_back(z);
        }
    }
    // robust min-max via 1st/99th percentile of sampled landmark depths
    std::sort(samples.begin(), samples.end());
    const auto pct = [&](double p) {
        const size_t i = static_cast<size_t>(p * static_cast<double>(samples.size() - 1));
        return samples[i];
    };
    const double lo = pct(0.01), hi = pct(0.99);
    const double span = (hi > lo) ? (hi - lo) : 1.0;

    KeypointSequence out;
    out.frame_w = seq.frame_w;
    out.frame_h = seq.frame_h;
    out.data = NdArray({T, L, 4});
    for (int t = 0; t < T; ++t)
        for (int n = 0; n < L; ++n) {
            out.data.at({t, n, 0}) = seq.data.at({t, n, 0});
            out.data.at({t, n, 1}) = seq.data.at({t, n, 1});
            const double z = std::clamp(raw_z.at({t, n}), lo, hi);
            out.data.at({t, n, 2}) = 2.0 * (z - lo) / span - 1.0;
            out.data.at({t, n, 3}) = seq.data.at({t, n, 2});
        }
    return out;
}

}  // namespace samslr
