#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "samslr/ndarray.hpp"

namespace samslr {

// Keypoint sequence: data is [T, landmarks, channels] with channels
// (x, y, s) or (x, y, z, s). Coordinates in pixels until normalized.
struct KeypointSequence {
    NdArray data;  // [T, L, C]
    double frame_w = 0.0;
    double frame_h = 0.0;

    int frames() const { return data.dim(0); }
    int landmarks() const { return data.dim(1); }
    int channels() const { return data.dim(2); }
};

struct SkeletonGraph {
    int node_count = 0;
    std::vector<std::pair<int, int>> edges;  // stored parent -> child
    std::vector<std::string> node_labels;
    int root = 0;
};

enum class PartitionScheme {
    Single,        // one partition: the full normalized matrix
    SpatialThree,  // self / centripetal / centrifugal
};

struct NormalizedAdjacency {
    std::vector<NdArray> partitions;  // each [V,V]; they sum to D^{-1/2}(A+I)D^{-1/2}

    NdArray combined() const {
        NdArray out = partitions.at(0);
        for (size_t i = 1; i < partitions.size(); ++i) out = add(out, partitions[i]);
        return out;
    }
};

constexpr int kWholeBodyLandmarks = 133;
constexpr int kReducedNodeCount = 27;

// Fixed 133 -> 27 selection: 7 upper-body nodes (nose, eyes, shoulders,
// elbows) then 10 per hand (wrist, thumb tip, and knuckle+tip for
// index/middle/ring/pinky), left hand before right.
const std::array<int, kReducedNodeCount>& reduced_keypoint_indices();

// Left/right node pairs of the reduced graph, used by mirroring.
const std::vector<std::pair<int, int>>& reduced_mirror_pairs();

// Canonical node coordinates used as the reference frame for the spatial
// partitioning's gravity center.
const std::vector<std::pair<double, double>>& reduced_reference_pose();

// The 27-node tree rooted at the nose.
SkeletonGraph reduced_graph();

// A[i][j] = 1 iff shortest-path distance between i and j is 1.
// Throws if the graph is disconnected.
NdArray build_adjacency(const SkeletonGraph& graph);

// D^{-1/2}(A+I)D^{-1/2} split into spatial partitions. `positions` gives
// per-node reference coordinates (required for SpatialThree).
NormalizedAdjacency normalize_adjacency(const NdArray& A, PartitionScheme scheme,
                                        const std::vector<std::pair<double, double>>& positions = {});

// Select the fixed 27-node subset from a 133-landmark sequence.
KeypointSequence reduce_sequence(const KeypointSequence& seq);

// Read z from per-frame depth maps at each landmark location, producing a
// (x,y,z,s) sequence. z is scaled to [-1,1] via the 1st/99th percentile of
// sampled landmark depths; zero-depth pixels fall back to the median of
// their 5x5 neighborhood.
KeypointSequence attach_depth(const KeypointSequence& seq, const std::vector<NdArray>& depth_maps);

}  // namespace samslr
