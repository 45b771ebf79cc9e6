// Python bindings for the core operations: graph construction, stream
// derivation, synthetic data, fusion, and evaluation.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "samslr/fusion.hpp"
#include "samslr/graph.hpp"
#include "samslr/streams.hpp"
#include "samslr/train.hpp"

namespace py = pybind11;
using namespace samslr;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

NdArray to_ndarray(const DoubleArray& a) {
    Shape shape;
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(static_cast<int>(a.shape(i)));
    NdArray out(shape);
    std::memcpy(out.data(), a.data(), static_cast<size_t>(out.size()) * sizeof(double));
    return out;
}

py::array from_ndarray(const NdArray& a) {
    std::vector<py::ssize_t> shape;
    for (int i = 0; i < a.rank(); ++i) shape.push_back(a.dim(i));
    py::array_t<double> out(shape);
    std::memcpy(out.mutable_data(), a.data(), static_cast<size_t>(a.size()) * sizeof(double));
    return out;
}

KeypointSequence to_sequence(const DoubleArray& data, double frame_w, double frame_h) {
    if (data.ndim() != 3) throw input_error("sequence must be [frames, landmarks, channels]");
    KeypointSequence seq;
    seq.frame_w = frame_w;
    seq.frame_h = frame_h;
    seq.data = to_ndarray(data);
    return seq;
}

std::vector<LogitMatrix> to_modalities(const std::vector<DoubleArray>& arrays) {
    std::vector<LogitMatrix> mods;
    for (size_t i = 0; i < arrays.size(); ++i) {
        LogitMatrix m;
        m.modality = "modality" + std::to_string(i);
        m.data = to_ndarray(arrays[i]);
        if (m.data.rank() != 2) throw input_error("logit matrices must be 2-D [samples, classes]");
        mods.push_back(std::move(m));
    }
    return mods;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "skeleton-based sign language recognition: core operations";

    py::register_exception<Error>(m, "SamslrError");

    // ---- graph -----------------------------------------------------------
    m.def("reduced_keypoint_indices", [] {
        const auto& idx = reduced_keypoint_indices();
        return std::vector<int>(idx.begin(), idx.end());
    }, "The fixed 133 -> 27 landmark selection.");

    m.def("reduced_adjacency", [] {
        return from_ndarray(build_adjacency(reduced_graph()));
    }, "Binary 27x27 adjacency of the reduced skeleton.");

    m.def("normalized_adjacency", [](bool spatial_partitions) {
        const NdArray A = build_adjacency(reduced_graph());
        const NormalizedAdjacency norm =
            spatial_partitions
                ? normalize_adjacency(A, PartitionScheme::SpatialThree, reduced_reference_pose())
                : normalize_adjacency(A, PartitionScheme::Single);
        std::vector<py::array> parts;
        for (const auto& p : norm.partitions) parts.push_back(from_ndarray(p));
        return parts;
    }, py::arg("spatial_partitions") = true,
       "Symmetrically normalized adjacency, optionally split into the three spatial partitions.");

    // ---- streams ---------------------------------------------------------
    m.def("prepare_streams",
          [](const DoubleArray& data, double frame_w, double frame_h, int target_frames) {
              KeypointSequence seq = to_sequence(data, frame_w, frame_h);
              seq = reduce_sequence(seq);
              seq = normalize_coords(seq, seq.frame_w, seq.frame_h);
              Rng rng(0);  // deterministic: centered frame sampling
              seq = sample_frames(seq, target_frames, false, rng);
              const FourStreams s = derive_all_streams(to_stream(seq), reduced_graph());
              py::dict out;
              out["joint"] = from_ndarray(s.joint.data);
              out["bone"] = from_ndarray(s.bone.data);
              out["joint_motion"] = from_ndarray(s.joint_motion.data);
              out["bone_motion"] = from_ndarray(s.bone_motion.data);
              return out;
          },
          py::arg("keypoints"), py::arg("frame_w"), py::arg("frame_h"), py::arg("target_frames") = 150,
          "133-landmark pixel sequence [T, 133, C] -> the four derived stream tensors [C, T', 27].");

    // ---- synthetic data --------------------------------------------------
    m.def("generate_synthetic",
          [](int classes, int samples_per_class, int frames, double noise_std, unsigned seed) {
              SyntheticGestureSpec spec;
              spec.classes = classes;
              spec.samples_per_class = samples_per_class;
              spec.frames = frames;
              spec.noise_std = noise_std;
              Rng rng(seed);
              const LabeledSequences data = generate_synthetic(spec, rng);
              const int N = static_cast<int>(data.sequences.size());
              NdArray stacked({N, frames, kWholeBodyLandmarks, 3});
              const int64_t per = data.sequences[0].data.size();
              for (int i = 0; i < N; ++i)
                  for (int64_t j = 0; j < per; ++j) stacked[i * per + j] = data.sequences[static_cast<size_t>(i)].data[j];
              return py::make_tuple(from_ndarray(stacked), data.labels);
          },
          py::arg("classes") = 8, py::arg("samples_per_class") = 20, py::arg("frames") = 48,
          py::arg("noise_std") = 0.02, py::arg("seed") = 1,
          "Deterministic synthetic gesture dataset: ([N, T, 133, 3] pixels, labels).");

    // ---- losses ----------------------------------------------------------
    m.def("smooth_labels",
          [](int y, int num_classes, double epsilon) { return from_ndarray(smooth_labels(y, num_classes, epsilon)); },
          py::arg("label"), py::arg("num_classes"), py::arg("epsilon") = 0.1,
          "Smoothed one-hot target.");

    m.def("smoothed_cross_entropy",
          [](const DoubleArray& logits, const std::vector<int>& labels, double epsilon) {
              return smoothed_ce_value(to_ndarray(logits), labels, epsilon);
          },
          py::arg("logits"), py::arg("labels"), py::arg("epsilon") = 0.1,
          "Mean label-smoothed cross entropy of [N, K] logits.");

    // ---- fusion ----------------------------------------------------------
    m.def("fuse_fixed",
          [](const std::vector<DoubleArray>& mods, const std::vector<double>& weights) {
              return from_ndarray(fuse_fixed(to_modalities(mods), weights).data);
          },
          py::arg("modalities"), py::arg("weights"),
          "Fixed weighted sum of per-modality logit matrices.");

    m.def("sensitivity_sweep",
          [](const std::vector<DoubleArray>& mods, const std::vector<int>& labels,
             const std::vector<double>& base, const std::vector<double>& grid) {
              const SweepResult res = sensitivity_sweep(to_modalities(mods), labels, base, grid);
              std::vector<py::tuple> rows;
              for (const SweepRow& r : res.rows) rows.push_back(py::make_tuple(r.modality, r.weight, r.top1));
              return py::make_tuple(rows, res.best_weight_per_modality);
          },
          py::arg("modalities"), py::arg("labels"), py::arg("base"), py::arg("grid"),
          "One-at-a-time fusion weight sweep: ([(modality, weight, top1)], best weights).");

    // ---- metrics ---------------------------------------------------------
    m.def("evaluate",
          [](const DoubleArray& logits, const std::vector<int>& labels) {
              const Metrics m2 = evaluate(to_ndarray(logits), labels);
              py::dict d;
              d["top1"] = m2.top1;
              d["top5"] = m2.top5;
              d["per_class_top1"] = m2.per_class_top1;
              d["per_class_top5"] = m2.per_class_top5;
              return d;
          },
          py::arg("logits"), py::arg("labels"),
          "Top-1/top-5 accuracy, per instance and averaged per class.");
}
