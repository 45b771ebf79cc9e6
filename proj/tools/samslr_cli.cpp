// samslr: skeleton-based sign language recognition pipeline CLI.
//
// Verbs: prepare, train, infer, fuse, sweep, synth. All verbs honor
// --config, --seed, --mode; exit code 0 on success, distinct non-zero
// codes per error class (see errors.hpp).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "samslr/config.hpp"
#include "samslr/fusion.hpp"
#include "samslr/graph.hpp"
#include "samslr/io.hpp"
#include "samslr/slgcn.hpp"
#include "samslr/sstcn.hpp"
#include "samslr/streams.hpp"
#include "samslr/train.hpp"

namespace fs = std::filesystem;
using namespace samslr;

namespace {

struct GlobalOpts {
    std::string config_path;
    unsigned seed = 1;
    std::string mode;  // "", "2d" or "3d"
};

RunConfig load_config(const GlobalOpts& g) {
    return g.config_path.empty() ? RunConfig::defaults() : RunConfig::parse_file(g.config_path);
}

bool resolve_mode_3d(const GlobalOpts& g, const RunConfig& cfg) {
    if (g.mode.empty()) return cfg.mode_3d();
    if (g.mode == "2d") return false;
    if (g.mode == "3d") return true;
    throw mode_error("--mode must be 2d or 3d, got '" + g.mode + "'");
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// keypoint file -> normalized, reduced, frame-sampled four streams
FourStreams prepare_streams(const KeypointSequence& raw, const RunConfig& cfg, bool want_3d, Rng& rng) {
    if (want_3d && raw.channels() != 4)
        throw mode_error("3d mode requires 4-channel (x,y,z,s) keypoints; input has " +
                         std::to_string(raw.channels()) + " channels (no depth attached)");
    KeypointSequence seq = raw;
    if (!want_3d && seq.channels() == 4) {
        // drop z: keep (x, y, s)
        const int T = seq.frames(), L = seq.landmarks();
        NdArray out({T, L, 3});
        for (int t = 0; t < T; ++t)
            for (int l = 0; l < L; ++l) {
                out.at({t, l, 0}) = seq.data.at({t, l, 0});
                out.at({t, l, 1}) = seq.data.at({t, l, 1});
                out.at({t, l, 2}) = seq.data.at({t, l, 3});
            }
        seq.data = out;
    }
    seq = reduce_sequence(seq);
    seq = normalize_coords(seq, seq.frame_w, seq.frame_h);
    seq = sample_frames(seq, cfg.sample_length(), /*training=*/false, rng);
    return derive_all_streams(to_stream(seq), reduced_graph());
}

// ---------------------------------------------------------------- prepare
int cmd_prepare(const GlobalOpts& g, const std::vector<std::string>& inputs, const std::string& out_dir) {
    const RunConfig cfg = load_config(g);
    const bool want_3d = resolve_mode_3d(g, cfg);
    Rng rng(g.seed);
    fs::create_directories(out_dir);
    for (const std::string& in : inputs) {
        SampleMeta meta;
        const KeypointSequence raw = read_keypoint_file(in, &meta);
        const FourStreams streams = prepare_streams(raw, cfg, want_3d, rng);
        for (StreamKind k : {StreamKind::Joint, StreamKind::Bone, StreamKind::JointMotion, StreamKind::BoneMotion}) {
            const std::string out = (fs::path(out_dir) / (stem_of(in) + "." + stream_kind_name(k) + ".slts")).string();
            write_stream_file(out, streams.by_kind(k));
            std::cout << "wrote " << out << "\n";
        }
    }
    return 0;
}

// ------------------------------------------------------------------ train
struct Dataset {
    std::vector<NdArray> samples;
    std::vector<int> labels;
    std::vector<std::string> ids;
};

Dataset load_keypoint_dataset(const std::vector<std::string>& inputs, const RunConfig& cfg, bool want_3d,
                              StreamKind kind, Rng& rng) {
    Dataset d;
    const SkeletonGraph graph = reduced_graph();
    for (const std::string& in : inputs) {
        SampleMeta meta;
        const KeypointSequence raw = read_keypoint_file(in, &meta);
        if (meta.label < 0) throw data_error("no label in manifest for " + in);
        const FourStreams streams = prepare_streams(raw, cfg, want_3d, rng);
        d.samples.push_back(streams.by_kind(kind).data);
        d.labels.push_back(meta.label);
        d.ids.push_back(meta.id.empty() ? stem_of(in) : meta.id);
    }
    if (d.samples.empty()) throw input_error("no input files given");
    return d;
}

Dataset load_feature_dataset(const std::vector<std::string>& inputs, const SSTCNConfig& scfg) {
    Dataset d;
    for (const std::string& in : inputs) {
        SampleMeta meta;
        const NdArray raw = read_feature_file(in, &meta);
        if (meta.label < 0) throw data_error("no label in manifest for " + in);
        d.samples.push_back(prepare_features(raw, scfg.frames, scfg.height));
        d.labels.push_back(meta.label);
        d.ids.push_back(meta.id.empty() ? stem_of(in) : meta.id);
    }
    if (d.samples.empty()) throw input_error("no input files given");
    return d;
}

std::vector<LogitMatrix> load_logit_files(const std::vector<std::string>& inputs, std::vector<int>* labels) {
    std::vector<LogitMatrix> mods;
    for (size_t i = 0; i < inputs.size(); ++i) {
        std::vector<int> labs;
        mods.push_back(read_logit_file(inputs[i], &labs));
        if (labels && i == 0) *labels = labs;
    }
    if (mods.empty()) throw input_error("no logit files given");
    check_aligned(mods);
    return mods;
}

void report_metrics(const std::string& prefix, const Metrics& m) {
    std::printf("%s top1=%.4f top5=%.4f per_class_top1=%.4f per_class_top5=%.4f\n", prefix.c_str(), m.top1,
                m.top5, m.per_class_top1, m.per_class_top5);
}

int cmd_train(const GlobalOpts& g, const std::string& model, const std::vector<std::string>& inputs,
              const std::string& out, const std::string& resume) {
    const RunConfig cfg = load_config(g);
    const bool want_3d = resolve_mode_3d(g, cfg);
    Rng rng(g.seed);
    TrainConfig tc = cfg.train();
    tc.seed = g.seed;
    const auto on_step = [](int step, double loss) {
        if (step % 50 == 0 || step == 1) std::printf("step %d loss %.6f\n", step, loss);
    };

    if (model == "slgcn") {
        const StreamKind kind = stream_kind_from_name(cfg.get("sl_gcn", "stream"));
        Dataset d = load_keypoint_dataset(inputs, cfg, want_3d, kind, rng);
        const int in_ch = d.samples[0].dim(0);
        SLGCNConfig mcfg = cfg.slgcn(in_ch);
        const NormalizedAdjacency adj =
            normalize_adjacency(build_adjacency(reduced_graph()), mcfg.partition, reduced_reference_pose());
        SLGCNModel m(mcfg, adj, reduced_graph(), rng);
        uint64_t step0 = 0;
        if (!resume.empty()) step0 = load_checkpoint(resume, m.params()).step;
        const auto fwd = [&](Tape& t, const NdArray& batch, bool training, Rng* r) {
            return m.forward(t, batch, training, r);
        };
        const TrainResult res = train_model(fwd, m.params(), d.samples, d.labels, tc, on_step);
        report_metrics("train", res.train_metrics);
        save_checkpoint(out, {ModelType::SLGCN, cfg.hash(), step0 + static_cast<uint64_t>(res.steps_run)},
                        m.params());
    } else if (model == "sstcn") {
        const SSTCNConfig scfg = cfg.sstcn();
        Dataset d = load_feature_dataset(inputs, scfg);
        SSTCNModel m(scfg, rng);
        uint64_t step0 = 0;
        if (!resume.empty()) step0 = load_checkpoint(resume, m.params()).step;
        const auto fwd = [&](Tape& t, const NdArray& batch, bool training, Rng* r) {
            return m.forward(t, batch, training, r);
        };
        const TrainResult res = train_model(fwd, m.params(), d.samples, d.labels, tc, on_step);
        report_metrics("train", res.train_metrics);
        save_checkpoint(out, {ModelType::SSTCN, cfg.hash(), step0 + static_cast<uint64_t>(res.steps_run)},
                        m.params());
    } else if (model == "gem") {
        std::vector<int> labels;
        const std::vector<LogitMatrix> mods = load_logit_files(inputs, &labels);
        for (int y : labels)
            if (y < 0) throw data_error("gem training requires labels in the logit manifest");
        GEMConfig gcfg = cfg.gem(static_cast<int>(mods.size()), mods[0].classes());
        GEMModel m(gcfg, rng);
        GEMTrainConfig gtc = cfg.gem_train();
        gtc.seed = g.seed;
        const GEMTrainResult res = gem_train(m, mods, labels, gtc);
        std::printf("gem best_holdout_top1=%.4f best_epoch=%d\n", res.best_holdout_top1, res.best_epoch);
        save_checkpoint(out, {ModelType::GEM, cfg.hash(), static_cast<uint64_t>(gtc.epochs)}, m.params());
    } else {
        throw config_error("--model must be slgcn, sstcn or gem; got '" + model + "'");
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

// ------------------------------------------------------------------ infer
Dataset load_keypoint_dataset_no_labels(const std::vector<std::string>& inputs, const RunConfig& cfg,
                                        bool want_3d, StreamKind kind, Rng& rng, std::vector<int>* labels);

int cmd_infer(const GlobalOpts& g, const std::string& checkpoint, const std::vector<std::string>& inputs,
              const std::string& out) {
    const RunConfig cfg = load_config(g);
    const bool want_3d = resolve_mode_3d(g, cfg);
    Rng rng(g.seed);
    const CheckpointInfo info = peek_checkpoint(checkpoint);

    LogitMatrix result;
    std::vector<int> labels;
    if (info.model_type == ModelType::SLGCN) {
        const StreamKind kind = stream_kind_from_name(cfg.get("sl_gcn", "stream"));
        Dataset d = load_keypoint_dataset_no_labels(inputs, cfg, want_3d, kind, rng, &labels);
        SLGCNConfig mcfg = cfg.slgcn(d.samples[0].dim(0));
        const NormalizedAdjacency adj =
            normalize_adjacency(build_adjacency(reduced_graph()), mcfg.partition, reduced_reference_pose());
        SLGCNModel m(mcfg, adj, reduced_graph(), rng);
        load_checkpoint(checkpoint, m.params());
        const auto fwd = [&](Tape& t, const NdArray& batch, bool training, Rng* r) {
            return m.forward(t, batch, training, r);
        };
        result.data = predict_all(fwd, d.samples);
        result.modality = stream_kind_name(kind);
        result.sample_ids = d.ids;
    } else if (info.model_type == ModelType::SSTCN) {
        const SSTCNConfig scfg = cfg.sstcn();
        Dataset d;
        for (const std::string& in : inputs) {
            SampleMeta meta;
            const NdArray raw = read_feature_file(in, &meta);
            d.samples.push_back(prepare_features(raw, scfg.frames, scfg.height));
            labels.push_back(meta.label);
            d.ids.push_back(meta.id.empty() ? stem_of(in) : meta.id);
        }
        if (d.samples.empty()) throw input_error("no input files given");
        SSTCNModel m(scfg, rng);
        load_checkpoint(checkpoint, m.params());
        const auto fwd = [&](Tape& t, const NdArray& batch, bool training, Rng* r) {
            return m.forward(t, batch, training, r);
        };
        result.data = predict_all(fwd, d.samples);
        result.modality = "features";
        result.sample_ids = d.ids;
    } else if (info.model_type == ModelType::GEM) {
        const std::vector<LogitMatrix> mods = load_logit_files(inputs, &labels);
        GEMConfig gcfg = cfg.gem(static_cast<int>(mods.size()), mods[0].classes());
        GEMModel m(gcfg, rng);
        load_checkpoint(checkpoint, m.params());
        result.data = m.predict(mods).fused;
        result.modality = "gem";
        result.sample_ids = mods[0].sample_ids;
    } else {
        throw format_error("unrecognized model type in checkpoint");
    }
    const bool have_labels = !labels.empty() && labels.size() == result.sample_ids.size();
    bool any_label = false;
    for (int y : labels) any_label = any_label || y >= 0;
    write_logit_file(out, result, have_labels && any_label ? &labels : nullptr);
    std::cout << "wrote " << out << " (" << result.samples() << " rows)\n";
    if (have_labels && any_label) report_metrics("eval", evaluate(result.data, labels));
    return 0;
}

Dataset load_keypoint_dataset_no_labels(const std::vector<std::string>& inputs, const RunConfig& cfg,
                                        bool want_3d, StreamKind kind, Rng& rng, std::vector<int>* labels) {
    Dataset d;
    for (const std::string& in : inputs) {
        SampleMeta meta;
        const KeypointSequence raw = read_keypoint_file(in, &meta);
        const FourStreams streams = prepare_streams(raw, cfg, want_3d, rng);
        d.samples.push_back(streams.by_kind(kind).data);
        if (labels) labels->push_back(meta.label);
        d.ids.push_back(meta.id.empty() ? stem_of(in) : meta.id);
    }
    if (d.samples.empty()) throw input_error("no input files given");
    return d;
}

// ------------------------------------------------------------------- fuse
std::vector<double> parse_weights(const std::string& s) {
    std::vector<double> w;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            w.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw fusion_error("bad fusion weight '" + item + "'");
        }
    }
    if (w.empty()) throw fusion_error("empty weight list");
    return w;
}

int cmd_fuse(const GlobalOpts& g, const std::string& fusion_mode, const std::vector<std::string>& inputs,
             const std::string& weights_str, const std::string& checkpoint, const std::string& out) {
    const RunConfig cfg = load_config(g);
    Rng rng(g.seed);
    std::vector<int> labels;
    const std::vector<LogitMatrix> mods = load_logit_files(inputs, &labels);

    LogitMatrix fused;
    if (fusion_mode == "fixed") {
        const std::vector<double> alpha = parse_weights(weights_str);
        fused = fuse_fixed(mods, alpha);
    } else if (fusion_mode == "gem") {
        GEMConfig gcfg = cfg.gem(static_cast<int>(mods.size()), mods[0].classes());
        GEMModel m(gcfg, rng);
        if (!checkpoint.empty()) load_checkpoint(checkpoint, m.params());
        fused.data = m.predict(mods).fused;
        fused.modality = "gem";
        fused.sample_ids = mods[0].sample_ids;
    } else {
        throw fusion_error("--fusion must be fixed or gem; got '" + fusion_mode + "'");
    }
    bool any_label = false;
    for (int y : labels) any_label = any_label || y >= 0;
    write_logit_file(out, fused, any_label ? &labels : nullptr);
    std::cout << "wrote " << out << "\n";
    if (any_label) report_metrics("fused", evaluate(fused.data, labels));
    return 0;
}

// ------------------------------------------------------------------ sweep
std::vector<double> parse_grid(const std::string& s) {
    // "start:stop:step"
    double start = 0.0, stop = 0.0, step = 0.0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3 || step <= 0.0)
        throw input_error("grid spec must be start:stop:step with step > 0, got '" + s + "'");
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        const double v = start + step * i;
        if (v > stop + 1e-9) break;
        grid.push_back(v);
    }
    return grid;
}

int cmd_sweep(const GlobalOpts&, const std::vector<std::string>& inputs, const std::string& base_str,
              const std::string& grid_str, const std::string& out) {
    std::vector<int> labels;
    const std::vector<LogitMatrix> mods = load_logit_files(inputs, &labels);
    for (int y : labels)
        if (y < 0) throw data_error("sweep requires labels in the logit manifest");
    std::vector<double> base =
        base_str.empty() ? std::vector<double>(mods.size(), 1.0) : parse_weights(base_str);
    const SweepResult res = sensitivity_sweep(mods, labels, base, parse_grid(grid_str));

    std::ostringstream table;
    table << "modality\tweight\ttop1\n";
    char buf[128];
    for (const SweepRow& r : res.rows) {
        std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.6f\n", mods[static_cast<size_t>(r.modality)].modality.c_str(),
                      r.weight, r.top1);
        table << buf;
    }
    if (out.empty()) {
        std::cout << table.str();
    } else {
        atomic_write(out, table.str());
        std::cout << "wrote " << out << " (" << res.rows.size() << " rows)\n";
    }
    std::cout << "best_weights";
    for (double w : res.best_weight_per_modality) std::printf(" %.4f", w);
    std::cout << "\n";
    return 0;
}

// ------------------------------------------------------------------ synth
int cmd_synth(const GlobalOpts& g, const std::string& out_dir, int classes, int samples, int frames) {
    SyntheticGestureSpec spec;
    spec.classes = classes;
    spec.samples_per_class = samples;
    spec.frames = frames;
    Rng rng(g.seed);
    const LabeledSequences data = generate_synthetic(spec, rng);
    fs::create_directories(out_dir);
    for (size_t i = 0; i < data.sequences.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%04zu.slkp", i);
        SampleMeta meta;
        meta.id = fs::path(name).stem().string();
        meta.label = data.labels[i];
        meta.signer = "synthetic";
        write_keypoint_file((fs::path(out_dir) / name).string(), data.sequences[i], &meta);
    }
    std::cout << "wrote " << data.sequences.size() << " keypoint files to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"samslr: skeleton-based sign language recognition pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "INI run configuration")->capture_default_str();
    app.add_option("--seed", g.seed, "global RNG seed")->capture_default_str();
    app.add_option("--mode", g.mode, "coordinate mode: 2d or 3d (overrides config)");

    std::vector<std::string> inputs;
    std::string out, model, resume, checkpoint, fusion_mode = "fixed";
    std::string weights_str, base_str, grid_str = "0.0:2.0:0.1";
    int classes = 8, samples = 20, frames = 48;

    auto* prepare = app.add_subcommand("prepare", "keypoint files -> four-stream tensors");
    prepare->add_option("inputs", inputs, "keypoint (.slkp) files")->required();
    prepare->add_option("--out", out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
    train->add_option("--model", model, "slgcn | sstcn | gem")->required();
    train->add_option("inputs", inputs, "training files (.slkp / .slft / .sllg)")->required();
    train->add_option("--out", out, "checkpoint path")->required();
    train->add_option("--resume", resume, "checkpoint to resume from");

    auto* infer = app.add_subcommand("infer", "run a checkpoint over inputs -> logit file");
    infer->add_option("--model", checkpoint, "checkpoint path")->required();
    infer->add_option("inputs", inputs, "input files matching the checkpoint's model")->required();
    infer->add_option("--out", out, "output logit file")->required();

    auto* fuse = app.add_subcommand("fuse", "fuse logit files");
    fuse->add_option("inputs", inputs, "logit (.sllg) files")->required();
    fuse->add_option("--fusion", fusion_mode, "fixed | gem")->capture_default_str();
    fuse->add_option("--weights", weights_str, "comma-separated fixed weights");
    fuse->add_option("--model", checkpoint, "GEM checkpoint (gem mode)");
    fuse->add_option("--out", out, "output logit file")->required();

    auto* sweep = app.add_subcommand("sweep", "fusion weight sensitivity sweep");
    sweep->add_option("inputs", inputs, "logit (.sllg) files with labels")->required();
    sweep->add_option("--base", base_str, "base weights (default all 1)");
    sweep->add_option("--grid", grid_str, "grid spec start:stop:step")->capture_default_str();
    sweep->add_option("--out", out, "output table path (default stdout)");

    auto* synth = app.add_subcommand("synth", "generate the synthetic gesture dataset");
    synth->add_option("--out", out, "output directory")->required();
    synth->add_option("--classes", classes, "number of classes")->capture_default_str();
    synth->add_option("--samples", samples, "samples per class")->capture_default_str();
    synth->add_option("--frames", frames, "frames per sample")->capture_default_str();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) return cmd_prepare(g, inputs, out);
        if (train->parsed()) return cmd_train(g, model, inputs, out, resume);
        if (infer->parsed()) return cmd_infer(g, checkpoint, inputs, out);
        if (fuse->parsed()) return cmd_fuse(g, fusion_mode, inputs, weights_str, checkpoint, out);
        if (sweep->parsed()) return cmd_sweep(g, inputs, base_str, grid_str, out);
        if (synth->parsed()) return cmd_synth(g, out, classes, samples, frames);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
