#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "samslr/fusion.hpp"
#include "samslr/graph.hpp"
#include "samslr/streams.hpp"
#include "samslr/tape.hpp"

namespace samslr {

// Sidecar manifest entry (path + ".manifest").
struct SampleMeta {
    std::string id;
    int label = -1;
    std::string signer;
};

// Binary little-endian formats with float32 payloads. All writes are
// atomic (temp file + rename) and every format round-trips byte-exactly.

void write_keypoint_file(const std::string& path, const KeypointSequence& seq,
                         const SampleMeta* meta = nullptr);
KeypointSequence read_keypoint_file(const std::string& path, SampleMeta* meta = nullptr);

void write_stream_file(const std::string& path, const StreamTensor& stream);
StreamTensor read_stream_file(const std::string& path);

void write_logit_file(const std::string& path, const LogitMatrix& logits,
                      const std::vector<int>* labels = nullptr);
LogitMatrix read_logit_file(const std::string& path, std::vector<int>* labels = nullptr);

// raw SSTCN heatmap features [F, J, H, W]
void write_feature_file(const std::string& path, const NdArray& features, const SampleMeta* meta = nullptr);
NdArray read_feature_file(const std::string& path, SampleMeta* meta = nullptr);

enum class ModelType : uint32_t { SLGCN = 0, SSTCN = 1, GEM = 2 };

struct CheckpointInfo {
    ModelType model_type;
    uint64_t config_hash = 0;
    uint64_t step = 0;
};

void save_checkpoint(const std::string& path, const CheckpointInfo& info, const ParamSet& params);
// params must already hold identically named/shaped entries
CheckpointInfo load_checkpoint(const std::string& path, ParamSet& params);
CheckpointInfo peek_checkpoint(const std::string& path);

// JSON-lines pose-estimator import: one frame per line, a JSON array of
// 133 [x, y, s] triples.
KeypointSequence import_jsonl(const std::string& path, double frame_w, double frame_h);

void atomic_write(const std::string& path, const std::string& bytes);

}  // namespace samslr
