#include "samslr/io.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace samslr {

namespace {

constexpr uint32_t kFormatVersion = 1;

class ByteWriter {
public:
    void u32(uint32_t v) { raw(&v, 4); }
    void u64(uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void magic(const char m[4]) { buf_.append(m, 4); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.append(s);
    }
    void f32_array(const NdArray& a) {
        for (int64_t i = 0; i < a.size(); ++i) f32(static_cast<float>(a[i]));
    }
    const std::string& bytes() const { return buf_; }

private:
    void raw(const void* p, size_t n) { buf_.append(reinterpret_cast<const char*>(p), n); }
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string bytes, std::string path) : buf_(std::move(bytes)), path_(std::move(path)) {}
    uint32_t u32() {
        uint32_t v;
        raw(&v, 4);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        raw(&v, 8);
        return v;
    }
    float f32() {
        float v;
        raw(&v, 4);
        return v;
    }
    void expect_magic(const char m[4]) {
        char got[4];
        raw(got, 4);
        if (std::memcmp(got, m, 4) != 0)
            throw format_error(path_ + ": bad magic at byte 0 (expected " + std::string(m, 4) + ")");
    }
    void expect_version() {
        const uint32_t v = u32();
        if (v != kFormatVersion)
            throw format_error(path_ + ": unrecognized format version " + std::to_string(v) + " at byte " +
                               std::to_string(pos_ - 4));
    }
    std::string str() {
        const uint32_t n = u32();
        if (pos_ + n > buf_.size()) fail("truncated string");
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    NdArray f32_array(Shape shape) {
        NdArray out(std::move(shape));
        for (int64_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(f32());
        return out;
    }
    void expect_eof() {
        if (pos_ != buf_.size())
            throw format_error(path_ + ": " + std::to_string(buf_.size() - pos_) + " trailing bytes at byte " +
                               std::to_string(pos_));
    }

private:
    void raw(void* p, size_t n) {
        if (pos_ + n > buf_.size()) fail("truncated file");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    [[noreturn]] void fail(const std::string& what) {
        throw format_error(path_ + ": " + what + " at byte " + std::to_string(pos_));
    }
    std::string buf_;
    std::string path_;
    size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_manifest(const std::string& path, const SampleMeta& meta) {
    std::ostringstream os;
    os << "id=" << meta.id << "\n";
    if (meta.label >= 0) os << "label=" << meta.label << "\n";
    if (!meta.signer.empty()) os << "signer=" << meta.signer << "\n";
    atomic_write(path + ".manifest", os.str());
}

void read_manifest(const std::string& path, SampleMeta* meta) {
    if (!meta) return;
    const std::string mpath = path + ".manifest";
    if (!std::filesystem::exists(mpath)) return;
    std::istringstream in(slurp(mpath));
    std::string line;
    while (std::getline(in, line)) {
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "id")
            meta->id = val;
        else if (key == "label")
            meta->label = std::stoi(val);
        else if (key == "signer")
            meta->signer = val;
    }
}

}  // namespace

void atomic_write(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw format_error("cannot write file: " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    std::filesystem::rename(tmp, path);
}

void write_keypoint_file(const std::string& path, const KeypointSequence& seq, const SampleMeta* meta) {
    if (seq.data.rank() != 3) throw format_error("write_keypoint_file: data must be [T,L,C]");
    if (seq.channels() != 3 && seq.channels() != 4)
        throw format_error("write_keypoint_file: channel count must be 3 or 4");
    ByteWriter w;
    w.magic("SLKP");
    w.u32(kFormatVersion);
    w.u32(static_cast<uint32_t>(seq.frames()));
    w.u32(static_cast<uint32_t>(seq.landmarks()));
    w.u32(static_cast<uint32_t>(seq.channels()));
    w.f32(static_cast<float>(seq.frame_w));
    w.f32(static_cast<float>(seq.frame_h));
    w.f32_array(seq.data);
    atomic_write(path, w.bytes());
    if (meta) write_manifest(path, *meta);
}

KeypointSequence read_keypoint_file(const std::string& path, SampleMeta* meta) {
    ByteReader r(slurp(path), path);
    r.expect_magic("SLKP");
    r.expect_version();
    const int T = static_cast<int>(r.u32());
    const int L = static_cast<int>(r.u32());
    const int C = static_cast<int>(r.u32());
    if (C != 3 && C != 4) throw format_error(path + ": channel count must be 3 or 4, got " + std::to_string(C));
    KeypointSequence seq;
    seq.frame_w = static_cast<double>(r.f32());
    seq.frame_h = static_cast<double>(r.f32());
    seq.data = r.f32_array({T, L, C});
    r.expect_eof();
    read_manifest(path, meta);
    return seq;
}

void write_stream_file(const std::string& path, const StreamTensor& stream) {
    ByteWriter w;
    w.magic("SLTS");
    w.u32(kFormatVersion);
    w.u32(static_cast<uint32_t>(stream.kind));
    w.u32(static_cast<uint32_t>(stream.channels()));
    w.u32(static_cast<uint32_t>(stream.frames()));
    w.u32(static_cast<uint32_t>(stream.nodes()));
    w.f32_array(stream.data);
    atomic_write(path, w.bytes());
}

StreamTensor read_stream_file(const std::string& path) {
    ByteReader r(slurp(path), path);
    r.expect_magic("SLTS");
    r.expect_version();
    StreamTensor st;
    const uint32_t kind = r.u32();
    if (kind > 3) throw format_error(path + ": bad stream kind " + std::to_string(kind));
    st.kind = static_cast<StreamKind>(kind);
    const int C = static_cast<int>(r.u32());
    const int T = static_cast<int>(r.u32());
    const int V = static_cast<int>(r.u32());
    st.data = r.f32_array({C, T, V});
    r.expect_eof();
    return st;
}

void write_logit_file(const std::string& path, const LogitMatrix& logits, const std::vector<int>* labels) {
    if (logits.data.rank() != 2) throw format_error("write_logit_file: logits must be [S,C]");
    if (labels && static_cast<int>(labels->size()) != logits.samples())
        throw format_error("write_logit_file: label count mismatch");
    ByteWriter w;
    w.magic("SLLG");
    w.u32(kFormatVersion);
    w.str(logits.modality);
    w.u32(static_cast<uint32_t>(logits.samples()));
    w.u32(static_cast<uint32_t>(logits.classes()));
    w.f32_array(logits.data);
    atomic_write(path, w.bytes());

    std::ostringstream os;
    for (int s = 0; s < logits.samples(); ++s) {
        const std::string id = s < static_cast<int>(logits.sample_ids.size())
                                   ? logits.sample_ids[static_cast<size_t>(s)]
                                   : ("sample" + std::to_string(s));
        os << id;
        if (labels) os << "\t" << (*labels)[static_cast<size_t>(s)];
        os << "\n";
    }
    atomic_write(path + ".manifest", os.str());
}

LogitMatrix read_logit_file(const std::string& path, std::vector<int>* labels) {
    ByteReader r(slurp(path), path);
    r.expect_magic("SLLG");
    r.expect_version();
    LogitMatrix out;
    out.modality = r.str();
    const int S = static_cast<int>(r.u32());
    const int C = static_cast<int>(r.u32());
    out.data = r.f32_array({S, C});
    r.expect_eof();

    const std::string mpath = path + ".manifest";
    if (std::filesystem::exists(mpath)) {
        std::istringstream in(slurp(mpath));
        std::string line;
        std::set<std::string> seen;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t tab = line.find('\t');
            const std::string id = tab == std::string::npos ? line : line.substr(0, tab);
            if (!seen.insert(id).second) throw format_error(mpath + ": duplicate sample id '" + id + "'");
            out.sample_ids.push_back(id);
            if (labels && tab != std::string::npos) labels->push_back(std::stoi(line.substr(tab + 1)));
        }
        if (static_cast<int>(out.sample_ids.size()) != S)
            throw format_error(mpath + ": manifest has " + std::to_string(out.sample_ids.size()) +
                               " rows for " + std::to_string(S) + " samples");
        if (labels && !labels->empty() && static_cast<int>(labels->size()) != S)
            throw format_error(mpath + ": labels present for only some rows");
    }
    return out;
}

void write_feature_file(const std::string& path, const NdArray& features, const SampleMeta* meta) {
    if (features.rank() != 4) throw format_error("write_feature_file: features must be [F,J,H,W]");
    ByteWriter w;
    w.magic("SLFT");
    w.u32(kFormatVersion);
    for (int i = 0; i < 4; ++i) w.u32(static_cast<uint32_t>(features.dim(i)));
    w.f32_array(features);
    atomic_write(path, w.bytes());
    if (meta) write_manifest(path, *meta);
}

NdArray read_feature_file(const std::string& path, SampleMeta* meta) {
    ByteReader r(slurp(path), path);
    r.expect_magic("SLFT");
    r.expect_version();
    Shape shape(4);
    for (int i = 0; i < 4; ++i) shape[static_cast<size_t>(i)] = static_cast<int>(r.u32());
    NdArray out = r.f32_array(shape);
    r.expect_eof();
    read_manifest(path, meta);
    return out;
}

void save_checkpoint(const std::string& path, const CheckpointInfo& info, const ParamSet& params) {
    ByteWriter w;
    w.magic("SLCK");
    w.u32(kFormatVersion);
    w.u32(static_cast<uint32_t>(info.model_type));
    w.u64(info.config_hash);
    w.u64(info.step);
    w.u32(static_cast<uint32_t>(params.items.size()));
    for (const auto& p : params.items) {
        w.str(p->name);
        w.u32(static_cast<uint32_t>(p->value.rank()));
        for (int i = 0; i < p->value.rank(); ++i) w.u32(static_cast<uint32_t>(p->value.dim(i)));
        // parameters keep full double precision in checkpoints
        for (int64_t i = 0; i < p->value.size(); ++i) {
            const double d = p->value[i];
            uint64_t bits;
            std::memcpy(&bits, &d, 8);
            w.u64(bits);
        }
    }
    atomic_write(path, w.bytes());
}

CheckpointInfo load_checkpoint(const std::string& path, ParamSet& params) {
    ByteReader r(slurp(path), path);
    r.expect_magic("SLCK");
    r.expect_version();
    CheckpointInfo info;
    info.model_type = static_cast<ModelType>(r.u32());
    info.config_hash = r.u64();
    info.step = r.u64();
    const uint32_t n = r.u32();
    if (n != params.items.size())
        throw config_error(path + ": checkpoint has " + std::to_string(n) + " parameters, model has " +
                           std::to_string(params.items.size()));
    for (uint32_t i = 0; i < n; ++i) {
        const std::string name = r.str();
        Param& p = *params.items[i];
        if (name != p.name) throw config_error(path + ": parameter name mismatch: '" + name + "' vs '" + p.name + "'");
        const uint32_t rank = r.u32();
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(r.u32());
        if (shape != p.value.shape())
            throw config_error(path + ": parameter '" + name + "' shape mismatch " + shape_str(shape) + " vs " +
                               shape_str(p.value.shape()));
        for (int64_t j = 0; j < p.value.size(); ++j) {
            const uint64_t bits = r.u64();
            double d;
            std::memcpy(&d, &bits, 8);
            p.value[j] = d;
        }
    }
    r.expect_eof();
    return info;
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    ByteReader r(slurp(path), path);
    r.expect_magic("SLCK");
    r.expect_version();
    CheckpointInfo info;
    info.model_type = static_cast<ModelType>(r.u32());
    info.config_hash = r.u64();
    info.step = r.u64();
    return info;
}

KeypointSequence import_jsonl(const std::string& path, double frame_w, double frame_h) {
    std::istringstream in(slurp(path));
    std::string line;
    std::vector<std::vector<std::array<double, 3>>> frames;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw format_error(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_array() || j.size() != kWholeBodyLandmarks)
            throw format_error(path + " line " + std::to_string(lineno) + ": expected an array of " +
                               std::to_string(kWholeBodyLandmarks) + " [x,y,s] triples");
        std::vector<std::array<double, 3>> frame;
        for (const auto& lm : j) {
            if (!lm.is_array() || lm.size() != 3)
                throw format_error(path + " line " + std::to_string(lineno) + ": landmark is not [x,y,s]");
            frame.push_back({lm[0].get<double>(), lm[1].get<double>(), lm[2].get<double>()});
        }
        frames.push_back(std::move(frame));
    }
    if (frames.empty()) throw format_error(path + ": no frames");
    KeypointSequence seq;
    seq.frame_w = frame_w;
    seq.frame_h = frame_h;
    seq.data = NdArray({static_cast<int>(frames.size()), kWholeBodyLandmarks, 3});
    for (size_t t = 0; t < frames.size(); ++t)
        for (int l = 0; l < kWholeBodyLandmarks; ++l)
            for (int c = 0; c < 3; ++c)
                seq.data.at({static_cast<int>(t), l, c}) = frames[t][static_cast<size_t>(l)][static_cast<size_t>(c)];
    return seq;
}

}  // namespace samslr
