#include "samslr/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace samslr {

uint64_t fnv1a(const std::string& text) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

// registry of known keys with their defaults
const std::map<std::string, std::map<std::string, std::string>>& known_keys() {
    static const std::map<std::string, std::map<std::string, std::string>> k = {
        {"graph",
         {{"mode", "2d"}, {"partition", "spatial"}}},
        {"streams",
         {{"sample_length", "150"},
          {"mirror_prob", "0.5"},
          {"rotation_range", "13"},
          {"scale_range", "0.1"},
          {"jitter_std", "0.01"},
          {"shift_range", "0.1"},
          {"temporal_sampling", "random_window"}}},
        {"sl_gcn",
         {{"units", "10"},
          {"channels", "64,64,64,64,128,128,128,256,256,256"},
          {"strides", "1,1,1,1,2,1,1,2,1,1"},
          {"groups", "8"},
          {"temporal_kernel", "9"},
          {"dropgraph_keep_prob", "0.9"},
          {"classes", "8"},
          {"stream", "joint"},
          {"stream_weights", "1,1,1,1"}}},
        {"sstcn",
         {{"frames", "60"},
          {"joints", "33"},
          {"size", "24"},
          {"classes", "8"},
          {"hidden", "256"},
          {"dropout", "0.25"}}},
        {"train",
         {{"steps", "500"},
          {"batch_size", "16"},
          {"lr", "0.05"},
          {"momentum", "0.9"},
          {"weight_decay", "0.0001"},
          {"label_smoothing", "0.1"},
          {"cosine", "true"}}},
        {"fusion",
         {{"conv_filters", "16"},
          {"hidden", "64"},
          {"hidden_layers", "2"},
          {"epochs", "150"},
          {"lr", "0.05"},
          {"holdout_frac", "0.25"},
          {"label_smoothing", "0.1"},
          {"global_weights", "false"}}},
    };
    return k;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

RunConfig RunConfig::parse_string(const std::string& text) {
    RunConfig cfg;
    const auto& known = known_keys();
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (known.find(section) == known.end())
                throw config_error("config line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(lineno) + ": expected key=value");
        if (section.empty())
            throw config_error("config line " + std::to_string(lineno) + ": key outside any section");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const auto& sec_known = known.at(section);
        if (sec_known.find(key) == sec_known.end())
            throw config_error("config line " + std::to_string(lineno) + ": unknown key '" + key + "' in [" +
                               section + "]");
        cfg.values_[section][key] = value;
    }
    return cfg;
}

std::string RunConfig::get(const std::string& section, const std::string& key) const {
    auto si = values_.find(section);
    if (si != values_.end()) {
        auto ki = si->second.find(key);
        if (ki != si->second.end()) return ki->second;
    }
    const auto& known = known_keys();
    auto ks = known.find(section);
    if (ks == known.end()) throw config_error("unknown config section: " + section);
    auto kk = ks->second.find(key);
    if (kk == ks->second.end()) throw config_error("unknown config key: " + section + "." + key);
    return kk->second;
}

double RunConfig::get_num(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw config_error("config " + section + "." + key + ": not a number: '" + v + "'");
    }
}

int RunConfig::get_int(const std::string& section, const std::string& key) const {
    const double d = get_num(section, key);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) throw config_error("config " + section + "." + key + ": not an integer");
    return i;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("config " + section + "." + key + ": not a boolean: '" + v + "'");
}

std::vector<double> RunConfig::get_num_list(const std::string& section, const std::string& key) const {
    const std::string v = get(section, key);
    std::vector<double> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(trim(item)));
        } catch (const std::exception&) {
            throw config_error("config " + section + "." + key + ": bad list entry '" + item + "'");
        }
    }
    if (out.empty()) throw config_error("config " + section + "." + key + ": empty list");
    return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& section, const std::string& key) const {
    std::vector<int> out;
    for (double d : get_num_list(section, key)) {
        const int i = static_cast<int>(d);
        if (static_cast<double>(i) != d) throw config_error("config " + section + "." + key + ": non-integer entry");
        out.push_back(i);
    }
    return out;
}

std::string RunConfig::canonical_text() const {
    std::ostringstream os;
    for (const auto& [section, keys] : known_keys()) {
        os << "[" << section << "]\n";
        for (const auto& [key, def] : keys) os << key << "=" << get(section, key) << "\n";
    }
    return os.str();
}

bool RunConfig::mode_3d() const {
    const std::string m = get("graph", "mode");
    if (m == "2d") return false;
    if (m == "3d") return true;
    throw config_error("graph.mode must be 2d or 3d, got '" + m + "'");
}

PartitionScheme RunConfig::partition_scheme() const {
    const std::string p = get("graph", "partition");
    if (p == "single") return PartitionScheme::Single;
    if (p == "spatial") return PartitionScheme::SpatialThree;
    throw config_error("graph.partition must be single or spatial, got '" + p + "'");
}

AugmentationConfig RunConfig::augmentation() const {
    AugmentationConfig a;
    a.mirror_prob = get_num("streams", "mirror_prob");
    a.rotation_range_deg = get_num("streams", "rotation_range");
    a.scale_range = get_num("streams", "scale_range");
    a.jitter_std = get_num("streams", "jitter_std");
    a.shift_range = get_num("streams", "shift_range");
    const std::string ts = get("streams", "temporal_sampling");
    if (ts == "repeat_tile")
        a.temporal_sampling = TemporalSampling::RepeatTile;
    else if (ts == "random_window")
        a.temporal_sampling = TemporalSampling::RandomWindow;
    else
        throw config_error("streams.temporal_sampling must be repeat_tile or random_window");
    return a;
}

SLGCNConfig RunConfig::slgcn(int in_channels) const {
    SLGCNConfig c;
    c.units = get_int("sl_gcn", "units");
    c.channels = get_int_list("sl_gcn", "channels");
    c.strides = get_int_list("sl_gcn", "strides");
    c.decouple_groups = get_int("sl_gcn", "groups");
    c.temporal_kernel = get_int("sl_gcn", "temporal_kernel");
    c.dropgraph_keep_prob = get_num("sl_gcn", "dropgraph_keep_prob");
    c.classes = get_int("sl_gcn", "classes");
    c.in_channels = in_channels;
    c.partition = partition_scheme();
    c.validate();
    return c;
}

SSTCNConfig RunConfig::sstcn() const {
    SSTCNConfig c;
    c.frames = get_int("sstcn", "frames");
    c.joints = get_int("sstcn", "joints");
    c.height = c.width = get_int("sstcn", "size");
    c.classes = get_int("sstcn", "classes");
    c.hidden = get_int("sstcn", "hidden");
    c.dropout = get_num("sstcn", "dropout");
    c.validate();
    return c;
}

TrainConfig RunConfig::train() const {
    TrainConfig c;
    c.steps = get_int("train", "steps");
    c.batch_size = get_int("train", "batch_size");
    c.lr = get_num("train", "lr");
    c.momentum = get_num("train", "momentum");
    c.weight_decay = get_num("train", "weight_decay");
    c.label_smoothing = get_num("train", "label_smoothing");
    c.cosine_schedule = get_bool("train", "cosine");
    return c;
}

GEMConfig RunConfig::gem(int modalities, int classes) const {
    GEMConfig c;
    c.modalities = modalities;
    c.classes = classes;
    c.conv_filters = get_int("fusion", "conv_filters");
    c.hidden = get_int("fusion", "hidden");
    c.hidden_layers = get_int("fusion", "hidden_layers");
    c.global_weights = get_bool("fusion", "global_weights");
    c.validate();
    return c;
}

GEMTrainConfig RunConfig::gem_train() const {
    GEMTrainConfig c;
    c.epochs = get_int("fusion", "epochs");
    c.lr = get_num("fusion", "lr");
    c.holdout_frac = get_num("fusion", "holdout_frac");
    c.label_smoothing = get_num("fusion", "label_smoothing");
    return c;
}

std::vector<double> RunConfig::stream_weights() const {
    auto w = get_num_list("sl_gcn", "stream_weights");
    if (w.size() != 4) throw config_error("sl_gcn.stream_weights must have 4 entries");
    return w;
}

}  // namespace samslr
