#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "samslr/fusion.hpp"
#include "samslr/slgcn.hpp"
#include "samslr/sstcn.hpp"
#include "samslr/streams.hpp"
#include "samslr/train.hpp"

namespace samslr {

uint64_t fnv1a(const std::string& text);

// INI-style run configuration. Unknown sections or keys are hard errors.
class RunConfig {
public:
    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_string(const std::string& text);
    static RunConfig defaults() { return parse_string(""); }

    std::string get(const std::string& section, const std::string& key) const;
    double get_num(const std::string& section, const std::string& key) const;
    int get_int(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;
    std::vector<int> get_int_list(const std::string& section, const std::string& key) const;
    std::vector<double> get_num_list(const std::string& section, const std::string& key) const;

    // canonical text (sorted keys, defaults filled in) and its hash
    std::string canonical_text() const;
    uint64_t hash() const { return fnv1a(canonical_text()); }

    bool mode_3d() const;
    PartitionScheme partition_scheme() const;
    AugmentationConfig augmentation() const;
    int sample_length() const { return get_int("streams", "sample_length"); }
    SLGCNConfig slgcn(int in_channels) const;
    SSTCNConfig sstcn() const;
    TrainConfig train() const;
    GEMConfig gem(int modalities, int classes) const;
    GEMTrainConfig gem_train() const;
    std::vector<double> stream_weights() const;

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace samslr
