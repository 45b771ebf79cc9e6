#pragma once

#include <stdexcept>
#include <string>

namespace samslr {

// Error classes map 1:1 to CLI exit codes.
enum class ErrorKind {
    Format = 2,      // malformed files, wrong landmark counts
    Config = 3,      // bad configuration, shape/class mismatches
    Mode = 4,        // 2d/3d mode misuse (e.g. missing depth)
    Fusion = 5,      // misaligned manifests / modality shapes
    Input = 6,       // bad runtime inputs (empty sequence, y out of range)
    Numeric = 7,     // non-finite values where finite required
    Validation = 8,  // graph structure violations
    Data = 9,        // dataset problems (too few samples per class)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error format_error(const std::string& msg) { return Error(ErrorKind::Format, msg); }
inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error mode_error(const std::string& msg) { return Error(ErrorKind::Mode, msg); }
inline Error fusion_error(const std::string& msg) { return Error(ErrorKind::Fusion, msg); }
inline Error input_error(const std::string& msg) { return Error(ErrorKind::Input, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::Numeric, msg); }
inline Error validation_error(const std::string& msg) { return Error(ErrorKind::Validation, msg); }
inline Error data_error(const std::string& msg) { return Error(ErrorKind::Data, msg); }

}  // namespace samslr
