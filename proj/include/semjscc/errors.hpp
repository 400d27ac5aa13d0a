#pragma once

#include <stdexcept>
#include <string>

namespace semjscc {

// Shape/parameter mismatches between configured components (codec vs input,
// codebook vs codec, missing checkpoint keys, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// All-zero input to the power normalizer: the scale factor is undefined.
class DegenerateCodeword : public std::runtime_error {
public:
    explicit DegenerateCodeword(const std::string& msg) : std::runtime_error(msg) {}
};

// Cosine similarity requested for a zero-norm vector.
class UndefinedSimilarity : public std::runtime_error {
public:
    explicit UndefinedSimilarity(const std::string& msg) : std::runtime_error(msg) {}
};

// Quantized payload refers to a center index outside the codebook.
class CorruptPayload : public std::runtime_error {
public:
    explicit CorruptPayload(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed text input (manifest, config, checkpoint). Carries the 1-based
// line number when one is known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, long line = -1)
        : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Optimization diverged (non-finite loss). The message carries the epoch/step
// diagnostics captured at the point of failure.
class TrainingFailure : public std::runtime_error {
public:
    explicit TrainingFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace semjscc
