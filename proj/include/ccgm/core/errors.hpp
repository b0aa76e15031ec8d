#pragma once

#include <stdexcept>
#include <string>

namespace ccgm {

// Invalid user-supplied configuration (bad preset name, bad knob value,
// missing required artifact). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated operation precondition on otherwise valid configuration
// (empty label list, image smaller than the filter window, ...).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input data that is structurally fine but numerically unusable
// (all-zero AGGD samples, zero surviving patches).
struct DegenerateInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NIQE scoring failed for one image; distinct from numeric overflow so
// batch pipelines can count and skip.
struct ScoreError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Artifact file with the wrong magic or an unsupported major version.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Artifact payload hash mismatch.
struct CorruptionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dataset/folder ingestion failure.
struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Metric computation could not produce a result (e.g. every SFID center
// was skipped).
struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training aborted (divergence guard, unsatisfiable vicinity).
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ccgm
