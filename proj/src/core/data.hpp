#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace fts {

// Labeled equal-length multivariate time-series partition. Samples are stored
// row-major [dims][length]; batches are exposed as [n, length, dims] tensors.
struct TimeSeriesDataset {
    std::string name;
    std::string partition = "train";  // train | test
    std::size_t dims = 0;
    std::size_t length = 0;
    std::vector<std::string> class_names;
    std::vector<std::vector<double>> samples;
    std::vector<int> labels;
    std::vector<std::size_t> sample_ids;  // stable ids, survive splitting

    std::size_t size() const { return samples.size(); }
    std::size_t num_classes() const { return class_names.size(); }

    // Throws DataError when any structural invariant is violated.
    void check_invariants() const;

    // [idx.size(), length, dims] tensor for the model.
    Tensor batch(const std::vector<std::size_t>& idx) const;
};

// Expected Table-1-style metadata per dataset code.
struct ManifestEntry {
    std::string name;
    std::string code;
    std::size_t train_size;
    std::size_t test_size;
    std::size_t dims;
    std::size_t length;
    std::size_t classes;
};

// The 18 benchmark datasets, keyed by code (AF .. UW).
const std::vector<ManifestEntry>& dataset_manifest();

// Empty string when everything matches; otherwise one line per mismatch.
// Unknown code throws ConfigError.
std::string validate_against_manifest(const TimeSeriesDataset& ds, const std::string& code);

// .ts text format (header lines starting with '@', then ':'-separated
// dimensions of comma-separated values with a trailing class label).
TimeSeriesDataset parse_ts(const std::string& text);
TimeSeriesDataset load_ts_file(const std::string& path);
std::string serialize_ts(const TimeSeriesDataset& ds);
void save_ts_file(const TimeSeriesDataset& ds, const std::string& path);

inline constexpr double kMidDifficulty = 0.5;

// Frequency-coded synthetic data: class c is a sinusoid with c+1 cycles over
// the series length; difficulty scales phase jitter and additive noise.
// Returns (train, test), each with n_per_class samples per class.
std::pair<TimeSeriesDataset, TimeSeriesDataset> synth_dataset(
    std::uint64_t seed, std::size_t classes, std::size_t dims, std::size_t length,
    std::size_t n_per_class, double difficulty);

}  // namespace fts
