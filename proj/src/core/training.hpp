#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace fts {

enum class TimingMode {
    Wall,   // steady-clock seconds
    Flops,  // deterministic analytic work units (for reproducible records)
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 8;
    std::size_t max_epochs = 50;
    std::uint64_t seed = 0;
    double val_fraction = 0.2;
    std::size_t early_stop_patience = 0;  // 0 disables
    TimingMode timing = TimingMode::Wall;

    void validate(bool paper_protocol = false) const;
};

struct EpochStats {
    std::size_t epoch;
    double train_loss;
    double val_loss;
    double val_accuracy;
    double wall_time_s;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    double best_val_accuracy = 0.0;
    std::string to_csv() const;
};

// Mean over batch of -log softmax(logits)[label]; log-sum-exp stabilized.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long long t = 0;
};

// Standard Adam with bias correction; gradients are read from each tensor.
void adam_step(std::vector<NamedTensor>& params, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Stratified-by-class 80/20 split with a seeded shuffle. Classes with fewer
// than 2 samples trigger a non-stratified fallback.
std::pair<TimeSeriesDataset, TimeSeriesDataset> split_train_val(
    const TimeSeriesDataset& ds, std::uint64_t seed, double val_fraction = 0.2);

// Epoch loop with seeded shuffling and per-epoch validation; on return the
// model carries the best-validation-accuracy parameters.
TrainHistory train(Model& model, const TimeSeriesDataset& dataset, const TrainConfig& tcfg);

double evaluate(Model& model, const TimeSeriesDataset& partition);

struct TimingResult {
    double median_s;
    double mean_s;
};

// Trains a fresh model for n_epochs, discards the first epoch as warmup and
// reports the median (and mean) of the rest.
TimingResult measure_epoch_time(const ModelConfig& cfg, const TimeSeriesDataset& dataset,
                                const TrainConfig& tcfg, std::size_t n_epochs);

// Deterministic per-epoch work estimate used by TimingMode::Flops.
double epoch_cost_units(const ModelConfig& cfg, std::size_t n_train_samples);

}  // namespace fts
