#pragma once

#include <set>
#include <string>
#include <vector>

#include "model.hpp"
#include "training.hpp"

namespace fts {

// The atom of ablation, pruning and Pareto analysis.
struct ExperimentRecord {
    std::string record_id;
    std::string protocol;  // ablation | pruning | stacking | random
    ModelConfig mcfg;
    TrainConfig tcfg;
    std::set<ModuleKind> modules_present;
    std::vector<std::uint64_t> seeds_used;
    std::vector<double> seed_accuracies;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double epoch_time_s = 0.0;       // median, warmup excluded
    double epoch_time_mean_s = 0.0;  // mean, recorded alongside
    std::size_t params = 0;
    double efficiency_cost = 0.0;   // epoch_time_s * params
    double efficiency_score = 0.0;  // 1 / efficiency_cost
    bool failed = false;
    std::string failure;
};

// Fixed significance order from most to least significant contributor.
const std::vector<ModuleKind>& default_pruning_order();
// Reverse of the pruning order.
const std::vector<ModuleKind>& default_stacking_order();

struct SweepConfig {
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t timing_epochs = 4;
};

// Trains one configuration over the sweep seeds, measures timing once, and
// fills in the efficiency fields. Failures are recorded, not thrown.
ExperimentRecord run_experiment(const std::string& record_id, const std::string& protocol,
                                const ModelConfig& mcfg, const TrainConfig& tcfg,
                                const TimeSeriesDataset& train_ds,
                                const TimeSeriesDataset& test_ds, const SweepConfig& sweep);

// 1 unpruned record + 8 single-module removals.
std::vector<ExperimentRecord> run_ablation(const ModelConfig& base, const TrainConfig& tcfg,
                                           const TimeSeriesDataset& train_ds,
                                           const TimeSeriesDataset& test_ds,
                                           const SweepConfig& sweep);

// Modules sorted descending by mean accuracy loss versus the unpruned record.
// Ties break by the ModuleKind enumeration order.
std::vector<ModuleKind> rank_contributions(const std::vector<ExperimentRecord>& records);

// record 0 unpruned, record k = first k modules of `order` removed cumulatively.
std::vector<ExperimentRecord> run_pruning(const ModelConfig& base, const TrainConfig& tcfg,
                                          const TimeSeriesDataset& train_ds,
                                          const TimeSeriesDataset& test_ds,
                                          const SweepConfig& sweep,
                                          const std::vector<ModuleKind>& order);

// record 0 = bare skeleton (classifier only), record k adds the k-th module of
// the stacking order; 9 records total.
std::vector<ExperimentRecord> run_stacking(const ModelConfig& base, const TrainConfig& tcfg,
                                           const TimeSeriesDataset& train_ds,
                                           const TimeSeriesDataset& test_ds,
                                           const SweepConfig& sweep);

// n configs drawn uniformly (seeded) from the Table-2-style grid.
std::vector<ExperimentRecord> run_random_sample(const ModelConfig& base, const TrainConfig& tcfg,
                                                const TimeSeriesDataset& train_ds,
                                                const TimeSeriesDataset& test_ds,
                                                const SweepConfig& sweep, std::size_t n,
                                                std::uint64_t seed);

// Min-max normalization of efficiency_cost over the given records (failed
// records excluded from the min/max but mapped too).
std::vector<double> normalized_efficiency(const std::vector<ExperimentRecord>& records);

// CSV persistence (documented schema; doubles printed with %.17g).
std::string records_to_csv(const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> records_from_csv(const std::string& text);
void save_records_csv(const std::vector<ExperimentRecord>& records, const std::string& path);
std::vector<ExperimentRecord> load_records_csv(const std::string& path);

// Line-delimited JSON twin for lossless reload.
std::string records_to_jsonl(const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> records_from_jsonl(const std::string& text);

}  // namespace fts
