#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

namespace fts {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_u64(const std::vector<std::uint64_t>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
    return os.str();
}

std::string join_d(const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << fmt(v[i]);
    return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// Timing runs must not overlap; accuracy runs may.
std::mutex& timing_mutex() {
    static std::mutex m;
    return m;
}

void finalize_stats(ExperimentRecord& rec) {
    if (rec.seed_accuracies.empty()) return;
    double n = static_cast<double>(rec.seed_accuracies.size());
    double mean = 0.0;
    for (double a : rec.seed_accuracies) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : rec.seed_accuracies) var += (a - mean) * (a - mean);
    var /= n;  // population
    rec.accuracy_mean = mean;
    rec.accuracy_std = std::sqrt(var);
}

}  // namespace

const std::vector<ModuleKind>& default_pruning_order() {
    static const std::vector<ModuleKind> order = {
        ModuleKind::MHA, ModuleKind::FFT, ModuleKind::IFFT, ModuleKind::FFN,
        ModuleKind::GAP, ModuleKind::BN,  ModuleKind::EMBED, ModuleKind::ACT};
    return order;
}

const std::vector<ModuleKind>& default_stacking_order() {
    static const std::vector<ModuleKind> order = [] {
        auto o = default_pruning_order();
        std::reverse(o.begin(), o.end());
        return o;
    }();
    return order;
}

ExperimentRecord run_experiment(const std::string& record_id, const std::string& protocol,
                                const ModelConfig& mcfg, const TrainConfig& tcfg,
                                const TimeSeriesDataset& train_ds,
                                const TimeSeriesDataset& test_ds, const SweepConfig& sweep) {
    ExperimentRecord rec;
    rec.record_id = record_id;
    rec.protocol = protocol;
    rec.mcfg = mcfg;
    rec.tcfg = tcfg;
    rec.modules_present = mcfg.modules_present();
    try {
        mcfg.validate();
        rec.params = param_count(mcfg);
        for (auto seed : sweep.seeds) {
            TrainConfig t = tcfg;
            t.seed = seed;
            Model model(mcfg, seed);
            train(model, train_ds, t);
            rec.seeds_used.push_back(seed);
            rec.seed_accuracies.push_back(evaluate(model, test_ds));
        }
        finalize_stats(rec);
        {
            std::lock_guard<std::mutex> lock(timing_mutex());
            TrainConfig t = tcfg;
            t.seed = sweep.seeds.empty() ? tcfg.seed : sweep.seeds.front();
            TimingResult timing =
                measure_epoch_time(mcfg, train_ds, t, std::max<std::size_t>(3, sweep.timing_epochs));
            rec.epoch_time_s = timing.median_s;
            rec.epoch_time_mean_s = timing.mean_s;
        }
        rec.efficiency_cost = rec.epoch_time_s * static_cast<double>(rec.params);
        rec.efficiency_score = 1.0 / rec.efficiency_cost;
    } catch (const Error& e) {
        rec.failed = true;
        rec.failure = e.what();
    }
    return rec;
}

std::vector<ExperimentRecord> run_ablation(const ModelConfig& base, const TrainConfig& tcfg,
                                           const TimeSeriesDataset& train_ds,
                                           const TimeSeriesDataset& test_ds,
                                           const SweepConfig& sweep) {
    if (base.modules_present().size() != 8)
        throw ContractError("run_ablation: base config must include all eight modules");
    std::vector<ExperimentRecord> out;
    out.push_back(run_experiment("ablation-full", "ablation", base, tcfg, train_ds, test_ds, sweep));
    for (auto kind : kAllModules) {
        ModelConfig cfg = base;
        cfg.remove_module(kind);
        out.push_back(run_experiment(std::string("ablation-no-") + module_code(kind), "ablation",
                                     cfg, tcfg, train_ds, test_ds, sweep));
    }
    return out;
}

std::vector<ModuleKind> rank_contributions(const std::vector<ExperimentRecord>& records) {
    double unpruned_sum = 0.0;
    std::size_t unpruned_n = 0;
    for (const auto& r : records)
        if (!r.failed && r.modules_present.size() == 8) {
            unpruned_sum += r.accuracy_mean;
            ++unpruned_n;
        }
    if (unpruned_n == 0)
        throw ContractError("rank_contributions: no unpruned (all-modules) record present");
    double unpruned = unpruned_sum / static_cast<double>(unpruned_n);

    struct Entry {
        ModuleKind kind;
        double loss;
    };
    std::vector<Entry> entries;
    for (auto kind : kAllModules) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : records) {
            if (r.failed || r.modules_present.size() != 7) continue;
            if (r.modules_present.count(kind) == 0) {
                sum += r.accuracy_mean;
                ++n;
            }
        }
        if (n == 0)
            throw ContractError(std::string("rank_contributions: no record with ") +
                                module_code(kind) + " removed");
        entries.push_back({kind, unpruned - sum / static_cast<double>(n)});
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.loss > b.loss; });
    std::vector<ModuleKind> out;
    for (const auto& e : entries) out.push_back(e.kind);
    return out;
}

std::vector<ExperimentRecord> run_pruning(const ModelConfig& base, const TrainConfig& tcfg,
                                          const TimeSeriesDataset& train_ds,
                                          const TimeSeriesDataset& test_ds,
                                          const SweepConfig& sweep,
                                          const std::vector<ModuleKind>& order) {
    std::set<ModuleKind> check(order.begin(), order.end());
    if (order.size() != 8 || check.size() != 8)
        throw ContractError("run_pruning: order must be a permutation of all eight modules");
    std::vector<ExperimentRecord> out;
    ModelConfig cfg = base;
    out.push_back(run_experiment("pruning-0", "pruning", cfg, tcfg, train_ds, test_ds, sweep));
    for (std::size_t k = 0; k < order.size(); ++k) {
        cfg.remove_module(order[k]);
        out.push_back(run_experiment("pruning-" + std::to_string(k + 1), "pruning", cfg, tcfg,
                                     train_ds, test_ds, sweep));
    }
    return out;
}

std::vector<ExperimentRecord> run_stacking(const ModelConfig& base, const TrainConfig& tcfg,
                                           const TimeSeriesDataset& train_ds,
                                           const TimeSeriesDataset& test_ds,
                                           const SweepConfig& sweep) {
    // Record 0 is the bare skeleton (classifier head only, which every model
    // keeps so class logits always exist); each following record stacks one
    // more module in significance order.
    ModelConfig cfg = base;
    for (auto kind : kAllModules) cfg.remove_module(kind);
    std::vector<ExperimentRecord> out;
    out.push_back(run_experiment("stacking-0", "stacking", cfg, tcfg, train_ds, test_ds, sweep));
    const auto& order = default_stacking_order();
    for (std::size_t k = 0; k < order.size(); ++k) {
        switch (order[k]) {
            case ModuleKind::EMBED: cfg.include_embed = true; break;
            case ModuleKind::GAP: cfg.include_gap = true; break;
            case ModuleKind::BN: cfg.include_bn = true; break;
            case ModuleKind::ACT: cfg.include_act = true; break;
            case ModuleKind::FFT: cfg.layers_fft = std::max<std::size_t>(base.layers_fft, 1); break;
            case ModuleKind::IFFT:
                cfg.layers_ifft = std::max<std::size_t>(base.layers_ifft, 1);
                break;
            case ModuleKind::MHA: cfg.layers_mha = std::max<std::size_t>(base.layers_mha, 1); break;
            case ModuleKind::FFN: cfg.layers_ffn = std::max<std::size_t>(base.layers_ffn, 1); break;
        }
        out.push_back(run_experiment("stacking-" + std::to_string(k + 1), "stacking", cfg, tcfg,
                                     train_ds, test_ds, sweep));
    }
    return out;
}

std::vector<ExperimentRecord> run_random_sample(const ModelConfig& base, const TrainConfig& tcfg,
                                                const TimeSeriesDataset& train_ds,
                                                const TimeSeriesDataset& test_ds,
                                                const SweepConfig& sweep, std::size_t n,
                                                std::uint64_t seed) {
    if (n < 1) throw ContractError("run_random_sample: n must be >= 1");
    const double lrs[] = {1e-3, 5e-3, 1e-4, 5e-4, 1e-5, 5e-5};
    const double dropouts[] = {0.1, 0.2, 0.3};
    const std::size_t batches[] = {8, 16, 32};
    std::vector<std::size_t> head_choices;
    for (std::size_t h : {4, 8, 16})
        if (base.embed_dim % h == 0) head_choices.push_back(h);
    if (head_choices.empty())
        throw ConfigError("run_random_sample: embed_dim admits no head count from {4, 8, 16}");
    std::mt19937_64 rng(seed);
    auto pick = [&rng](auto& arr) {
        std::uniform_int_distribution<std::size_t> d(0, std::size(arr) - 1);
        return arr[d(rng)];
    };
    std::uniform_int_distribution<std::size_t> layer_dist(0, 4);
    std::uniform_int_distribution<std::size_t> head_dist(0, head_choices.size() - 1);

    std::vector<ExperimentRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        ModelConfig m = base;
        TrainConfig t = tcfg;
        t.learning_rate = pick(lrs);
        m.dropout = pick(dropouts);
        t.batch_size = pick(batches);
        m.num_heads = head_choices[head_dist(rng)];
        m.layers_fft = layer_dist(rng);
        m.layers_ifft = layer_dist(rng);
        m.layers_mha = layer_dist(rng);
        m.layers_ffn = layer_dist(rng);
        out.push_back(run_experiment("random-" + std::to_string(i), "random", m, t, train_ds,
                                     test_ds, sweep));
    }
    return out;
}

std::vector<double> normalized_efficiency(const std::vector<ExperimentRecord>& records) {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const auto& r : records) {
        if (r.failed) continue;
        if (!any) {
            lo = hi = r.efficiency_cost;
            any = true;
        } else {
            lo = std::min(lo, r.efficiency_cost);
            hi = std::max(hi, r.efficiency_cost);
        }
    }
    std::vector<double> out(records.size(), 0.0);
    double span = hi - lo;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].failed || span <= 0.0) continue;
        out[i] = (records[i].efficiency_cost - lo) / span;
    }
    return out;
}

static const char* kCsvHeader =
    "record_id,protocol,embed,fft,ifft,mha,ffn,gap,bn,act,"
    "layers_fft,layers_ifft,layers_mha,layers_ffn,heads,embed_dim,ffn_hidden,dropout,"
    "lr,batch,epochs,seeds,seed_accs,acc_mean,acc_std,epoch_time_s,epoch_time_mean_s,"
    "param_count,eff_cost,eff_score,failed";

std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
    std::ostringstream os;
    os << kCsvHeader << "\n";
    for (const auto& r : records) {
        os << r.record_id << "," << r.protocol;
        for (auto kind : kAllModules) os << "," << (r.modules_present.count(kind) ? 1 : 0);
        os << "," << r.mcfg.layers_fft << "," << r.mcfg.layers_ifft << "," << r.mcfg.layers_mha
           << "," << r.mcfg.layers_ffn << "," << r.mcfg.num_heads << "," << r.mcfg.embed_dim
           << "," << r.mcfg.ffn_hidden_dim << "," << fmt(r.mcfg.dropout) << ","
           << fmt(r.tcfg.learning_rate) << "," << r.tcfg.batch_size << "," << r.tcfg.max_epochs
           << "," << join_u64(r.seeds_used) << "," << join_d(r.seed_accuracies) << ","
           << fmt(r.accuracy_mean) << "," << fmt(r.accuracy_std) << "," << fmt(r.epoch_time_s)
           << "," << fmt(r.epoch_time_mean_s) << "," << r.params << ","
           << fmt(r.efficiency_cost) << "," << fmt(r.efficiency_score) << ","
           << (r.failed ? 1 : 0) << "\n";
    }
    return os.str();
}

std::vector<ExperimentRecord> records_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw DataError("records CSV: empty input");
    if (line != kCsvHeader) throw DataError("records CSV: unrecognized header");
    std::vector<ExperimentRecord> out;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = split(line, ',');
        if (f.size() != 31)
            throw ParseError("records CSV: expected 31 fields, got " + std::to_string(f.size()),
                             line_no);
        ExperimentRecord r;
        std::size_t i = 0;
        r.record_id = f[i++];
        r.protocol = f[i++];
        for (auto kind : kAllModules)
            if (f[i++] == "1") r.modules_present.insert(kind);
        r.mcfg.layers_fft = std::stoul(f[i++]);
        r.mcfg.layers_ifft = std::stoul(f[i++]);
        r.mcfg.layers_mha = std::stoul(f[i++]);
        r.mcfg.layers_ffn = std::stoul(f[i++]);
        r.mcfg.num_heads = std::stoul(f[i++]);
        r.mcfg.embed_dim = std::stoul(f[i++]);
        r.mcfg.ffn_hidden_dim = std::stoul(f[i++]);
        r.mcfg.dropout = std::stod(f[i++]);
        r.tcfg.learning_rate = std::stod(f[i++]);
        r.tcfg.batch_size = std::stoul(f[i++]);
        r.tcfg.max_epochs = std::stoul(f[i++]);
        if (!f[i].empty())
            for (const auto& s : split(f[i], ';')) r.seeds_used.push_back(std::stoull(s));
        ++i;
        if (!f[i].empty())
            for (const auto& s : split(f[i], ';')) r.seed_accuracies.push_back(std::stod(s));
        ++i;
        r.accuracy_mean = std::stod(f[i++]);
        r.accuracy_std = std::stod(f[i++]);
        r.epoch_time_s = std::stod(f[i++]);
        r.epoch_time_mean_s = std::stod(f[i++]);
        r.params = std::stoul(f[i++]);
        r.efficiency_cost = std::stod(f[i++]);
        r.efficiency_score = std::stod(f[i++]);
        r.failed = f[i++] == "1";
        out.push_back(std::move(r));
    }
    return out;
}

void save_records_csv(const std::vector<ExperimentRecord>& records, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << records_to_csv(records);
    if (!os) throw IoError("failed writing: " + path);
}

std::vector<ExperimentRecord> load_records_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open records file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return records_from_csv(buf.str());
}

std::string records_to_jsonl(const std::vector<ExperimentRecord>& records) {
    std::ostringstream os;
    for (const auto& r : records) {
        nlohmann::json j;
        j["record_id"] = r.record_id;
        j["protocol"] = r.protocol;
        std::vector<std::string> mods;
        for (auto k : r.modules_present) mods.push_back(module_code(k));
        j["modules_present"] = mods;
        j["model"] = {{"embed_dim", r.mcfg.embed_dim},
                      {"num_heads", r.mcfg.num_heads},
                      {"layers_fft", r.mcfg.layers_fft},
                      {"layers_ifft", r.mcfg.layers_ifft},
                      {"layers_mha", r.mcfg.layers_mha},
                      {"layers_ffn", r.mcfg.layers_ffn},
                      {"include_embed", r.mcfg.include_embed},
                      {"include_gap", r.mcfg.include_gap},
                      {"include_bn", r.mcfg.include_bn},
                      {"include_act", r.mcfg.include_act},
                      {"dropout", r.mcfg.dropout},
                      {"ffn_hidden_dim", r.mcfg.ffn_hidden_dim},
                      {"embed_kernel", r.mcfg.embed_kernel},
                      {"num_classes", r.mcfg.num_classes},
                      {"input_dims", r.mcfg.input_dims},
                      {"seq_len", r.mcfg.seq_len}};
        j["train"] = {{"learning_rate", r.tcfg.learning_rate},
                      {"batch_size", r.tcfg.batch_size},
                      {"max_epochs", r.tcfg.max_epochs},
                      {"val_fraction", r.tcfg.val_fraction}};
        j["seeds_used"] = r.seeds_used;
        j["seed_accuracies"] = r.seed_accuracies;
        j["accuracy_mean"] = r.accuracy_mean;
        j["accuracy_std"] = r.accuracy_std;
        j["epoch_time_s"] = r.epoch_time_s;
        j["epoch_time_mean_s"] = r.epoch_time_mean_s;
        j["param_count"] = r.params;
        j["efficiency_cost"] = r.efficiency_cost;
        j["efficiency_score"] = r.efficiency_score;
        j["failed"] = r.failed;
        j["failure"] = r.failure;
        os << j.dump() << "\n";
    }
    return os.str();
}

std::vector<ExperimentRecord> records_from_jsonl(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::vector<ExperimentRecord> out;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("records JSONL: ") + e.what(), line_no);
        }
        ExperimentRecord r;
        r.record_id = j.at("record_id").get<std::string>();
        r.protocol = j.at("protocol").get<std::string>();
        for (const auto& m : j.at("modules_present")) {
            auto k = module_from_code(m.get<std::string>());
            if (!k) throw ParseError("records JSONL: unknown module code", line_no);
            r.modules_present.insert(*k);
        }
        const auto& jm = j.at("model");
        r.mcfg.embed_dim = jm.at("embed_dim").get<std::size_t>();
        r.mcfg.num_heads = jm.at("num_heads").get<std::size_t>();
        r.mcfg.layers_fft = jm.at("layers_fft").get<std::size_t>();
        r.mcfg.layers_ifft = jm.at("layers_ifft").get<std::size_t>();
        r.mcfg.layers_mha = jm.at("layers_mha").get<std::size_t>();
        r.mcfg.layers_ffn = jm.at("layers_ffn").get<std::size_t>();
        r.mcfg.include_embed = jm.at("include_embed").get<bool>();
        r.mcfg.include_gap = jm.at("include_gap").get<bool>();
        r.mcfg.include_bn = jm.at("include_bn").get<bool>();
        r.mcfg.include_act = jm.at("include_act").get<bool>();
        r.mcfg.dropout = jm.at("dropout").get<double>();
        r.mcfg.ffn_hidden_dim = jm.at("ffn_hidden_dim").get<std::size_t>();
        r.mcfg.embed_kernel = jm.at("embed_kernel").get<std::size_t>();
        r.mcfg.num_classes = jm.at("num_classes").get<std::size_t>();
        r.mcfg.input_dims = jm.at("input_dims").get<std::size_t>();
        r.mcfg.seq_len = jm.at("seq_len").get<std::size_t>();
        const auto& jt = j.at("train");
        r.tcfg.learning_rate = jt.at("learning_rate").get<double>();
        r.tcfg.batch_size = jt.at("batch_size").get<std::size_t>();
        r.tcfg.max_epochs = jt.at("max_epochs").get<std::size_t>();
        r.tcfg.val_fraction = jt.at("val_fraction").get<double>();
        r.seeds_used = j.at("seeds_used").get<std::vector<std::uint64_t>>();
        r.seed_accuracies = j.at("seed_accuracies").get<std::vector<double>>();
        r.accuracy_mean = j.at("accuracy_mean").get<double>();
        r.accuracy_std = j.at("accuracy_std").get<double>();
        r.epoch_time_s = j.at("epoch_time_s").get<double>();
        r.epoch_time_mean_s = j.at("epoch_time_mean_s").get<double>();
        r.params = j.at("param_count").get<std::size_t>();
        r.efficiency_cost = j.at("efficiency_cost").get<double>();
        r.efficiency_score = j.at("efficiency_score").get<double>();
        r.failed = j.at("failed").get<bool>();
        r.failure = j.at("failure").get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fts
