#include "fourierts/fourierts.h"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "core/experiments.hpp"
#include "core/pareto.hpp"

namespace {

thread_local std::string g_error;

void copy_out(char* dst, size_t cap, const std::string& s) {
    if (!dst || cap == 0) return;
    std::size_t n = std::min(cap - 1, s.size());
    std::memcpy(dst, s.data(), n);
    dst[n] = '\0';
}

template <typename Fn>
fts_status guarded(Fn fn) {
    try {
        fn();
        return FTS_OK;
    } catch (const fts::ConfigError& e) {
        g_error = e.what();
        return FTS_ERR_USAGE;
    } catch (const fts::DataError& e) {
        g_error = e.what();
        return FTS_ERR_DATA;
    } catch (const fts::DimensionError& e) {
        g_error = e.what();
        return FTS_ERR_DATA;
    } catch (const fts::TrainingError& e) {
        g_error = e.what();
        return FTS_ERR_TRAINING;
    } catch (const std::exception& e) {
        g_error = e.what();
        return FTS_ERR_INTERNAL;
    }
}

void require(bool cond, const char* msg) {
    if (!cond) throw fts::ConfigError(msg);
}

const char* kConfigKeys[] = {
    "embed_dim", "heads",        "layers_fft", "layers_ifft", "layers_mha",
    "layers_ffn", "include_embed", "include_gap", "include_bn", "include_act",
    "dropout",   "ffn_hidden",   "embed_kernel", "lr",        "batch",
    "epochs",    "seed",         "seeds",      "patience",    "timing",
    "timing_epochs", "paper_protocol"};

}  // namespace

struct fts_dataset {
    fts::TimeSeriesDataset ds;
};

struct fts_config {
    std::map<std::string, std::string> kv;
};

namespace {

struct RunSettings {
    fts::ModelConfig m;
    fts::TrainConfig t;
    fts::SweepConfig sweep;
    bool paper_protocol = false;
};

RunSettings materialize(const fts_config* cfg, const fts::TimeSeriesDataset& train_ds) {
    RunSettings s;
    s.m.input_dims = train_ds.dims;
    s.m.seq_len = train_ds.length;
    s.m.num_classes = train_ds.num_classes();
    auto get = [&](const char* key) -> const std::string* {
        auto it = cfg->kv.find(key);
        return it == cfg->kv.end() ? nullptr : &it->second;
    };
    auto as_u = [](const std::string& v, const char* key) -> std::size_t {
        try {
            std::size_t pos = 0;
            unsigned long long r = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return static_cast<std::size_t>(r);
        } catch (const std::exception&) {
            throw fts::ConfigError(std::string(key) + ": not a non-negative integer: " + v);
        }
    };
    auto as_d = [](const std::string& v, const char* key) -> double {
        try {
            std::size_t pos = 0;
            double r = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw fts::ConfigError(std::string(key) + ": not a number: " + v);
        }
    };
    auto as_b = [](const std::string& v, const char* key) -> bool {
        if (v == "1" || v == "true") return true;
        if (v == "0" || v == "false") return false;
        throw fts::ConfigError(std::string(key) + ": expected 0/1/true/false, got " + v);
    };
    if (auto* v = get("embed_dim")) s.m.embed_dim = as_u(*v, "embed_dim");
    if (auto* v = get("heads")) s.m.num_heads = as_u(*v, "heads");
    if (auto* v = get("layers_fft")) s.m.layers_fft = as_u(*v, "layers_fft");
    if (auto* v = get("layers_ifft")) s.m.layers_ifft = as_u(*v, "layers_ifft");
    if (auto* v = get("layers_mha")) s.m.layers_mha = as_u(*v, "layers_mha");
    if (auto* v = get("layers_ffn")) s.m.layers_ffn = as_u(*v, "layers_ffn");
    if (auto* v = get("include_embed")) s.m.include_embed = as_b(*v, "include_embed");
    if (auto* v = get("include_gap")) s.m.include_gap = as_b(*v, "include_gap");
    if (auto* v = get("include_bn")) s.m.include_bn = as_b(*v, "include_bn");
    if (auto* v = get("include_act")) s.m.include_act = as_b(*v, "include_act");
    if (auto* v = get("dropout")) s.m.dropout = as_d(*v, "dropout");
    if (auto* v = get("ffn_hidden")) s.m.ffn_hidden_dim = as_u(*v, "ffn_hidden");
    if (auto* v = get("embed_kernel")) s.m.embed_kernel = as_u(*v, "embed_kernel");
    if (auto* v = get("lr")) s.t.learning_rate = as_d(*v, "lr");
    if (auto* v = get("batch")) s.t.batch_size = as_u(*v, "batch");
    if (auto* v = get("epochs")) s.t.max_epochs = as_u(*v, "epochs");
    if (auto* v = get("seed")) s.t.seed = as_u(*v, "seed");
    if (auto* v = get("patience")) s.t.early_stop_patience = as_u(*v, "patience");
    if (auto* v = get("timing")) {
        if (*v == "wall") s.t.timing = fts::TimingMode::Wall;
        else if (*v == "flops") s.t.timing = fts::TimingMode::Flops;
        else throw fts::ConfigError("timing: expected 'wall' or 'flops', got " + *v);
    }
    if (auto* v = get("timing_epochs")) s.sweep.timing_epochs = as_u(*v, "timing_epochs");
    if (auto* v = get("paper_protocol")) s.paper_protocol = as_b(*v, "paper_protocol");
    if (auto* v = get("seeds")) {
        s.sweep.seeds.clear();
        std::istringstream is(*v);
        std::string tok;
        while (std::getline(is, tok, ';'))
            if (!tok.empty()) s.sweep.seeds.push_back(as_u(tok, "seeds"));
        if (s.sweep.seeds.empty()) throw fts::ConfigError("seeds: list is empty");
    }
    s.m.validate(s.paper_protocol);
    s.t.validate(s.paper_protocol);
    if (s.paper_protocol && s.sweep.seeds.size() != 5)
        throw fts::ConfigError("paper protocol sweeps require exactly 5 seeds");
    return s;
}

std::filesystem::path prepare_out_dir(const char* out_dir) {
    require(out_dir && *out_dir, "output directory is required");
    std::filesystem::path p(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw fts::IoError("cannot create output directory " + p.string());
    return p;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw fts::IoError("cannot open for writing: " + p.string());
    os << content;
    if (!os) throw fts::IoError("failed writing: " + p.string());
}

std::string fmt3(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// Table-3/4 shaped text: one column per record, Mean and Std rows,
// '*' marks the largest accuracy loss vs the first (unpruned) column and
// '_' the smallest.
std::string sweep_table(const std::vector<fts::ExperimentRecord>& records,
                        const std::vector<std::string>& headers, const char* title) {
    std::ostringstream os;
    os << title << "\n";
    double base = records.empty() ? 0.0 : records.front().accuracy_mean;
    std::size_t max_i = 0, min_i = 0;
    bool have = false;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].failed) continue;
        double loss = base - records[i].accuracy_mean;
        if (!have) {
            max_i = min_i = i;
            have = true;
        } else {
            if (loss > base - records[max_i].accuracy_mean) max_i = i;
            if (loss < base - records[min_i].accuracy_mean) min_i = i;
        }
    }
    auto cell = [&](std::size_t i) {
        if (records[i].failed) return std::string("failed");
        std::string c = fmt3(records[i].accuracy_mean) + " +/- " + fmt3(records[i].accuracy_std);
        if (have && i == max_i) c += " *max-loss";
        if (have && i == min_i) c += " _min-loss";
        return c;
    };
    std::size_t width = 24;
    os << "  ";
    for (const auto& h : headers) os << h << std::string(h.size() < width ? width - h.size() : 1, ' ');
    os << "\n  ";
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::string c = cell(i);
        os << c << std::string(c.size() < width ? width - c.size() : 1, ' ');
    }
    os << "\n";
    return os.str();
}

void persist_sweep(const std::vector<fts::ExperimentRecord>& records,
                   const std::vector<std::string>& headers, const char* title,
                   const std::filesystem::path& dir) {
    fts::save_records_csv(records, (dir / "records.csv").string());
    write_file(dir / "records.jsonl", fts::records_to_jsonl(records));
    write_file(dir / "table.txt", sweep_table(records, headers, title));
}

}  // namespace

extern "C" {

const char* fts_last_error(void) { return g_error.c_str(); }

fts_status fts_dataset_load_ts(const char* path, fts_dataset** out) {
    return guarded([&] {
        require(path && out, "path and out handle are required");
        auto* h = new fts_dataset{fts::load_ts_file(path)};
        *out = h;
    });
}

fts_status fts_dataset_parse_ts(const char* text, fts_dataset** out) {
    return guarded([&] {
        require(text && out, "text and out handle are required");
        *out = new fts_dataset{fts::parse_ts(text)};
    });
}

fts_status fts_dataset_save_ts(const fts_dataset* ds, const char* path) {
    return guarded([&] {
        require(ds && path, "dataset handle and path are required");
        fts::save_ts_file(ds->ds, path);
    });
}

fts_status fts_dataset_synth(uint64_t seed, size_t classes, size_t dims, size_t length,
                             size_t n_per_class, double difficulty, fts_dataset** train_out,
                             fts_dataset** test_out) {
    return guarded([&] {
        require(train_out && test_out, "output handles are required");
        auto [train, test] = fts::synth_dataset(seed, classes, dims, length, n_per_class,
                                                difficulty);
        *train_out = new fts_dataset{std::move(train)};
        *test_out = new fts_dataset{std::move(test)};
    });
}

fts_status fts_dataset_get_info(const fts_dataset* ds, fts_dataset_info* out) {
    return guarded([&] {
        require(ds && out, "dataset handle and out struct are required");
        out->num_samples = ds->ds.size();
        out->dims = ds->ds.dims;
        out->length = ds->ds.length;
        out->num_classes = ds->ds.num_classes();
    });
}

fts_status fts_dataset_validate(const fts_dataset* ds, const char* code, char* report,
                                size_t report_cap) {
    return guarded([&] {
        require(ds && code, "dataset handle and code are required");
        copy_out(report, report_cap, fts::validate_against_manifest(ds->ds, code));
    });
}

void fts_dataset_free(fts_dataset* ds) { delete ds; }

fts_status fts_config_create(fts_config** out) {
    return guarded([&] {
        require(out, "out handle is required");
        *out = new fts_config{};
    });
}

fts_status fts_config_set(fts_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        require(cfg && key && value, "config handle, key and value are required");
        bool known = false;
        for (const char* k : kConfigKeys)
            if (std::strcmp(k, key) == 0) known = true;
        if (!known) throw fts::ConfigError(std::string("unknown config key: ") + key);
        cfg->kv[key] = value;
    });
}

fts_status fts_config_get(const fts_config* cfg, const char* key, char* value, size_t cap) {
    return guarded([&] {
        require(cfg && key, "config handle and key are required");
        auto it = cfg->kv.find(key);
        if (it == cfg->kv.end()) throw fts::ConfigError(std::string("key not set: ") + key);
        copy_out(value, cap, it->second);
    });
}

fts_status fts_config_load_file(fts_config* cfg, const char* path) {
    return guarded([&] {
        require(cfg && path, "config handle and path are required");
        std::ifstream is(path);
        if (!is) throw fts::IoError(std::string("cannot open config file: ") + path);
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            auto h = line.find('#');
            if (h != std::string::npos) line = line.substr(0, h);
            auto a = line.find_first_not_of(" \t\r");
            if (a == std::string::npos) continue;
            auto b = line.find_last_not_of(" \t\r");
            line = line.substr(a, b - a + 1);
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw fts::ParseError("config line is not key=value: " + line, line_no);
            auto strip = [](std::string s) {
                auto x = s.find_first_not_of(" \t");
                if (x == std::string::npos) return std::string();
                auto y = s.find_last_not_of(" \t");
                return s.substr(x, y - x + 1);
            };
            fts_status st = fts_config_set(cfg, strip(line.substr(0, eq)).c_str(),
                                           strip(line.substr(eq + 1)).c_str());
            if (st != FTS_OK) throw fts::ConfigError(g_error);
        }
    });
}

void fts_config_free(fts_config* cfg) { delete cfg; }

fts_status fts_cmd_train(const fts_dataset* train_ds, const fts_dataset* test_ds,
                         const fts_config* cfg, const char* out_dir, char* summary,
                         size_t summary_cap) {
    return guarded([&] {
        require(train_ds && test_ds && cfg, "datasets and config are required");
        auto dir = prepare_out_dir(out_dir);
        RunSettings s = materialize(cfg, train_ds->ds);
        fts::Model model(s.m, s.t.seed);
        fts::TrainHistory history = fts::train(model, train_ds->ds, s.t);
        double acc = fts::evaluate(model, test_ds->ds);
        model.save_checkpoint((dir / "checkpoint.txt").string());
        write_file(dir / "history.csv", history.to_csv());
        std::vector<double> times;
        for (std::size_t i = 1; i < history.epochs.size(); ++i)
            times.push_back(history.epochs[i].wall_time_s);
        std::sort(times.begin(), times.end());
        double med = times.empty() ? 0.0
                                   : (times.size() % 2
                                          ? times[times.size() / 2]
                                          : 0.5 * (times[times.size() / 2 - 1] +
                                                   times[times.size() / 2]));
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "test_accuracy=%.6f best_val_accuracy=%.6f params=%zu "
                      "median_epoch_time_s=%.6g",
                      acc, history.best_val_accuracy, fts::param_count(s.m), med);
        copy_out(summary, summary_cap, buf);
        write_file(dir / "summary.txt", std::string(buf) + "\n");
    });
}

fts_status fts_cmd_ablate(const fts_dataset* train_ds, const fts_dataset* test_ds,
                          const fts_config* cfg, const char* out_dir) {
    return guarded([&] {
        require(train_ds && test_ds && cfg, "datasets and config are required");
        auto dir = prepare_out_dir(out_dir);
        RunSettings s = materialize(cfg, train_ds->ds);
        auto records = fts::run_ablation(s.m, s.t, train_ds->ds, test_ds->ds, s.sweep);
        std::vector<std::string> headers = {"Unpruned"};
        for (auto k : fts::kAllModules) headers.push_back(fts::module_code(k));
        persist_sweep(records, headers, "ablation (column module removed)", dir);
    });
}

fts_status fts_cmd_prune(const fts_dataset* train_ds, const fts_dataset* test_ds,
                         const fts_config* cfg, const char* prune_order, const char* out_dir) {
    return guarded([&] {
        require(train_ds && test_ds && cfg, "datasets and config are required");
        auto dir = prepare_out_dir(out_dir);
        RunSettings s = materialize(cfg, train_ds->ds);
        std::vector<fts::ModuleKind> order;
        std::string mode = prune_order ? prune_order : "default";
        if (mode == "default") {
            order = fts::default_pruning_order();
        } else if (mode == "derived") {
            auto ablation = fts::run_ablation(s.m, s.t, train_ds->ds, test_ds->ds, s.sweep);
            order = fts::rank_contributions(ablation);
        } else {
            throw fts::ConfigError("prune order must be 'default' or 'derived', got " + mode);
        }
        auto records = fts::run_pruning(s.m, s.t, train_ds->ds, test_ds->ds, s.sweep, order);
        std::vector<std::string> headers = {"Unpruned"};
        for (auto k : order) headers.push_back(std::string("-") + fts::module_code(k));
        persist_sweep(records, headers, "cumulative pruning", dir);
        std::ostringstream os;
        for (std::size_t i = 0; i < order.size(); ++i)
            os << (i ? "," : "") << fts::module_code(order[i]);
        write_file(dir / "order.txt", os.str() + "\n");
    });
}

fts_status fts_cmd_stack(const fts_dataset* train_ds, const fts_dataset* test_ds,
                         const fts_config* cfg, const char* out_dir) {
    return guarded([&] {
        require(train_ds && test_ds && cfg, "datasets and config are required");
        auto dir = prepare_out_dir(out_dir);
        RunSettings s = materialize(cfg, train_ds->ds);
        auto records = fts::run_stacking(s.m, s.t, train_ds->ds, test_ds->ds, s.sweep);
        std::vector<std::string> headers = {"Skeleton"};
        for (auto k : fts::default_stacking_order())
            headers.push_back(std::string("+") + fts::module_code(k));
        persist_sweep(records, headers, "complexity stacking", dir);
        auto norm = fts::normalized_efficiency(records);
        std::ostringstream os;
        os << "record_id,acc_mean,eff_cost,normalized_eff_cost\n";
        for (std::size_t i = 0; i < records.size(); ++i) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n",
                          records[i].record_id.c_str(), records[i].accuracy_mean,
                          records[i].efficiency_cost, norm[i]);
            os << buf;
        }
        write_file(dir / "efficiency.csv", os.str());
    });
}

fts_status fts_cmd_random(const fts_dataset* train_ds, const fts_dataset* test_ds,
                          const fts_config* cfg, size_t n, const char* out_dir) {
    return guarded([&] {
        require(train_ds && test_ds && cfg, "datasets and config are required");
        require(n >= 1, "n must be >= 1");
        auto dir = prepare_out_dir(out_dir);
        RunSettings s = materialize(cfg, train_ds->ds);
        auto records =
            fts::run_random_sample(s.m, s.t, train_ds->ds, test_ds->ds, s.sweep, n, s.t.seed);
        fts::save_records_csv(records, (dir / "records.csv").string());
        write_file(dir / "records.jsonl", fts::records_to_jsonl(records));
    });
}

fts_status fts_cmd_pareto(const char* const* record_csv_paths, size_t n_paths,
                          const char* out_dir, double min_accuracy, double min_efficiency,
                          char* answer, size_t answer_cap) {
    return guarded([&] {
        require(record_csv_paths && n_paths >= 1, "at least one records file is required");
        auto dir = prepare_out_dir(out_dir);
        std::vector<fts::ExperimentRecord> all;
        for (size_t i = 0; i < n_paths; ++i) {
            auto recs = fts::load_records_csv(record_csv_paths[i]);
            all.insert(all.end(), recs.begin(), recs.end());
        }
        auto points = fts::points_from_records(all);
        if (points.empty()) throw fts::DataError("no usable (non-failed) records found");
        auto front = fts::pareto_front(points);
        write_file(dir / "frontier.csv", fts::frontier_to_csv(front));
        fts::emit_front_plot(points, front, (dir / "pareto.svg").string());
        std::string ans;
        if (min_accuracy >= 0.0) {
            auto p = fts::query_min_accuracy(front, min_accuracy);
            ans += p ? ("min_accuracy " + std::to_string(min_accuracy) + " -> " + p->record_id +
                        " efficiency=" + std::to_string(p->efficiency_score) +
                        " accuracy=" + std::to_string(p->accuracy))
                     : ("min_accuracy " + std::to_string(min_accuracy) + " -> unattainable");
        }
        if (min_efficiency >= 0.0) {
            if (!ans.empty()) ans += "\n";
            auto p = fts::query_min_efficiency(front, min_efficiency);
            ans += p ? ("min_efficiency " + std::to_string(min_efficiency) + " -> " +
                        p->record_id + " efficiency=" + std::to_string(p->efficiency_score) +
                        " accuracy=" + std::to_string(p->accuracy))
                     : ("min_efficiency " + std::to_string(min_efficiency) + " -> unattainable");
        }
        copy_out(answer, answer_cap, ans);
    });
}

}  // extern "C"
