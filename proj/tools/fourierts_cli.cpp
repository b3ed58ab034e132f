// fourierts command line front end. Talks to the shared library exclusively
// through the public C API.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fourierts/fourierts.h"

namespace {

int exit_code_for(fts_status st) {
    switch (st) {
        case FTS_OK: return 0;
        case FTS_ERR_USAGE: return 1;
        case FTS_ERR_DATA: return 2;
        default: return 3;
    }
}

int fail(fts_status st) {
    std::fprintf(stderr, "error: %s\n", fts_last_error());
    return exit_code_for(st);
}

struct DatasetPair {
    fts_dataset* train = nullptr;
    fts_dataset* test = nullptr;
    ~DatasetPair() {
        fts_dataset_free(train);
        fts_dataset_free(test);
    }
};

struct DataOpts {
    std::string train_path, test_path;
    bool use_synth = false;
    std::uint64_t synth_seed = 7;
    std::size_t synth_classes = 3, synth_dims = 2, synth_length = 64, synth_n = 40;
    double synth_difficulty = 0.5;
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
    auto* tr = cmd->add_option("--train", d.train_path, "training split (.ts file)");
    auto* te = cmd->add_option("--test", d.test_path, "test split (.ts file)");
    auto* sy = cmd->add_flag("--synth", d.use_synth, "use generated synthetic data instead");
    cmd->add_option("--synth-seed", d.synth_seed, "synthetic generator seed");
    cmd->add_option("--synth-classes", d.synth_classes, "synthetic class count");
    cmd->add_option("--synth-dims", d.synth_dims, "synthetic channel count");
    cmd->add_option("--synth-length", d.synth_length, "synthetic series length");
    cmd->add_option("--synth-n", d.synth_n, "synthetic samples per class per split");
    cmd->add_option("--synth-difficulty", d.synth_difficulty, "jitter/noise level in [0,1]");
    tr->excludes(sy);
    te->excludes(sy);
    tr->needs(te);
    te->needs(tr);
}

fts_status load_pair(const DataOpts& d, DatasetPair& out) {
    if (d.use_synth)
        return fts_dataset_synth(d.synth_seed, d.synth_classes, d.synth_dims, d.synth_length,
                                 d.synth_n, d.synth_difficulty, &out.train, &out.test);
    if (d.train_path.empty() || d.test_path.empty()) {
        std::fprintf(stderr, "error: provide --train/--test or --synth\n");
        return FTS_ERR_USAGE;
    }
    fts_status st = fts_dataset_load_ts(d.train_path.c_str(), &out.train);
    if (st != FTS_OK) return st;
    return fts_dataset_load_ts(d.test_path.c_str(), &out.test);
}

struct ConfigHandle {
    fts_config* cfg = nullptr;
    ~ConfigHandle() { fts_config_free(cfg); }
};

// Precedence: --set flags override config-file entries, which override the
// built-in defaults.
fts_status build_config(const std::string& file, const std::vector<std::string>& sets,
                        ConfigHandle& out) {
    fts_status st = fts_config_create(&out.cfg);
    if (st != FTS_OK) return st;
    if (!file.empty()) {
        st = fts_config_load_file(out.cfg, file.c_str());
        if (st != FTS_OK) return st;
    }
    for (const auto& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return FTS_ERR_USAGE;
        }
        st = fts_config_set(out.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (st != FTS_OK) return st;
    }
    return FTS_OK;
}

std::string resolve_out(const std::string& out_dir) {
    const char* root = std::getenv("FTS_OUT_ROOT");
    if (!root || !*root || out_dir.empty()) return out_dir;
    if (out_dir.front() == '/') return out_dir;
    return std::string(root) + "/" + out_dir;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fourierts: Fourier-Transformer time-series classification toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string cfg_file, out_dir = "out";
    std::vector<std::string> sets;
    app.add_option("--config", cfg_file, "key=value config file")->envname("FTS_CONFIG");
    app.add_option("--set", sets, "override one config entry (key=value), repeatable");
    app.add_option("--out", out_dir,
                   "output directory (relative paths go under $FTS_OUT_ROOT when set)");

    DataOpts data;
    std::string prune_order = "default";
    std::size_t random_n = 10;
    std::vector<std::string> record_files;
    double min_accuracy = -1.0, min_efficiency = -1.0;
    std::string gen_train = "synth_train.ts", gen_test = "synth_test.ts";
    std::string inspect_path, manifest_code;

    auto* c_train = app.add_subcommand("train", "train one configuration");
    add_data_opts(c_train, data);
    auto* c_ablate = app.add_subcommand("ablate", "per-module ablation sweep");
    add_data_opts(c_ablate, data);
    auto* c_prune = app.add_subcommand("prune", "cumulative pruning sweep");
    add_data_opts(c_prune, data);
    c_prune->add_option("--order", prune_order, "'default' or 'derived'");
    auto* c_stack = app.add_subcommand("stack", "complexity stacking sweep");
    add_data_opts(c_stack, data);
    auto* c_random = app.add_subcommand("random", "random architecture sample");
    add_data_opts(c_random, data);
    c_random->add_option("-n,--num", random_n, "number of sampled configurations");
    auto* c_pareto = app.add_subcommand("pareto", "Pareto frontier from record files");
    c_pareto->add_option("records", record_files, "records.csv files to merge")->required();
    c_pareto->add_option("--min-accuracy", min_accuracy, "query: cheapest model at this accuracy");
    c_pareto->add_option("--min-efficiency", min_efficiency,
                         "query: most accurate model at this efficiency");
    auto* c_gen = app.add_subcommand("gen-synth", "write synthetic train/test .ts files");
    c_gen->add_option("--train-file", gen_train, "output path for the train split");
    c_gen->add_option("--test-file", gen_test, "output path for the test split");
    c_gen->add_option("--synth-seed", data.synth_seed, "generator seed");
    c_gen->add_option("--synth-classes", data.synth_classes, "class count");
    c_gen->add_option("--synth-dims", data.synth_dims, "channel count");
    c_gen->add_option("--synth-length", data.synth_length, "series length");
    c_gen->add_option("--synth-n", data.synth_n, "samples per class per split");
    c_gen->add_option("--synth-difficulty", data.synth_difficulty, "jitter/noise level");
    auto* c_inspect = app.add_subcommand("inspect-data", "summarize a .ts file");
    c_inspect->add_option("file", inspect_path, ".ts file")->required();
    c_inspect->add_option("--manifest", manifest_code,
                          "check shape against the named benchmark entry (e.g. AF)");

    CLI11_PARSE(app, argc, argv);
    std::string out = resolve_out(out_dir);

    if (c_gen->parsed()) {
        DatasetPair pair;
        fts_status st =
            fts_dataset_synth(data.synth_seed, data.synth_classes, data.synth_dims,
                              data.synth_length, data.synth_n, data.synth_difficulty,
                              &pair.train, &pair.test);
        if (st != FTS_OK) return fail(st);
        st = fts_dataset_save_ts(pair.train, gen_train.c_str());
        if (st != FTS_OK) return fail(st);
        st = fts_dataset_save_ts(pair.test, gen_test.c_str());
        if (st != FTS_OK) return fail(st);
        std::printf("wrote %s and %s\n", gen_train.c_str(), gen_test.c_str());
        return 0;
    }

    if (c_inspect->parsed()) {
        fts_dataset* ds = nullptr;
        fts_status st = fts_dataset_load_ts(inspect_path.c_str(), &ds);
        if (st != FTS_OK) return fail(st);
        fts_dataset_info info;
        fts_dataset_get_info(ds, &info);
        std::printf("samples=%zu dims=%zu length=%zu classes=%zu\n", info.num_samples,
                    info.dims, info.length, info.num_classes);
        int rc = 0;
        if (!manifest_code.empty()) {
            char report[4096];
            st = fts_dataset_validate(ds, manifest_code.c_str(), report, sizeof(report));
            if (st != FTS_OK) {
                fts_dataset_free(ds);
                return fail(st);
            }
            if (report[0]) {
                std::printf("manifest mismatch (%s):\n%s", manifest_code.c_str(), report);
                rc = 2;
            } else {
                std::printf("matches manifest entry %s\n", manifest_code.c_str());
            }
        }
        fts_dataset_free(ds);
        return rc;
    }

    if (c_pareto->parsed()) {
        std::vector<const char*> paths;
        for (const auto& p : record_files) paths.push_back(p.c_str());
        char answer[1024] = {0};
        fts_status st = fts_cmd_pareto(paths.data(), paths.size(), out.c_str(), min_accuracy,
                                       min_efficiency, answer, sizeof(answer));
        if (st != FTS_OK) return fail(st);
        std::printf("frontier written to %s/frontier.csv (plot: pareto.svg)\n", out.c_str());
        if (answer[0]) std::printf("%s\n", answer);
        return 0;
    }

    ConfigHandle cfg;
    fts_status st = build_config(cfg_file, sets, cfg);
    if (st != FTS_OK) return fail(st);
    DatasetPair pair;
    st = load_pair(data, pair);
    if (st != FTS_OK) return fail(st);

    if (c_train->parsed()) {
        char summary[512] = {0};
        st = fts_cmd_train(pair.train, pair.test, cfg.cfg, out.c_str(), summary,
                           sizeof(summary));
        if (st != FTS_OK) return fail(st);
        std::printf("%s\n", summary);
        std::printf("artifacts in %s\n", out.c_str());
        return 0;
    }
    if (c_ablate->parsed()) st = fts_cmd_ablate(pair.train, pair.test, cfg.cfg, out.c_str());
    else if (c_prune->parsed())
        st = fts_cmd_prune(pair.train, pair.test, cfg.cfg, prune_order.c_str(), out.c_str());
    else if (c_stack->parsed()) st = fts_cmd_stack(pair.train, pair.test, cfg.cfg, out.c_str());
    else if (c_random->parsed())
        st = fts_cmd_random(pair.train, pair.test, cfg.cfg, random_n, out.c_str());
    if (st != FTS_OK) return fail(st);
    std::printf("records written to %s/records.csv\n", out.c_str());
    return 0;
}
