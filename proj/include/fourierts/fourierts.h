/* fourierts — C API for the Fourier-Transformer time-series classification
 * toolkit: dataset handling, training, ablation/pruning/stacking sweeps and
 * Pareto-frontier analysis behind opaque handles and status codes.
 *
 * All functions return FTS_OK (0) on success. On failure the thread-local
 * message from fts_last_error() describes what went wrong. Output handles are
 * only valid when the call returned FTS_OK and must be released with the
 * matching *_free function.
 */
#ifndef FOURIERTS_H
#define FOURIERTS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fts_status {
    FTS_OK = 0,
    FTS_ERR_USAGE = 1,    /* bad arguments or configuration */
    FTS_ERR_DATA = 2,     /* malformed or inconsistent input data */
    FTS_ERR_TRAINING = 3, /* training run failed (e.g. divergence) */
    FTS_ERR_INTERNAL = 4  /* broken internal contract or I/O failure */
} fts_status;

/* Message for the most recent failure on this thread; never NULL. */
const char* fts_last_error(void);

/* ---- datasets ---------------------------------------------------------- */

typedef struct fts_dataset fts_dataset;

typedef struct fts_dataset_info {
    size_t num_samples;
    size_t dims;
    size_t length;
    size_t num_classes;
} fts_dataset_info;

fts_status fts_dataset_load_ts(const char* path, fts_dataset** out);
fts_status fts_dataset_parse_ts(const char* text, fts_dataset** out);
fts_status fts_dataset_save_ts(const fts_dataset* ds, const char* path);
/* Frequency-coded synthetic data; class c is a sinusoid with c+1 cycles. */
fts_status fts_dataset_synth(uint64_t seed, size_t classes, size_t dims, size_t length,
                             size_t n_per_class, double difficulty, fts_dataset** train_out,
                             fts_dataset** test_out);
fts_status fts_dataset_get_info(const fts_dataset* ds, fts_dataset_info* out);
/* Compares against the built-in benchmark manifest entry for `code`.
 * On success writes a report into `report` (empty string == full match). */
fts_status fts_dataset_validate(const fts_dataset* ds, const char* code, char* report,
                                size_t report_cap);
void fts_dataset_free(fts_dataset* ds);

/* ---- run configuration ------------------------------------------------- */

/* Flat key=value configuration covering model and training settings.
 * Keys: embed_dim, heads, layers_fft, layers_ifft, layers_mha, layers_ffn,
 * include_embed, include_gap, include_bn, include_act, dropout, ffn_hidden,
 * embed_kernel, lr, batch, epochs, seed, seeds (semicolon list), patience,
 * timing (wall|flops), timing_epochs, paper_protocol (0|1). */
typedef struct fts_config fts_config;

fts_status fts_config_create(fts_config** out);
fts_status fts_config_set(fts_config* cfg, const char* key, const char* value);
fts_status fts_config_get(const fts_config* cfg, const char* key, char* value, size_t cap);
/* key=value lines; '#' comments and blank lines ignored. */
fts_status fts_config_load_file(fts_config* cfg, const char* path);
void fts_config_free(fts_config* cfg);

/* ---- commands ---------------------------------------------------------- */

/* Trains one configuration; writes checkpoint.txt and history.csv under
 * out_dir and a one-line summary (accuracy, params, epoch time) into summary. */
fts_status fts_cmd_train(const fts_dataset* train_ds, const fts_dataset* test_ds,
                         const fts_config* cfg, const char* out_dir, char* summary,
                         size_t summary_cap);

/* Sweep protocols; each writes records.csv + records.jsonl + table.txt under
 * out_dir. `prune_order` for fts_cmd_prune: "default" (the fixed significance
 * order) or "derived" (ranked from a fresh ablation pass). */
fts_status fts_cmd_ablate(const fts_dataset* train_ds, const fts_dataset* test_ds,
                          const fts_config* cfg, const char* out_dir);
fts_status fts_cmd_prune(const fts_dataset* train_ds, const fts_dataset* test_ds,
                         const fts_config* cfg, const char* prune_order, const char* out_dir);
fts_status fts_cmd_stack(const fts_dataset* train_ds, const fts_dataset* test_ds,
                         const fts_config* cfg, const char* out_dir);
fts_status fts_cmd_random(const fts_dataset* train_ds, const fts_dataset* test_ds,
                          const fts_config* cfg, size_t n, const char* out_dir);

/* Merges record CSVs, extracts the Pareto frontier over (efficiency score,
 * accuracy), writes frontier.csv + pareto.svg + pareto.dat under out_dir.
 * Pass min_accuracy/min_efficiency < 0 to skip the query; otherwise `answer`
 * receives the best frontier point meeting the bound, or "unattainable". */
fts_status fts_cmd_pareto(const char* const* record_csv_paths, size_t n_paths,
                          const char* out_dir, double min_accuracy, double min_efficiency,
                          char* answer, size_t answer_cap);

#ifdef __cplusplus
}
#endif

#endif /* FOURIERTS_H */
