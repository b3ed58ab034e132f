#include "training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace fts {

void TrainConfig::validate(bool paper_protocol) const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("val_fraction must be in [0, 1)");
    if (paper_protocol) {
        const double lrs[] = {1e-3, 5e-3, 1e-4, 5e-4, 1e-5, 5e-5};
        if (std::find(std::begin(lrs), std::end(lrs), learning_rate) == std::end(lrs))
            throw ConfigError("learning rate must be one of {1e-3, 5e-3, 1e-4, 5e-4, 1e-5, "
                              "5e-5} under the paper protocol");
        if (batch_size != 8 && batch_size != 16 && batch_size != 32)
            throw ConfigError("batch size must be one of {8, 16, 32} under the paper protocol");
        if (val_fraction != 0.2)
            throw ConfigError("val_fraction is fixed at 0.2 under the paper protocol");
    }
}

std::string TrainHistory::to_csv() const {
    std::ostringstream os;
    os << "epoch,train_loss,val_loss,val_acc,wall_time_s\n";
    char buf[128];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss,
                      e.val_loss, e.val_accuracy, e.wall_time_s);
        os << buf;
    }
    return os.str();
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw DimensionError("cross_entropy: logits must be [batch, classes]");
    std::size_t b = logits.shape()[0], c = logits.shape()[1];
    if (labels.size() != b)
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                             " labels for batch of " + std::to_string(b));
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= c)
            throw DataError("cross_entropy: label " + std::to_string(l) + " out of [0, " +
                            std::to_string(c) + ")");
    const auto& ld = logits.data();
    auto probs = std::make_shared<std::vector<double>>(b * c);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double m = ld[i * c];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, ld[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(ld[i * c + j] - m);
        double lse = m + std::log(z);
        for (std::size_t j = 0; j < c; ++j)
            (*probs)[i * c + j] = std::exp(ld[i * c + j] - lse);
        loss += lse - ld[i * c + labels[i]];
    }
    loss /= static_cast<double>(b);
    Tensor y = Tensor::scalar(loss);
    if (tracing(logits)) {
        y.set_requires_grad(true);
        auto sl = logits.storage(), sy = y.storage();
        auto lab = std::make_shared<std::vector<int>>(labels);
        active_tape()->record([sl, sy, probs, lab, b, c] {
            sl->ensure_grad();
            double g = sy->grad[0] / static_cast<double>(b);
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    double onehot = (static_cast<std::size_t>((*lab)[i]) == j) ? 1.0 : 0.0;
                    sl->grad[i * c + j] += g * ((*probs)[i * c + j] - onehot);
                }
        });
    }
    return y;
}

void adam_step(std::vector<NamedTensor>& params, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.tensor.size(), 0.0);
            state.v.emplace_back(p.tensor.size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw ContractError("adam_step: state does not match parameter list");
    ++state.t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& theta = params[i].tensor.data();
        auto& g = params[i].tensor.grad();
        if (state.m[i].size() != theta.size())
            throw ContractError("adam_step: shape mismatch for " + params[i].name);
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::pair<TimeSeriesDataset, TimeSeriesDataset> split_train_val(
    const TimeSeriesDataset& ds, std::uint64_t seed, double val_fraction) {
    ds.check_invariants();
    if (ds.size() < 5) throw DataError("split_train_val: need at least 5 samples");
    std::mt19937_64 rng(seed);

    std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
    bool stratified = true;
    for (const auto& g : by_class)
        if (!g.empty() && g.size() < 2) stratified = false;

    std::vector<std::size_t> val_idx, train_idx;
    if (stratified) {
        for (auto& g : by_class) {
            std::shuffle(g.begin(), g.end(), rng);
            std::size_t nv = static_cast<std::size_t>(
                std::floor(val_fraction * static_cast<double>(g.size())));
            if (val_fraction > 0.0 && nv == 0 && g.size() >= 2) nv = 1;
            for (std::size_t i = 0; i < g.size(); ++i)
                (i < nv ? val_idx : train_idx).push_back(g[i]);
        }
    } else {
        std::vector<std::size_t> all(ds.size());
        std::iota(all.begin(), all.end(), 0);
        std::shuffle(all.begin(), all.end(), rng);
        std::size_t nv = static_cast<std::size_t>(
            std::floor(val_fraction * static_cast<double>(all.size())));
        for (std::size_t i = 0; i < all.size(); ++i)
            (i < nv ? val_idx : train_idx).push_back(all[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    auto subset = [&ds](const std::vector<std::size_t>& idx, const char* tag) {
        TimeSeriesDataset out;
        out.name = ds.name;
        out.partition = tag;
        out.dims = ds.dims;
        out.length = ds.length;
        out.class_names = ds.class_names;
        for (auto i : idx) {
            out.samples.push_back(ds.samples[i]);
            out.labels.push_back(ds.labels[i]);
            out.sample_ids.push_back(ds.sample_ids[i]);
        }
        return out;
    };
    return {subset(train_idx, "train"), subset(val_idx, "val")};
}

namespace {

std::vector<std::vector<std::size_t>> make_minibatches(std::vector<std::size_t> order,
                                                       std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        std::size_t end = std::min(i + batch_size, order.size());
        batches.emplace_back(order.begin() + i, order.begin() + end);
    }
    // a trailing singleton would break batchnorm's train-mode contract
    if (batches.size() >= 2 && batches.back().size() == 1) {
        batches[batches.size() - 2].push_back(batches.back()[0]);
        batches.pop_back();
    }
    return batches;
}

}  // namespace

double epoch_cost_units(const ModelConfig& cfg, std::size_t n_train_samples) {
    double L = static_cast<double>(cfg.seq_len);
    double K = static_cast<double>(cfg.embed_dim);
    double D = static_cast<double>(cfg.input_dims);
    double per_sample = 0.0;
    if (cfg.include_embed) per_sample += D * K * static_cast<double>(cfg.embed_kernel) * L;
    double log2lk = std::log2(std::max(2.0, L)) + std::log2(std::max(2.0, K));
    per_sample += static_cast<double>(cfg.layers_fft + cfg.layers_ifft) * 5.0 * L * K * log2lk;
    if (cfg.layers_mha > 0) {
        double dk = static_cast<double>(cfg.d_k());
        double h = static_cast<double>(cfg.num_heads);
        per_sample += static_cast<double>(cfg.layers_mha) *
                      (h * (3.0 * L * K * dk + 2.0 * L * L * dk) + L * h * dk * K);
    }
    per_sample += static_cast<double>(cfg.layers_ffn) * 2.0 * L * K *
                  static_cast<double>(cfg.ffn_hidden_dim);
    if (cfg.include_bn || cfg.include_act) per_sample += L * K;
    per_sample += K * static_cast<double>(cfg.num_classes);
    // forward + backward, scaled into pseudo-seconds
    return 3.0 * per_sample * static_cast<double>(n_train_samples) / 1e9;
}

TrainHistory train(Model& model, const TimeSeriesDataset& dataset, const TrainConfig& tcfg) {
    tcfg.validate();
    auto [train_set, val_set] = split_train_val(dataset, tcfg.seed, tcfg.val_fraction);
    TrainHistory history;
    if (tcfg.max_epochs == 0) return history;
    if (train_set.size() == 0) throw DataError("train: empty training split");

    model.reseed_dropout(tcfg.seed);
    std::mt19937_64 shuffle_rng(tcfg.seed ^ 0xc2b2ae3d27d4eb4full);
    AdamState adam;
    std::vector<std::vector<double>> best_snapshot;
    double best_val = -1.0;
    std::size_t epochs_since_best = 0;
    double flops_epoch = epoch_cost_units(model.config(), train_set.size());

    for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<std::size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (const auto& batch_idx : make_minibatches(order, tcfg.batch_size)) {
            Tensor x = train_set.batch(batch_idx);
            std::vector<int> labels;
            for (auto i : batch_idx) labels.push_back(train_set.labels[i]);
            GradTape tape;
            TapeScope scope(tape);
            model.zero_grad();
            Tensor logits = model.forward(x, /*training=*/true);
            Tensor loss = cross_entropy(logits, labels);
            if (!std::isfinite(loss.item()))
                throw TrainingError("training diverged (non-finite loss) at epoch " +
                                        std::to_string(epoch),
                                    static_cast<int>(epoch));
            tape.backward(loss);
            adam_step(model.parameters(), adam, tcfg.learning_rate);
            loss_sum += loss.item();
            ++n_batches;
        }

        double val_loss = 0.0, val_acc = 0.0;
        if (val_set.size() > 0) {
            Tensor vx = val_set.batch([&] {
                std::vector<std::size_t> all(val_set.size());
                std::iota(all.begin(), all.end(), 0);
                return all;
            }());
            Tensor vlogits = model.forward(vx, /*training=*/false);
            val_loss = cross_entropy(vlogits, val_set.labels).item();
            std::size_t correct = 0;
            std::size_t c = val_set.num_classes();
            for (std::size_t i = 0; i < val_set.size(); ++i) {
                std::size_t arg = 0;
                for (std::size_t j = 1; j < c; ++j)
                    if (vlogits.data()[i * c + j] > vlogits.data()[i * c + arg]) arg = j;
                if (static_cast<int>(arg) == val_set.labels[i]) ++correct;
            }
            val_acc = static_cast<double>(correct) / static_cast<double>(val_set.size());
        }

        double elapsed;
        if (tcfg.timing == TimingMode::Flops) {
            elapsed = flops_epoch;
        } else {
            elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (elapsed <= 0.0) elapsed = 1e-9;
        }
        history.epochs.push_back({epoch, loss_sum / static_cast<double>(n_batches), val_loss,
                                  val_acc, elapsed});

        if (val_acc > best_val) {
            best_val = val_acc;
            best_snapshot = model.snapshot_values();
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (tcfg.early_stop_patience > 0 && epochs_since_best >= tcfg.early_stop_patience)
                break;
        }
    }
    if (!best_snapshot.empty()) model.restore_values(best_snapshot);
    history.best_val_accuracy = std::max(best_val, 0.0);
    return history;
}

double evaluate(Model& model, const TimeSeriesDataset& partition) {
    if (partition.size() == 0) throw DataError("evaluate: empty partition");
    partition.check_invariants();
    std::size_t c = partition.num_classes();
    std::size_t correct = 0;
    const std::size_t chunk = 64;
    for (std::size_t start = 0; start < partition.size(); start += chunk) {
        std::size_t end = std::min(start + chunk, partition.size());
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tensor logits = model.forward(partition.batch(idx), /*training=*/false);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::size_t arg = 0;
            for (std::size_t j = 1; j < c; ++j)
                if (logits.data()[i * c + j] > logits.data()[i * c + arg]) arg = j;
            if (static_cast<int>(arg) == partition.labels[idx[i]]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(partition.size());
}

TimingResult measure_epoch_time(const ModelConfig& cfg, const TimeSeriesDataset& dataset,
                                const TrainConfig& tcfg, std::size_t n_epochs) {
    if (n_epochs < 3)
        throw ConfigError("measure_epoch_time: need n_epochs >= 3 (first is warmup)");
    TrainConfig t = tcfg;
    t.max_epochs = n_epochs;
    t.early_stop_patience = 0;
    Model model(cfg, t.seed);
    TrainHistory h = train(model, dataset, t);
    std::vector<double> times;
    for (std::size_t i = 1; i < h.epochs.size(); ++i) times.push_back(h.epochs[i].wall_time_s);
    if (times.empty()) throw ContractError("measure_epoch_time: no timed epochs");
    std::sort(times.begin(), times.end());
    double median = times.size() % 2 ? times[times.size() / 2]
                                     : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
    double mean = std::accumulate(times.begin(), times.end(), 0.0) /
                  static_cast<double>(times.size());
    return {median, mean};
}

}  // namespace fts
