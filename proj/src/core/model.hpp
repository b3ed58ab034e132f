#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "spectral.hpp"
#include "tensor.hpp"

namespace fts {

// The eight nameable modules of the architecture.
enum class ModuleKind { EMBED, FFT, IFFT, MHA, FFN, GAP, BN, ACT };

constexpr std::array<ModuleKind, 8> kAllModules = {
    ModuleKind::EMBED, ModuleKind::FFT, ModuleKind::IFFT, ModuleKind::MHA,
    ModuleKind::FFN,   ModuleKind::GAP, ModuleKind::BN,   ModuleKind::ACT};

const char* module_code(ModuleKind k);
std::optional<ModuleKind> module_from_code(const std::string& code);

// One point in the architectural search space.
struct ModelConfig {
    std::size_t embed_dim = 16;  // d_model == K
    std::size_t num_heads = 4;
    std::size_t layers_fft = 1;
    std::size_t layers_ifft = 1;
    std::size_t layers_mha = 1;
    std::size_t layers_ffn = 1;
    bool include_embed = true;
    bool include_gap = true;
    bool include_bn = true;
    bool include_act = true;
    double dropout = 0.1;
    std::size_t ffn_hidden_dim = 32;
    std::size_t embed_kernel = 1;
    std::size_t num_classes = 2;
    std::size_t input_dims = 1;
    std::size_t seq_len = 2;

    std::size_t d_k() const { return embed_dim / num_heads; }
    std::size_t d_v() const { return embed_dim / num_heads; }

    // Throws ConfigError naming the violated invariant.
    void validate(bool paper_protocol = false) const;

    bool module_present(ModuleKind k) const;
    std::set<ModuleKind> modules_present() const;
    void remove_module(ModuleKind k);
};

// Analytic learnable-parameter count for a config; FFT/IFFT/GAP/ACT and the
// fixed projection that substitutes a removed EMBED contribute zero.
std::size_t param_count(const ModelConfig& cfg);

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // x: [batch, seq_len, input_dims] -> logits [batch, num_classes]
    Tensor forward(const Tensor& x, bool training);
    // pooled features before the classifier: [batch, embed_dim]
    Tensor forward_features(const Tensor& x, bool training);

    std::vector<NamedTensor>& parameters() { return params_; }
    const std::vector<NamedTensor>& parameters() const { return params_; }
    std::size_t registered_param_count() const;

    void zero_grad();
    void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

    // Deep copy of all learnable values + buffers into / out of this model.
    std::vector<std::vector<double>> snapshot_values() const;
    void restore_values(const std::vector<std::vector<double>>& values);

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

    // When set, forward() stores each MHA layer's attention weights
    // ([batch, heads, n, n], detached) for inspection.
    bool capture_attention = false;
    std::vector<Tensor> last_attention;

private:
    Tensor find_param(const std::string& name) const;
    Tensor apply_bn_act(Tensor x, std::size_t& bn_site, bool training);

    ModelConfig cfg_;
    std::uint64_t seed_;
    std::vector<NamedTensor> params_;
    std::vector<NamedTensor> buffers_;  // non-learnable (fixed embed projection)
    std::vector<BatchNormState> bn_states_;
    std::mt19937_64 dropout_rng_;
};

}  // namespace fts
