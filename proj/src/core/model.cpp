#include "model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fts {

const char* module_code(ModuleKind k) {
    switch (k) {
        case ModuleKind::EMBED: return "EMBED";
        case ModuleKind::FFT: return "FFT";
        case ModuleKind::IFFT: return "IFFT";
        case ModuleKind::MHA: return "MHA";
        case ModuleKind::FFN: return "FFN";
        case ModuleKind::GAP: return "GAP";
        case ModuleKind::BN: return "BN";
        case ModuleKind::ACT: return "ACT";
    }
    return "?";
}

std::optional<ModuleKind> module_from_code(const std::string& code) {
    for (auto k : kAllModules)
        if (code == module_code(k)) return k;
    return std::nullopt;
}

void ModelConfig::validate(bool paper_protocol) const {
    auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
    if (embed_dim == 0) fail("embed_dim must be positive");
    if (num_classes < 2) fail("num_classes must be >= 2");
    if (input_dims == 0) fail("input_dims must be positive");
    if (seq_len < 1) fail("seq_len must be >= 1");
    if (ffn_hidden_dim == 0) fail("ffn_hidden_dim must be positive");
    if (embed_kernel == 0) fail("embed_kernel must be positive");
    if (layers_fft > 4 || layers_ifft > 4 || layers_mha > 4 || layers_ffn > 4)
        fail("layer counts must be within [0, 4]");
    if (layers_mha > 0) {
        if (num_heads == 0) fail("num_heads must be positive");
        if (embed_dim % num_heads != 0)
            fail("embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
                 std::to_string(num_heads));
    }
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
    if (paper_protocol) {
        if (num_heads != 4 && num_heads != 8 && num_heads != 16)
            fail("heads must be one of {4, 8, 16} under the paper protocol");
        if (dropout != 0.1 && dropout != 0.2 && dropout != 0.3)
            fail("dropout must be one of {0.1, 0.2, 0.3} under the paper protocol");
    }
}

bool ModelConfig::module_present(ModuleKind k) const {
    switch (k) {
        case ModuleKind::EMBED: return include_embed;
        case ModuleKind::FFT: return layers_fft > 0;
        case ModuleKind::IFFT: return layers_ifft > 0;
        case ModuleKind::MHA: return layers_mha > 0;
        case ModuleKind::FFN: return layers_ffn > 0;
        case ModuleKind::GAP: return include_gap;
        case ModuleKind::BN: return include_bn;
        case ModuleKind::ACT: return include_act;
    }
    return false;
}

std::set<ModuleKind> ModelConfig::modules_present() const {
    std::set<ModuleKind> s;
    for (auto k : kAllModules)
        if (module_present(k)) s.insert(k);
    return s;
}

void ModelConfig::remove_module(ModuleKind k) {
    switch (k) {
        case ModuleKind::EMBED: include_embed = false; break;
        case ModuleKind::FFT: layers_fft = 0; break;
        case ModuleKind::IFFT: layers_ifft = 0; break;
        case ModuleKind::MHA: layers_mha = 0; break;
        case ModuleKind::FFN: layers_ffn = 0; break;
        case ModuleKind::GAP: include_gap = false; break;
        case ModuleKind::BN: include_bn = false; break;
        case ModuleKind::ACT: include_act = false; break;
    }
}

namespace {

std::size_t bn_site_count(const ModelConfig& cfg) {
    if (!cfg.include_bn) return 0;
    return (cfg.include_embed ? 1 : 0) + cfg.layers_mha + cfg.layers_ffn;
}

}  // namespace

std::size_t param_count(const ModelConfig& cfg) {
    std::size_t k = cfg.embed_dim;
    std::size_t n = 0;
    if (cfg.include_embed) n += cfg.input_dims * k * cfg.embed_kernel + k;
    if (cfg.layers_mha > 0) {
        std::size_t dk = cfg.d_k(), dv = cfg.d_v(), h = cfg.num_heads;
        std::size_t per_layer = h * ((k * dk + dk) * 2 + (k * dv + dv)) + (h * dv * k + k);
        n += cfg.layers_mha * per_layer;
    }
    n += cfg.layers_ffn * (k * cfg.ffn_hidden_dim + cfg.ffn_hidden_dim +
                           cfg.ffn_hidden_dim * k + k);
    n += bn_site_count(cfg) * 2 * k;
    n += k * cfg.num_classes + cfg.num_classes;  // classifier
    return n;
}

Model::Model(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed), dropout_rng_(seed ^ 0x9e3779b97f4a7c15ull) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    auto uniform_init = [&rng](Shape shape, std::size_t fan_in) {
        double s = std::sqrt(1.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-s, s);
        std::vector<double> d(shape_numel(shape));
        for (auto& v : d) v = u(rng);
        return Tensor(std::move(shape), std::move(d));
    };
    auto add_param = [this](const std::string& name, Tensor t) {
        t.set_requires_grad(true);
        params_.push_back({name, std::move(t)});
    };

    std::size_t k = cfg_.embed_dim;
    if (cfg_.include_embed) {
        add_param("embed.w", uniform_init({k, cfg_.input_dims, cfg_.embed_kernel},
                                          cfg_.input_dims * cfg_.embed_kernel));
        add_param("embed.b", uniform_init({k}, cfg_.input_dims * cfg_.embed_kernel));
    } else {
        // Untrained fixed projection so downstream shapes stay valid.
        buffers_.push_back({"embed.proj", uniform_init({cfg_.input_dims, k}, cfg_.input_dims)});
    }
    std::size_t dk = cfg_.d_k(), dv = cfg_.d_v(), h = cfg_.num_heads;
    for (std::size_t l = 0; l < cfg_.layers_mha; ++l) {
        std::string p = "mha" + std::to_string(l) + ".";
        for (std::size_t i = 0; i < h; ++i) {
            std::string hp = p + "h" + std::to_string(i) + ".";
            add_param(hp + "wq", uniform_init({k, dk}, k));
            add_param(hp + "bq", uniform_init({dk}, k));
            add_param(hp + "wk", uniform_init({k, dk}, k));
            add_param(hp + "bk", uniform_init({dk}, k));
            add_param(hp + "wv", uniform_init({k, dv}, k));
            add_param(hp + "bv", uniform_init({dv}, k));
        }
        add_param(p + "wo", uniform_init({h * dv, k}, h * dv));
        add_param(p + "bo", uniform_init({k}, h * dv));
    }
    for (std::size_t l = 0; l < cfg_.layers_ffn; ++l) {
        std::string p = "ffn" + std::to_string(l) + ".";
        add_param(p + "w1", uniform_init({k, cfg_.ffn_hidden_dim}, k));
        add_param(p + "b1", uniform_init({cfg_.ffn_hidden_dim}, k));
        add_param(p + "w2", uniform_init({cfg_.ffn_hidden_dim, k}, cfg_.ffn_hidden_dim));
        add_param(p + "b2", uniform_init({k}, cfg_.ffn_hidden_dim));
    }
    std::size_t sites = bn_site_count(cfg_);
    bn_states_.resize(sites);
    for (std::size_t s = 0; s < sites; ++s) {
        std::string p = "bn" + std::to_string(s) + ".";
        add_param(p + "gamma", Tensor::full({k}, 1.0));
        add_param(p + "beta", Tensor::zeros({k}));
    }
    add_param("head.w", uniform_init({k, cfg_.num_classes}, k));
    add_param("head.b", uniform_init({cfg_.num_classes}, k));
}

Tensor Model::find_param(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p.tensor;
    for (const auto& b : buffers_)
        if (b.name == name) return b.tensor;
    throw ContractError("unknown parameter: " + name);
}

Tensor Model::apply_bn_act(Tensor x, std::size_t& bn_site, bool training) {
    if (cfg_.include_bn) {
        std::string p = "bn" + std::to_string(bn_site) + ".";
        x = batchnorm(x, find_param(p + "gamma"), find_param(p + "beta"),
                      bn_states_[bn_site], training, /*feature_axis=*/2);
        ++bn_site;
    }
    if (cfg_.include_act) x = gelu(x);
    return x;
}

Tensor Model::forward_features(const Tensor& x, bool training) {
    if (x.rank() != 3 || x.shape()[1] != cfg_.seq_len || x.shape()[2] != cfg_.input_dims)
        throw DimensionError("forward: expected [batch, " + std::to_string(cfg_.seq_len) +
                             ", " + std::to_string(cfg_.input_dims) + "], got " +
                             shape_str(x.shape()));
    last_attention.clear();
    std::size_t bn_site = 0;
    std::size_t n = cfg_.seq_len;
    Tensor h = x;

    if (cfg_.include_embed) {
        std::size_t pad = (cfg_.embed_kernel - 1) / 2;
        Tensor xc = transpose(h, {0, 2, 1});  // [b, dims, time]
        xc = conv1d(xc, find_param("embed.w"), find_param("embed.b"), 1, pad);
        if (xc.shape()[2] != n)
            throw ConfigError("embed kernel " + std::to_string(cfg_.embed_kernel) +
                              " does not preserve sequence length; use an odd kernel");
        h = transpose(xc, {0, 2, 1});  // [b, time, K]
        h = apply_bn_act(std::move(h), bn_site, training);
    } else {
        h = matmul(h, find_param("embed.proj"));
    }

    for (std::size_t l = 0; l < cfg_.layers_fft; ++l) h = spectral_forward(h);

    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg_.d_k()));
    for (std::size_t l = 0; l < cfg_.layers_mha; ++l) {
        std::string p = "mha" + std::to_string(l) + ".";
        std::vector<Tensor> heads;
        for (std::size_t i = 0; i < cfg_.num_heads; ++i) {
            std::string hp = p + "h" + std::to_string(i) + ".";
            Tensor q = add_bias(matmul(h, find_param(hp + "wq")), find_param(hp + "bq"));
            Tensor kk = add_bias(matmul(h, find_param(hp + "wk")), find_param(hp + "bk"));
            Tensor v = add_bias(matmul(h, find_param(hp + "wv")), find_param(hp + "bv"));
            Tensor scores = scale(matmul(q, transpose(kk, {0, 2, 1})), inv_sqrt_dk);
            Tensor attn = softmax(scores, 2);
            if (capture_attention) last_attention.push_back(attn.clone_detached());
            heads.push_back(matmul(attn, v));
        }
        Tensor cat = cfg_.num_heads == 1 ? heads[0] : concat(heads, 2);
        Tensor out = add_bias(matmul(cat, find_param(p + "wo")), find_param(p + "bo"));
        out = dropout(out, cfg_.dropout, dropout_rng_, training);
        h = apply_bn_act(std::move(out), bn_site, training);
    }

    for (std::size_t l = 0; l < cfg_.layers_ifft; ++l) h = spectral_inverse(h);

    for (std::size_t l = 0; l < cfg_.layers_ffn; ++l) {
        std::string p = "ffn" + std::to_string(l) + ".";
        Tensor t = add_bias(matmul(h, find_param(p + "w1")), find_param(p + "b1"));
        t = gelu(t);
        t = dropout(t, cfg_.dropout, dropout_rng_, training);
        t = add_bias(matmul(t, find_param(p + "w2")), find_param(p + "b2"));
        h = apply_bn_act(std::move(t), bn_site, training);
    }

    if (cfg_.include_gap) {
        h = mean(h, {1}, false);  // [b, K]
    } else {
        h = index_axis(h, 1, n - 1);  // last time step keeps classifier shape
    }
    return h;
}

Tensor Model::forward(const Tensor& x, bool training) {
    Tensor feats = forward_features(x, training);
    return add_bias(matmul(feats, find_param("head.w")), find_param("head.b"));
}

std::size_t Model::registered_param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
}

void Model::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> Model::snapshot_values() const {
    std::vector<std::vector<double>> out;
    for (const auto& p : params_) out.push_back(p.tensor.data());
    for (const auto& b : buffers_) out.push_back(b.tensor.data());
    for (const auto& s : bn_states_) {
        out.push_back(s.running_mean);
        out.push_back(s.running_var);
    }
    return out;
}

void Model::restore_values(const std::vector<std::vector<double>>& values) {
    std::size_t i = 0;
    auto next = [&]() -> const std::vector<double>& {
        if (i >= values.size()) throw ContractError("restore_values: snapshot too short");
        return values[i++];
    };
    for (auto& p : params_) p.tensor.data() = next();
    for (auto& b : buffers_) b.tensor.data() = next();
    for (auto& s : bn_states_) {
        if (!s.initialized) {
            s.running_mean.clear();
            s.running_var.clear();
            s.initialized = true;
        }
        s.running_mean = next();
        s.running_var = next();
    }
    if (i != values.size()) throw ContractError("restore_values: snapshot too long");
}

namespace {

void write_tensor_entry(std::ostream& os, const std::string& name, const Shape& shape,
                        const std::vector<double>& data) {
    os << "tensor " << name << " " << shape.size();
    for (auto d : shape) os << " " << d;
    os << "\n";
    char buf[32];
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", data[i]);
        os << (i ? " " : "") << buf;
    }
    os << "\n";
}

}  // namespace

void Model::save_checkpoint(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os << "fourierts-checkpoint v1\n";
    for (const auto& p : params_) write_tensor_entry(os, p.name, p.tensor.shape(), p.tensor.data());
    for (const auto& b : buffers_) write_tensor_entry(os, b.name, b.tensor.shape(), b.tensor.data());
    for (std::size_t s = 0; s < bn_states_.size(); ++s) {
        const auto& st = bn_states_[s];
        Shape sh{cfg_.embed_dim};
        std::vector<double> rm = st.initialized ? st.running_mean
                                                : std::vector<double>(cfg_.embed_dim, 0.0);
        std::vector<double> rv = st.initialized ? st.running_var
                                                : std::vector<double>(cfg_.embed_dim, 1.0);
        write_tensor_entry(os, "bn" + std::to_string(s) + ".running_mean", sh, rm);
        write_tensor_entry(os, "bn" + std::to_string(s) + ".running_var", sh, rv);
    }
    os << "end\n";
    if (!os) throw IoError("failed writing checkpoint: " + path);
}

void Model::load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(is, line) || line != "fourierts-checkpoint v1")
        throw DataError("unrecognized checkpoint header in " + path);
    std::vector<std::pair<std::string, std::vector<double>>> entries;
    while (std::getline(is, line)) {
        if (line == "end") break;
        std::istringstream hs(line);
        std::string tag, name;
        std::size_t rank;
        if (!(hs >> tag >> name >> rank) || tag != "tensor")
            throw DataError("malformed checkpoint entry: " + line);
        std::size_t total = 1;
        for (std::size_t i = 0; i < rank; ++i) {
            std::size_t d;
            if (!(hs >> d)) throw DataError("malformed shape for " + name);
            total *= d;
        }
        if (!std::getline(is, line)) throw DataError("missing values for " + name);
        std::istringstream vs(line);
        std::vector<double> vals(total);
        for (auto& v : vals)
            if (!(vs >> v)) throw DataError("short value row for " + name);
        entries.emplace_back(name, std::move(vals));
    }
    auto take = [&entries](const std::string& name) -> std::vector<double>& {
        for (auto& e : entries)
            if (e.first == name) return e.second;
        throw DataError("checkpoint missing tensor: " + name);
    };
    for (auto& p : params_) {
        auto& vals = take(p.name);
        if (vals.size() != p.tensor.size())
            throw DataError("checkpoint size mismatch for " + p.name);
        p.tensor.data() = vals;
    }
    for (auto& b : buffers_) b.tensor.data() = take(b.name);
    for (std::size_t s = 0; s < bn_states_.size(); ++s) {
        auto& st = bn_states_[s];
        st.running_mean = take("bn" + std::to_string(s) + ".running_mean");
        st.running_var = take("bn" + std::to_string(s) + ".running_var");
        st.initialized = true;
    }
}

}  // namespace fts
