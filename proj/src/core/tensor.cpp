#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fts {

namespace {

thread_local GradTape* g_tape = nullptr;

std::vector<std::size_t> strides_of(const Shape& s) {
    std::vector<std::size_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
        st[i] = st[i + 1] * s[i + 1];
    return st;
}

int normalize_axis(int axis, std::size_t rank, const char* op) {
    int r = static_cast<int>(rank);
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r)
        throw DimensionError(std::string(op) + ": axis out of range for rank " +
                             std::to_string(rank));
    return axis;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Elementwise binary op with closed-form partials.
template <typename Fwd, typename Bwd>
Tensor ew_binary(const Tensor& a, const Tensor& b, const char* name, Fwd f, Bwd partials) {
    require_same_shape(a, b, name);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.data()[i], b.data()[i]);
    Tensor y(a.shape(), std::move(out));
    if (tracing(a, b)) {
        y.set_requires_grad(true);
        auto sa = a.storage(), sb = b.storage(), sy = y.storage();
        active_tape()->record([sa, sb, sy, partials] {
            sa->ensure_grad();
            sb->ensure_grad();
            for (std::size_t i = 0; i < sy->data.size(); ++i) {
                auto [da, db] = partials(sa->data[i], sb->data[i]);
                if (sa->requires_grad) sa->grad[i] += sy->grad[i] * da;
                if (sb->requires_grad) sb->grad[i] += sy->grad[i] * db;
            }
        });
    }
    return y;
}

}  // namespace

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) {
    for (auto d : shape)
        if (d == 0) throw DimensionError("tensor dimension of size 0 in " + shape_str(shape));
    if (shape_numel(shape) != data.size())
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    st_ = std::make_shared<TensorStorage>();
    st_->shape = std::move(shape);
    st_->data = std::move(data);
}

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, {value}); }

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on tensor of size " + std::to_string(size()));
    return st_->data[0];
}

double Tensor::at(const std::vector<std::size_t>& idx) const {
    if (idx.size() != rank()) throw DimensionError("at(): index rank mismatch");
    auto st = strides_of(shape());
    std::size_t off = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= shape()[i]) throw DimensionError("at(): index out of range");
        off += idx[i] * st[i];
    }
    return st_->data[off];
}

Tensor Tensor::clone_detached() const {
    return Tensor(st_->shape, st_->data);
}

void GradTape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward: loss must be a scalar tensor");
    if (!loss.requires_grad())
        throw ContractError("backward: loss is not on the tape");
    auto st = loss.storage();
    st->ensure_grad();
    st->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

GradTape* active_tape() { return g_tape; }

TapeScope::TapeScope(GradTape& tape) : prev_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = prev_; }

bool tracing(const Tensor& a) { return g_tape != nullptr && a.requires_grad(); }
bool tracing(const Tensor& a, const Tensor& b) {
    return g_tape != nullptr && (a.requires_grad() || b.requires_grad());
}

Tensor add(const Tensor& a, const Tensor& b) {
    return ew_binary(a, b, "add", [](double x, double y) { return x + y; },
                     [](double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return ew_binary(a, b, "sub", [](double x, double y) { return x - y; },
                     [](double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return ew_binary(a, b, "mul", [](double x, double y) { return x * y; },
                     [](double x, double y) { return std::pair<double, double>{y, x}; });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    Tensor y(a.shape(), std::move(out));
    if (tracing(a)) {
        y.set_requires_grad(true);
        auto sa = a.storage(), sy = y.storage();
        active_tape()->record([sa, sy, c] {
            sa->ensure_grad();
            for (std::size_t i = 0; i < sy->data.size(); ++i) sa->grad[i] += sy->grad[i] * c;
        });
    }
    return y;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (bias.rank() != 1 || bias.shape()[0] != x.shape().back())
        throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                             " incompatible with " + shape_str(x.shape()));
    std::size_t f = bias.shape()[0];
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + bias.data()[i % f];
    Tensor y(x.shape(), std::move(out));
    if (tracing(x, bias)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sb = bias.storage(), sy = y.storage();
        active_tape()->record([sx, sb, sy, f] {
            sx->ensure_grad();
            sb->ensure_grad();
            for (std::size_t i = 0; i < sy->data.size(); ++i) {
                if (sx->requires_grad) sx->grad[i] += sy->grad[i];
                if (sb->requires_grad) sb->grad[i % f] += sy->grad[i];
            }
        });
    }
    return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2)
        throw DimensionError("matmul: operands must have rank >= 2, got " +
                             shape_str(a.shape()) + " and " + shape_str(b.shape()));
    bool shared_b = (b.rank() == 2 && a.rank() > 2);
    if (!shared_b && a.rank() != b.rank())
        throw DimensionError("matmul: rank mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    std::size_t p = a.shape()[a.rank() - 2];
    std::size_t q = a.shape()[a.rank() - 1];
    std::size_t qb = b.shape()[b.rank() - 2];
    std::size_t r = b.shape()[b.rank() - 1];
    if (q != qb)
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
    Shape batch(a.shape().begin(), a.shape().end() - 2);
    if (!shared_b) {
        Shape bbatch(b.shape().begin(), b.shape().end() - 2);
        if (batch != bbatch)
            throw DimensionError("matmul: batch dimensions differ, " + shape_str(a.shape()) +
                                 " x " + shape_str(b.shape()));
    }
    std::size_t nb = shape_numel(batch);
    Shape out_shape = batch;
    out_shape.push_back(p);
    out_shape.push_back(r);
    std::vector<double> out(nb * p * r, 0.0);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t t = 0; t < nb; ++t) {
        const double* ap = ad.data() + t * p * q;
        const double* bp = bd.data() + (shared_b ? 0 : t * q * r);
        double* op = out.data() + t * p * r;
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t k = 0; k < q; ++k) {
                double av = ap[i * q + k];
                if (av == 0.0) continue;
                for (std::size_t j = 0; j < r; ++j) op[i * r + j] += av * bp[k * r + j];
            }
    }
    Tensor y(std::move(out_shape), std::move(out));
    if (tracing(a, b)) {
        y.set_requires_grad(true);
        auto sa = a.storage(), sb = b.storage(), sy = y.storage();
        active_tape()->record([sa, sb, sy, nb, p, q, r, shared_b] {
            sa->ensure_grad();
            sb->ensure_grad();
            for (std::size_t t = 0; t < nb; ++t) {
                const double* ap = sa->data.data() + t * p * q;
                const double* bp = sb->data.data() + (shared_b ? 0 : t * q * r);
                const double* gp = sy->grad.data() + t * p * r;
                double* gap = sa->grad.data() + t * p * q;
                double* gbp = sb->grad.data() + (shared_b ? 0 : t * q * r);
                if (sa->requires_grad)
                    for (std::size_t i = 0; i < p; ++i)
                        for (std::size_t j = 0; j < r; ++j) {
                            double g = gp[i * r + j];
                            if (g == 0.0) continue;
                            for (std::size_t k = 0; k < q; ++k)
                                gap[i * q + k] += g * bp[k * r + j];
                        }
                if (sb->requires_grad)
                    for (std::size_t i = 0; i < p; ++i)
                        for (std::size_t k = 0; k < q; ++k) {
                            double av = ap[i * q + k];
                            if (av == 0.0) continue;
                            for (std::size_t j = 0; j < r; ++j)
                                gbp[k * r + j] += av * gp[i * r + j];
                        }
            }
        });
    }
    return y;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
    if (x.rank() != 3 || w.rank() != 3 || bias.rank() != 1)
        throw DimensionError("conv1d: expected x[b,ic,L], w[oc,ic,k], bias[oc]");
    std::size_t nb = x.shape()[0], ic = x.shape()[1], L = x.shape()[2];
    std::size_t oc = w.shape()[0], k = w.shape()[2];
    if (w.shape()[1] != ic)
        throw DimensionError("conv1d: channel mismatch, x has " + std::to_string(ic) +
                             " input channels, w expects " + std::to_string(w.shape()[1]));
    if (bias.shape()[0] != oc) throw DimensionError("conv1d: bias size != out channels");
    if (stride < 1) throw DimensionError("conv1d: stride must be >= 1");
    if (k > L + 2 * padding)
        throw DimensionError("conv1d: kernel " + std::to_string(k) +
                             " larger than padded input " + std::to_string(L + 2 * padding));
    std::size_t ol = (L + 2 * padding - k) / stride + 1;
    std::vector<double> out(nb * oc * ol, 0.0);
    const auto& xd = x.data();
    const auto& wd = w.data();
    const auto& bd = bias.data();
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t o = 0; o < oc; ++o)
            for (std::size_t t = 0; t < ol; ++t) {
                double acc = bd[o];
                for (std::size_t c = 0; c < ic; ++c)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        long long l = static_cast<long long>(t * stride + kk) -
                                      static_cast<long long>(padding);
                        if (l < 0 || l >= static_cast<long long>(L)) continue;
                        acc += xd[(b * ic + c) * L + l] * wd[(o * ic + c) * k + kk];
                    }
                out[(b * oc + o) * ol + t] = acc;
            }
    Tensor y(Shape{nb, oc, ol}, std::move(out));
    if (tracing(x, w) || tracing(bias)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sw = w.storage(), sb = bias.storage(), sy = y.storage();
        active_tape()->record([sx, sw, sb, sy, nb, ic, L, oc, k, ol, stride, padding] {
            sx->ensure_grad();
            sw->ensure_grad();
            sb->ensure_grad();
            for (std::size_t b = 0; b < nb; ++b)
                for (std::size_t o = 0; o < oc; ++o)
                    for (std::size_t t = 0; t < ol; ++t) {
                        double g = sy->grad[(b * oc + o) * ol + t];
                        if (g == 0.0) continue;
                        if (sb->requires_grad) sb->grad[o] += g;
                        for (std::size_t c = 0; c < ic; ++c)
                            for (std::size_t kk = 0; kk < k; ++kk) {
                                long long l = static_cast<long long>(t * stride + kk) -
                                              static_cast<long long>(padding);
                                if (l < 0 || l >= static_cast<long long>(L)) continue;
                                if (sx->requires_grad)
                                    sx->grad[(b * ic + c) * L + l] +=
                                        g * sw->data[(o * ic + c) * k + kk];
                                if (sw->requires_grad)
                                    sw->grad[(o * ic + c) * k + kk] +=
                                        g * sx->data[(b * ic + c) * L + l];
                            }
                    }
        });
    }
    return y;
}

Tensor softmax(const Tensor& x, int axis) {
    int ax = normalize_axis(axis, x.rank(), "softmax");
    std::size_t n = x.shape()[ax];
    auto st = strides_of(x.shape());
    std::size_t inner = st[ax];
    std::size_t outer = x.size() / (n * inner);
    std::vector<double> out(x.size());
    const auto& xd = x.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            std::size_t base = o * n * inner + in;
            double m = xd[base];
            for (std::size_t i = 1; i < n; ++i) m = std::max(m, xd[base + i * inner]);
            double z = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double e = std::exp(xd[base + i * inner] - m);
                out[base + i * inner] = e;
                z += e;
            }
            for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= z;
        }
    Tensor y(x.shape(), std::move(out));
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        active_tape()->record([sx, sy, outer, n, inner] {
            sx->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in) {
                    std::size_t base = o * n * inner + in;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        dot += sy->grad[base + i * inner] * sy->data[base + i * inner];
                    for (std::size_t i = 0; i < n; ++i)
                        sx->grad[base + i * inner] +=
                            sy->data[base + i * inner] * (sy->grad[base + i * inner] - dot);
                }
        });
    }
    return y;
}

Tensor gelu(const Tensor& x) {
    // Exact erf form: x * Phi(x).
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = x.data()[i];
        out[i] = v * 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
    }
    Tensor y(x.shape(), std::move(out));
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        active_tape()->record([sx, sy] {
            sx->ensure_grad();
            const double inv_sqrt2pi = 0.3989422804014327;
            for (std::size_t i = 0; i < sx->data.size(); ++i) {
                double v = sx->data[i];
                double phi = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                sx->grad[i] += sy->grad[i] * (phi + v * pdf);
            }
        });
    }
    return y;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, bool training, int feature_axis) {
    int f = normalize_axis(feature_axis, x.rank(), "batchnorm");
    std::size_t nf = x.shape()[f];
    if (gamma.rank() != 1 || gamma.shape()[0] != nf || beta.rank() != 1 || beta.shape()[0] != nf)
        throw DimensionError("batchnorm: gamma/beta must have shape [" + std::to_string(nf) + "]");
    if (training && x.shape()[0] < 2)
        throw ConfigError("batchnorm: train mode needs batch size >= 2, got " +
                          std::to_string(x.shape()[0]));
    if (!state.initialized) {
        state.running_mean.assign(nf, 0.0);
        state.running_var.assign(nf, 1.0);
        state.initialized = true;
    }
    if (state.running_mean.size() != nf)
        throw ContractError("batchnorm: state feature count mismatch");

    auto st = strides_of(x.shape());
    std::size_t inner = st[f];
    std::size_t m = x.size() / nf;  // elements per feature
    auto feat_of = [&](std::size_t i) { return (i / inner) % nf; };

    std::vector<double> mu(nf), var(nf);
    if (training) {
        std::fill(mu.begin(), mu.end(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) mu[feat_of(i)] += x.data()[i];
        for (auto& v : mu) v /= static_cast<double>(m);
        std::fill(var.begin(), var.end(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = x.data()[i] - mu[feat_of(i)];
            var[feat_of(i)] += d * d;
        }
        for (auto& v : var) v /= static_cast<double>(m);
        for (std::size_t j = 0; j < nf; ++j) {
            state.running_mean[j] =
                (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mu[j];
            state.running_var[j] =
                (1.0 - state.momentum) * state.running_var[j] + state.momentum * var[j];
        }
    } else {
        mu = state.running_mean;
        var = state.running_var;
    }
    std::vector<double> ivstd(nf);
    for (std::size_t j = 0; j < nf; ++j) ivstd[j] = 1.0 / std::sqrt(var[j] + state.eps);

    std::vector<double> xhat(x.size()), out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t j = feat_of(i);
        xhat[i] = (x.data()[i] - mu[j]) * ivstd[j];
        out[i] = gamma.data()[j] * xhat[i] + beta.data()[j];
    }
    Tensor y(x.shape(), std::move(out));
    if (tracing(x, gamma) || tracing(beta)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sg = gamma.storage(), sb = beta.storage(), sy = y.storage();
        auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
        auto iv = std::make_shared<std::vector<double>>(std::move(ivstd));
        active_tape()->record([sx, sg, sb, sy, xh, iv, nf, inner, m, training] {
            sx->ensure_grad();
            sg->ensure_grad();
            sb->ensure_grad();
            auto feat_of = [&](std::size_t i) { return (i / inner) % nf; };
            std::vector<double> sum_g(nf, 0.0), sum_gx(nf, 0.0);
            for (std::size_t i = 0; i < sy->data.size(); ++i) {
                std::size_t j = feat_of(i);
                sum_g[j] += sy->grad[i];
                sum_gx[j] += sy->grad[i] * (*xh)[i];
            }
            for (std::size_t j = 0; j < nf; ++j) {
                if (sg->requires_grad) sg->grad[j] += sum_gx[j];
                if (sb->requires_grad) sb->grad[j] += sum_g[j];
            }
            if (sx->requires_grad) {
                double dm = static_cast<double>(m);
                for (std::size_t i = 0; i < sy->data.size(); ++i) {
                    std::size_t j = feat_of(i);
                    double dxhat = sy->grad[i] * sg->data[j];
                    if (training) {
                        sx->grad[i] += (*iv)[j] / dm *
                                       (dm * dxhat - sum_g[j] * sg->data[j] -
                                        (*xh)[i] * sum_gx[j] * sg->data[j]);
                    } else {
                        sx->grad[i] += dxhat * (*iv)[j];
                    }
                }
            }
        });
    }
    return y;
}

namespace {

// Shared machinery for sum/mean reductions over an axis set.
struct Reduction {
    Shape out_shape;
    std::vector<std::size_t> map;  // input flat index -> output flat index
    std::size_t group;             // elements reduced into each output slot
};

Reduction plan_reduction(const Shape& in, const std::vector<int>& axes, bool keepdims,
                         const char* op) {
    std::vector<bool> reduced(in.size(), false);
    for (int a : axes) reduced[normalize_axis(a, in.size(), op)] = true;
    Shape out_shape;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (!reduced[i]) out_shape.push_back(in[i]);
        else if (keepdims) out_shape.push_back(1);
    }
    if (out_shape.empty()) out_shape.push_back(1);
    Reduction r;
    r.out_shape = out_shape;
    std::size_t total = shape_numel(in);
    r.map.resize(total);
    r.group = 1;
    for (std::size_t i = 0; i < in.size(); ++i)
        if (reduced[i]) r.group *= in[i];
    auto in_st = strides_of(in);
    // strides in the output for each kept input axis
    std::vector<std::size_t> out_st(in.size(), 0);
    std::size_t acc = 1;
    for (int i = static_cast<int>(in.size()) - 1; i >= 0; --i) {
        if (!reduced[i]) {
            out_st[i] = acc;
            acc *= in[i];
        }
    }
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx, o = 0;
        for (std::size_t i = 0; i < in.size(); ++i) {
            std::size_t c = rem / in_st[i];
            rem %= in_st[i];
            o += c * out_st[i];
        }
        r.map[idx] = o;
    }
    return r;
}

}  // namespace

Tensor sum(const Tensor& x, const std::vector<int>& axes, bool keepdims) {
    auto plan = plan_reduction(x.shape(), axes, keepdims, "sum");
    std::vector<double> out(shape_numel(plan.out_shape), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) out[plan.map[i]] += x.data()[i];
    Tensor y(plan.out_shape, std::move(out));
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        auto map = std::make_shared<std::vector<std::size_t>>(std::move(plan.map));
        active_tape()->record([sx, sy, map] {
            sx->ensure_grad();
            for (std::size_t i = 0; i < sx->data.size(); ++i)
                sx->grad[i] += sy->grad[(*map)[i]];
        });
    }
    return y;
}

Tensor mean(const Tensor& x, const std::vector<int>& axes, bool keepdims) {
    auto plan = plan_reduction(x.shape(), axes, keepdims, "mean");
    double inv = 1.0 / static_cast<double>(plan.group);
    std::vector<double> out(shape_numel(plan.out_shape), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) out[plan.map[i]] += x.data()[i] * inv;
    Tensor y(plan.out_shape, std::move(out));
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        auto map = std::make_shared<std::vector<std::size_t>>(std::move(plan.map));
        active_tape()->record([sx, sy, map, inv] {
            sx->ensure_grad();
            for (std::size_t i = 0; i < sx->data.size(); ++i)
                sx->grad[i] += sy->grad[(*map)[i]] * inv;
        });
    }
    return y;
}

Tensor sum_all(const Tensor& x) {
    std::vector<int> axes(x.rank());
    std::iota(axes.begin(), axes.end(), 0);
    return sum(x, axes, false);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
    Tensor y(shape, x.data());
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        active_tape()->record([sx, sy] {
            sx->ensure_grad();
            for (std::size_t i = 0; i < sx->data.size(); ++i) sx->grad[i] += sy->grad[i];
        });
    }
    return y;
}

Tensor transpose(const Tensor& x, const std::vector<int>& perm) {
    if (perm.size() != x.rank()) throw DimensionError("transpose: perm rank mismatch");
    std::vector<bool> seen(perm.size(), false);
    Shape out_shape(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        int p = normalize_axis(perm[i], x.rank(), "transpose");
        if (seen[p]) throw DimensionError("transpose: duplicate axis in perm");
        seen[p] = true;
        out_shape[i] = x.shape()[p];
    }
    auto in_st = strides_of(x.shape());
    auto out_st = strides_of(out_shape);
    std::size_t total = x.size();
    auto map = std::make_shared<std::vector<std::size_t>>(total);  // out idx -> in idx
    for (std::size_t o = 0; o < total; ++o) {
        std::size_t rem = o, in_idx = 0;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            std::size_t c = rem / out_st[i];
            rem %= out_st[i];
            in_idx += c * in_st[perm[i]];
        }
        (*map)[o] = in_idx;
    }
    std::vector<double> out(total);
    for (std::size_t o = 0; o < total; ++o) out[o] = x.data()[(*map)[o]];
    Tensor y(std::move(out_shape), std::move(out));
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        active_tape()->record([sx, sy, map] {
            sx->ensure_grad();
            for (std::size_t o = 0; o < sy->data.size(); ++o)
                sx->grad[(*map)[o]] += sy->grad[o];
        });
    }
    return y;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    int ax = normalize_axis(axis, parts[0].rank(), "concat");
    Shape out_shape = parts[0].shape();
    std::size_t total_axis = 0;
    for (const auto& p : parts) {
        if (p.rank() != parts[0].rank())
            throw DimensionError("concat: rank mismatch among inputs");
        for (std::size_t i = 0; i < p.rank(); ++i)
            if (static_cast<int>(i) != ax && p.shape()[i] != parts[0].shape()[i])
                throw DimensionError("concat: non-axis dimensions differ");
        total_axis += p.shape()[ax];
    }
    out_shape[ax] = total_axis;
    auto out_st = strides_of(out_shape);
    std::size_t inner = out_st[ax];
    std::size_t outer = shape_numel(out_shape) / (total_axis * inner);
    std::vector<double> out(shape_numel(out_shape));
    std::size_t offset = 0;
    bool any_grad = false;
    for (const auto& p : parts) {
        std::size_t n = p.shape()[ax];
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t in = 0; in < inner; ++in)
                    out[(o * total_axis + offset + i) * inner + in] =
                        p.data()[(o * n + i) * inner + in];
        offset += n;
        any_grad = any_grad || p.requires_grad();
    }
    Tensor y(std::move(out_shape), std::move(out));
    if (active_tape() && any_grad) {
        y.set_requires_grad(true);
        std::vector<std::shared_ptr<TensorStorage>> srcs;
        std::vector<std::size_t> sizes;
        for (const auto& p : parts) {
            srcs.push_back(p.storage());
            sizes.push_back(p.shape()[ax]);
        }
        auto sy = y.storage();
        active_tape()->record([srcs, sizes, sy, outer, inner, total_axis] {
            std::size_t offset = 0;
            for (std::size_t s = 0; s < srcs.size(); ++s) {
                auto& src = srcs[s];
                std::size_t n = sizes[s];
                if (src->requires_grad) {
                    src->ensure_grad();
                    for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t in = 0; in < inner; ++in)
                                src->grad[(o * n + i) * inner + in] +=
                                    sy->grad[(o * total_axis + offset + i) * inner + in];
                }
                offset += n;
            }
        });
    }
    return y;
}

Tensor index_axis(const Tensor& x, int axis, std::size_t idx) {
    int ax = normalize_axis(axis, x.rank(), "index_axis");
    std::size_t n = x.shape()[ax];
    if (idx >= n) throw DimensionError("index_axis: index out of range");
    auto st = strides_of(x.shape());
    std::size_t inner = st[ax];
    std::size_t outer = x.size() / (n * inner);
    Shape out_shape;
    for (std::size_t i = 0; i < x.rank(); ++i)
        if (static_cast<int>(i) != ax) out_shape.push_back(x.shape()[i]);
    if (out_shape.empty()) out_shape.push_back(1);
    std::vector<double> out(outer * inner);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in)
            out[o * inner + in] = x.data()[(o * n + idx) * inner + in];
    Tensor y(std::move(out_shape), std::move(out));
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        active_tape()->record([sx, sy, outer, inner, n, idx] {
            sx->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in)
                    sx->grad[(o * n + idx) * inner + in] += sy->grad[o * inner + in];
        });
    }
    return y;
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training) {
    if (!training || rate <= 0.0) return x;
    if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
    double keep = 1.0 - rate;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto mask = std::make_shared<std::vector<double>>(x.size());
    for (auto& v : *mask) v = (u(rng) < keep) ? 1.0 / keep : 0.0;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * (*mask)[i];
    Tensor y(x.shape(), std::move(out));
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        active_tape()->record([sx, sy, mask] {
            sx->ensure_grad();
            for (std::size_t i = 0; i < sx->data.size(); ++i)
                sx->grad[i] += sy->grad[i] * (*mask)[i];
        });
    }
    return y;
}

void check_finite(const Tensor& x, const char* what) {
    for (double v : x.data())
        if (!std::isfinite(v))
            throw Error(std::string(what) + ": non-finite value encountered");
}

}  // namespace fts
