#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fts {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorStorage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized on demand, zero-initialized
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Dense real tensor, row-major, double precision. Copying a Tensor copies the
// handle; two copies share storage and gradient.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const { return st_->shape; }
    std::size_t rank() const { return st_->shape.size(); }
    std::size_t size() const { return st_->data.size(); }

    std::vector<double>& data() { return st_->data; }
    const std::vector<double>& data() const { return st_->data; }
    std::vector<double>& grad() { st_->ensure_grad(); return st_->grad; }

    bool requires_grad() const { return st_ && st_->requires_grad; }
    void set_requires_grad(bool v) { st_->requires_grad = v; if (v) st_->ensure_grad(); }
    void zero_grad() { if (st_) st_->grad.assign(st_->data.size(), 0.0); }

    double item() const;
    double at(const std::vector<std::size_t>& idx) const;

    // Deep copy of values; resulting tensor is detached (no grad flag).
    Tensor clone_detached() const;

    std::shared_ptr<TensorStorage> storage() const { return st_; }

private:
    std::shared_ptr<TensorStorage> st_;
};

// Reverse-mode tape: ops append backward closures in execution order and
// backward() replays them strictly reversed.
class GradTape {
public:
    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }
    void backward(const Tensor& loss);
    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
};

// Ambient tape for the current thread; ops record onto it when set.
GradTape* active_tape();

class TapeScope {
public:
    explicit TapeScope(GradTape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    GradTape* prev_;
};

// True when the op output should participate in the tape.
bool tracing(const Tensor& a);
bool tracing(const Tensor& a, const Tensor& b);

struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;
    bool initialized = false;
};

// ---- differentiable operations ------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// Adds a rank-1 bias along the last axis.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// a: [..., p, q], b: [q, r] (shared) or [..., q, r] with matching batch dims.
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [batch, in_ch, length], w: [out_ch, in_ch, k], bias: [out_ch].
// Cross-correlation convention (no kernel flip).
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t stride = 1, std::size_t padding = 0);

Tensor softmax(const Tensor& x, int axis);
Tensor gelu(const Tensor& x);

// Normalizes per feature over every other axis. Train mode uses batch
// statistics and updates the running ones; eval mode uses the running stats.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, bool training, int feature_axis = 1);

Tensor mean(const Tensor& x, const std::vector<int>& axes, bool keepdims = false);
Tensor sum(const Tensor& x, const std::vector<int>& axes, bool keepdims = false);
Tensor sum_all(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x, const std::vector<int>& perm);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// Selects index `idx` along `axis`, dropping that axis.
Tensor index_axis(const Tensor& x, int axis, std::size_t idx);

// Inverted dropout; identity in eval mode.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng, bool training);

// Throws Error when any value is non-finite.
void check_finite(const Tensor& x, const char* what);

}  // namespace fts
