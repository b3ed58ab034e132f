#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/tensor.hpp"
#include "gradcheck.hpp"

using namespace fts;

namespace {

Tensor randn(Shape shape, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> d(0.0, sd);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = d(rng);
    return Tensor(std::move(shape), std::move(v));
}

// Scalar readout sum(w .* y) with fixed weights so every output entry matters.
Tensor weighted_sum(const Tensor& y, const Tensor& w) { return sum_all(mul(y, w)); }

// Runs a central-difference check of `make_output` (which must rebuild the op
// from the current values of x each call) against the taped gradient.
double check_op(Tensor& x, const Tensor& w, const std::function<Tensor()>& make_output,
                double eps = 1e-6) {
    auto forward = [&]() { return weighted_sum(make_output(), w).item(); };
    auto backward = [&]() {
        GradTape tape;
        TapeScope scope(tape);
        Tensor loss = weighted_sum(make_output(), w);
        tape.backward(loss);
    };
    return gradcheck::max_grad_err(x, forward, backward, eps);
}

}  // namespace

TEST_CASE("elementwise op gradients match finite differences") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = randn({2, 3, 4}, rng);
        Tensor b = randn({2, 3, 4}, rng);
        Tensor w = randn({2, 3, 4}, rng);
        CHECK(check_op(x, w, [&] { return add(x, b); }) < 1e-4);
        CHECK(check_op(x, w, [&] { return sub(x, b); }) < 1e-4);
        CHECK(check_op(x, w, [&] { return mul(x, b); }) < 1e-4);
        CHECK(check_op(x, w, [&] { return scale(x, -1.7); }) < 1e-4);
        CHECK(check_op(x, w, [&] { return gelu(x); }) < 5e-4);
    }
}

TEST_CASE("second operand of binary ops also gets gradients") {
    std::mt19937_64 rng(12);
    Tensor a = randn({3, 5}, rng);
    Tensor b = randn({3, 5}, rng);
    Tensor w = randn({3, 5}, rng);
    CHECK(check_op(b, w, [&] { return mul(a, b); }) < 1e-5);
    CHECK(check_op(b, w, [&] { return sub(a, b); }) < 1e-5);
}

TEST_CASE("add_bias broadcasts over the last axis and backpropagates to both") {
    std::mt19937_64 rng(13);
    Tensor x = randn({2, 4, 3}, rng);
    Tensor bias = randn({3}, rng);
    Tensor w = randn({2, 4, 3}, rng);
    CHECK(check_op(x, w, [&] { return add_bias(x, bias); }) < 1e-5);
    CHECK(check_op(bias, w, [&] { return add_bias(x, bias); }) < 1e-5);
    Tensor y = add_bias(x, bias);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t k = 0; k < 3; ++k)
                CHECK(y.at({i, j, k}) == doctest::Approx(x.at({i, j, k}) + bias.at({k})));
}

TEST_CASE("matmul gradients, shared and batched right operand") {
    std::mt19937_64 rng(14);
    Tensor a = randn({2, 3, 4}, rng);
    Tensor b_shared = randn({4, 5}, rng);
    Tensor b_batched = randn({2, 4, 5}, rng);
    Tensor w = randn({2, 3, 5}, rng);
    CHECK(check_op(a, w, [&] { return matmul(a, b_shared); }) < 1e-5);
    CHECK(check_op(b_shared, w, [&] { return matmul(a, b_shared); }) < 1e-5);
    CHECK(check_op(a, w, [&] { return matmul(a, b_batched); }) < 1e-5);
    CHECK(check_op(b_batched, w, [&] { return matmul(a, b_batched); }) < 1e-5);
}

TEST_CASE("matmul values: associativity against hand computation") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    Tensor c({2, 2}, {1, 0, 0, 2});
    Tensor ab_c = matmul(matmul(a, b), c);
    Tensor a_bc = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(ab_c.data()[i] == doctest::Approx(a_bc.data()[i]).epsilon(1e-12));
    Tensor ab = matmul(a, b);
    CHECK(ab.data() == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("conv1d matches finite differences for x, w and bias") {
    std::mt19937_64 rng(15);
    Tensor x = randn({2, 3, 7}, rng);
    Tensor k = randn({4, 3, 3}, rng);
    Tensor bias = randn({4}, rng);
    Tensor w = randn({2, 4, 7}, rng);
    auto op = [&] { return conv1d(x, k, bias, 1, 1); };
    CHECK(check_op(x, w, op) < 1e-5);
    CHECK(check_op(k, w, op) < 1e-5);
    CHECK(check_op(bias, w, op) < 1e-5);
}

TEST_CASE("conv1d kernel-1 equals a pointwise linear map") {
    std::mt19937_64 rng(16);
    Tensor x = randn({2, 3, 5}, rng);
    Tensor k = randn({4, 3, 1}, rng);
    Tensor bias = randn({4}, rng);
    Tensor y = conv1d(x, k, bias);
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t o = 0; o < 4; ++o)
            for (std::size_t t = 0; t < 5; ++t) {
                double want = bias.at({o});
                for (std::size_t c = 0; c < 3; ++c)
                    want += k.at({o, c, 0}) * x.at({b, c, t});
                CHECK(y.at({b, o, t}) == doctest::Approx(want).epsilon(1e-12));
            }
}

TEST_CASE("softmax rows are probability distributions and gradients check out") {
    std::mt19937_64 rng(17);
    Tensor x = randn({3, 4, 5}, rng, 2.0);
    Tensor w = randn({3, 4, 5}, rng);
    Tensor p = softmax(x, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) {
                double v = p.at({i, j, k});
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    CHECK(check_op(x, w, [&] { return softmax(x, 2); }) < 1e-4);
    CHECK(check_op(x, w, [&] { return softmax(x, 0); }) < 1e-4);
}

TEST_CASE("softmax is invariant to a per-row constant shift") {
    Tensor x({1, 3}, {1.0, 2.0, 3.0});
    Tensor y({1, 3}, {101.0, 102.0, 103.0});
    Tensor px = softmax(x, 1), py = softmax(y, 1);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(px.data()[i] == doctest::Approx(py.data()[i]).epsilon(1e-12));
}

TEST_CASE("batchnorm gradients for input, gamma and beta") {
    std::mt19937_64 rng(18);
    Tensor x = randn({4, 3, 5}, rng);
    Tensor gamma = randn({5}, rng);
    Tensor beta = randn({5}, rng);
    Tensor w = randn({4, 3, 5}, rng);
    auto op = [&] {
        BatchNormState st;
        return batchnorm(x, gamma, beta, st, true, 2);
    };
    CHECK(check_op(x, w, op, 1e-5) < 2e-4);
    CHECK(check_op(gamma, w, op, 1e-5) < 2e-4);
    CHECK(check_op(beta, w, op, 1e-5) < 2e-4);
}

TEST_CASE("batchnorm normalizes each feature in train mode") {
    std::mt19937_64 rng(19);
    Tensor x = randn({8, 6, 3}, rng, 2.5);
    Tensor gamma({3}, {1, 1, 1});
    Tensor beta({3}, {0, 0, 0});
    BatchNormState st;
    Tensor y = batchnorm(x, gamma, beta, st, true, 2);
    for (std::size_t f = 0; f < 3; ++f) {
        double m = 0, v = 0;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t t = 0; t < 6; ++t) m += y.at({b, t, f});
        m /= 48;
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t t = 0; t < 6; ++t) {
                double d = y.at({b, t, f}) - m;
                v += d * d;
            }
        v /= 48;
        CHECK(m == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    }
    CHECK(st.initialized);
}

TEST_CASE("batchnorm eval mode uses running statistics and is differentiable") {
    std::mt19937_64 rng(20);
    Tensor gamma = randn({4}, rng);
    Tensor beta = randn({4}, rng);
    BatchNormState st;
    {
        Tensor warm = randn({6, 5, 4}, rng);
        batchnorm(warm, gamma, beta, st, true, 2);
    }
    Tensor x = randn({3, 5, 4}, rng);
    Tensor w = randn({3, 5, 4}, rng);
    auto op = [&] {
        BatchNormState copy = st;
        return batchnorm(x, gamma, beta, copy, false, 2);
    };
    CHECK(check_op(x, w, op) < 1e-5);
}

TEST_CASE("reductions, reshape, transpose, concat, index_axis gradients") {
    std::mt19937_64 rng(21);
    Tensor x = randn({2, 3, 4}, rng);
    Tensor w_full = randn({2, 3, 4}, rng);
    Tensor w_m = randn({2, 4}, rng);
    Tensor w_s = randn({3}, rng);
    Tensor w_t = randn({4, 2, 3}, rng);
    Tensor w_cat = randn({2, 6, 4}, rng);
    Tensor w_idx = randn({2, 4}, rng);
    Tensor other = randn({2, 3, 4}, rng);
    CHECK(check_op(x, w_m, [&] { return mean(x, {1}); }) < 1e-5);
    CHECK(check_op(x, w_s, [&] { return sum(x, {0, 2}); }) < 1e-5);
    CHECK(check_op(x, w_full, [&] { return reshape(x, {2, 12}).defined() ? reshape(x, {2, 3, 4}) : x; }) < 1e-5);
    CHECK(check_op(x, w_t, [&] { return transpose(x, {2, 0, 1}); }) < 1e-5);
    CHECK(check_op(x, w_cat, [&] { return concat({x, other}, 1); }) < 1e-5);
    CHECK(check_op(x, w_idx, [&] { return index_axis(x, 1, 2); }) < 1e-5);
    Tensor s = sum_all(x);
    double want = 0;
    for (double v : x.data()) want += v;
    CHECK(s.item() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("transpose moves values where expected") {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor y = transpose(x, {1, 0});
    CHECK(y.shape() == Shape{3, 2});
    CHECK(y.data() == std::vector<double>{1, 4, 2, 5, 3, 6});
}

TEST_CASE("dropout scales kept entries and is identity in eval mode") {
    std::mt19937_64 rng(22);
    Tensor x = Tensor::full({1000}, 1.0);
    std::mt19937_64 drop_rng(5);
    Tensor y = dropout(x, 0.3, drop_rng, true);
    std::size_t kept = 0;
    for (double v : y.data()) {
        CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.7)));
        if (v != 0.0) ++kept;
    }
    CHECK(kept > 600);
    CHECK(kept < 800);
    Tensor z = dropout(x, 0.3, drop_rng, false);
    CHECK(z.data() == x.data());
    (void)rng;
}

TEST_CASE("gradients accumulate across reuse of the same tensor") {
    Tensor x({2}, {3.0, -1.0});
    x.set_requires_grad(true);
    GradTape tape;
    TapeScope scope(tape);
    Tensor y = add(mul(x, x), x);  // y_i = x_i^2 + x_i, dy/dx = 2x + 1
    tape.backward(sum_all(y));
    CHECK(x.grad()[0] == doctest::Approx(7.0));
    CHECK(x.grad()[1] == doctest::Approx(-1.0));
}

TEST_CASE("no tape means no recording") {
    Tensor x({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    GradTape tape;
    {
        TapeScope scope(tape);
        (void)mul(x, x);
    }
    std::size_t taped = tape.size();
    (void)mul(x, x);  // outside any scope
    CHECK(tape.size() == taped);
}

TEST_CASE("shape mismatches throw DimensionError") {
    Tensor a({2, 3}, std::vector<double>(6, 1.0));
    Tensor b({3, 2}, std::vector<double>(6, 1.0));
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(matmul(a, a), DimensionError);
    CHECK_THROWS_AS(reshape(a, {4, 2}), DimensionError);
    CHECK_THROWS_AS(concat({a, b}, 0), DimensionError);
}

TEST_CASE("check_finite rejects NaN and infinity") {
    Tensor ok({2}, {1.0, 2.0});
    CHECK_NOTHROW(check_finite(ok, "ok"));
    Tensor bad({2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(check_finite(bad, "bad"), Error);
}

TEST_CASE("matmul identity and hand-expanded cases") {
    Tensor i2({2, 2}, {1, 0, 0, 1});
    Tensor a({2, 2}, {1, 2, 3, 4});
    CHECK(matmul(i2, a).data() == a.data());
    Tensor row({1, 2}, {1, 2});
    Tensor col({2, 1}, {3, 4});
    CHECK(matmul(row, col).data() == std::vector<double>{11});
}

TEST_CASE("conv1d identity kernel and sliding sum") {
    Tensor x1({1, 1, 2}, {5, 7});
    Tensor w1({1, 1, 1}, {1});
    Tensor b0({1}, {0});
    CHECK(conv1d(x1, w1, b0).data() == std::vector<double>{5, 7});
    Tensor x2({1, 1, 3}, {1, 2, 3});
    Tensor w2({1, 1, 2}, {1, 1});
    CHECK(conv1d(x2, w2, b0).data() == std::vector<double>{3, 5});
}

TEST_CASE("softmax uniform, overflow stability, direct oracle") {
    Tensor z({3}, {0, 0, 0});
    Tensor pu = softmax(z, 0);
    for (double v : pu.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
    Tensor big({2}, {1000, 0});
    Tensor pb = softmax(big, 0);
    CHECK(pb.data()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pb.data()[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    Tensor t({3}, {1, 2, 3});
    Tensor pt = softmax(t, 0);
    double den = std::exp(1) + std::exp(2) + std::exp(3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(pt.data()[i] == doctest::Approx(std::exp(1.0 + i) / den).epsilon(1e-12));
    CHECK(pt.data()[0] + pt.data()[1] + pt.data()[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gelu pinned values (erf formulation)") {
    Tensor x({3}, {0.0, 10.0, 1.0});
    Tensor y = gelu(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(y.data()[1] == doctest::Approx(10.0).epsilon(1e-7));
    CHECK(y.data()[2] == doctest::Approx(0.841345).epsilon(1e-5));
}

TEST_CASE("batchnorm affine transform and eval formula") {
    std::mt19937_64 rng(30);
    Tensor x = randn({16, 4, 2}, rng, 3.0);
    Tensor gamma({2}, {2, 2});
    Tensor beta({2}, {3, 3});
    BatchNormState st;
    Tensor y = batchnorm(x, gamma, beta, st, true, 2);
    for (std::size_t f = 0; f < 2; ++f) {
        double m = 0, v = 0;
        for (std::size_t b = 0; b < 16; ++b)
            for (std::size_t t = 0; t < 4; ++t) m += y.at({b, t, f});
        m /= 64;
        for (std::size_t b = 0; b < 16; ++b)
            for (std::size_t t = 0; t < 4; ++t) {
                double d = y.at({b, t, f}) - m;
                v += d * d;
            }
        v /= 64;
        CHECK(m == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(std::sqrt(v) == doctest::Approx(2.0).epsilon(1e-4));
    }
    // eval mode: handpicked running stats reproduce the closed formula
    BatchNormState ev;
    ev.initialized = true;
    ev.running_mean = {1.0, -2.0};
    ev.running_var = {4.0, 9.0};
    Tensor xe({2, 1, 2}, {3.0, 4.0, -1.0, 1.0});
    Tensor ye = batchnorm(xe, gamma, beta, ev, false, 2);
    auto want = [&](double xv, std::size_t f) {
        return (xv - ev.running_mean[f]) / std::sqrt(ev.running_var[f] + ev.eps) * 2.0 + 3.0;
    };
    CHECK(ye.at({0, 0, 0}) == doctest::Approx(want(3.0, 0)).epsilon(1e-12));
    CHECK(ye.at({0, 0, 1}) == doctest::Approx(want(4.0, 1)).epsilon(1e-12));
    CHECK(ye.at({1, 0, 0}) == doctest::Approx(want(-1.0, 0)).epsilon(1e-12));
    CHECK(ye.at({1, 0, 1}) == doctest::Approx(want(1.0, 1)).epsilon(1e-12));
}

TEST_CASE("batchnorm rejects train mode on a single-sample batch") {
    Tensor x({1, 4, 2}, std::vector<double>(8, 1.0));
    Tensor gamma({2}, {1, 1});
    Tensor beta({2}, {0, 0});
    BatchNormState st;
    CHECK_THROWS_AS(batchnorm(x, gamma, beta, st, true, 2), ConfigError);
}

TEST_CASE("mean along axis pinned example") {
    Tensor x({2, 2}, {1, 3, 5, 7});
    CHECK(mean(x, {1}).data() == std::vector<double>{2, 6});
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(concat({a, a}, 1).shape() == Shape{2, 6});
}

TEST_CASE("backward pinned cases: linear and quadratic") {
    Tensor w({2}, {1.0, 2.0});
    Tensor x({2}, {5.0, -3.0});
    w.set_requires_grad(true);
    {
        GradTape tape;
        TapeScope scope(tape);
        tape.backward(sum_all(mul(w, x)));
        CHECK(w.grad() == std::vector<double>{5.0, -3.0});
    }
    w.zero_grad();
    {
        GradTape tape;
        TapeScope scope(tape);
        tape.backward(sum_all(mul(w, w)));
        CHECK(w.grad() == std::vector<double>{2.0, 4.0});
    }
}

TEST_CASE("backward requires a scalar loss") {
    Tensor x({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    GradTape tape;
    TapeScope scope(tape);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("ops are deterministic on identical inputs") {
    std::mt19937_64 rng(31);
    Tensor x = randn({3, 4}, rng);
    Tensor a = matmul(x, transpose(x, {1, 0}));
    Tensor b = matmul(x, transpose(x, {1, 0}));
    CHECK(a.data() == b.data());
}
