#include "spectral.hpp"

#include <cmath>

namespace fts {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place radix-2 iterative Cooley-Tukey; N must be a power of two.
// sign = -1 forward, +1 inverse (unnormalized).
void fft_radix2(cvec& a, int sign) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    // bit reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * kPi / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                auto u = a[i + k];
                auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Bluestein chirp-z: arbitrary-length DFT through a power-of-two convolution.
cvec fft_bluestein(const cvec& x, int sign) {
    const std::size_t n = x.size();
    const std::size_t m = next_pow2(2 * n - 1);
    // chirp e^{sign * i * pi * k^2 / n}; k^2 mod 2n keeps the angle exact for large n
    cvec chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t k2 = (static_cast<unsigned long long>(k) * k) % (2 * n);
        double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = {std::cos(ang), std::sin(ang)};
    }
    cvec a(m, {0.0, 0.0}), b(m, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    for (std::size_t k = 0; k < n; ++k) {
        b[k] = std::conj(chirp[k]);
        if (k != 0) b[m - k] = std::conj(chirp[k]);
    }
    fft_radix2(a, -1);
    fft_radix2(b, -1);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    fft_radix2(a, +1);
    cvec out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k] / static_cast<double>(m);
    return out;
}

cvec fft_dispatch(const cvec& x, int sign) {
    if (x.empty()) throw DimensionError("fft: empty input");
    if (x.size() == 1) return x;
    if (is_pow2(x.size())) {
        cvec a = x;
        fft_radix2(a, sign);
        return a;
    }
    return fft_bluestein(x, sign);
}

}  // namespace

ComplexTensor::ComplexTensor(Tensor re_, Tensor im_) : re(std::move(re_)), im(std::move(im_)) {
    if (re.shape() != im.shape())
        throw DimensionError("ComplexTensor: re/im shapes differ, " + shape_str(re.shape()) +
                             " vs " + shape_str(im.shape()));
}

ComplexTensor ComplexTensor::from_real(const Tensor& re) {
    return ComplexTensor(re.clone_detached(), Tensor::zeros(re.shape()));
}

ComplexTensor ComplexTensor::conj() const {
    Tensor neg = im.clone_detached();
    for (auto& v : neg.data()) v = -v;
    return ComplexTensor(re.clone_detached(), std::move(neg));
}

cvec dft1d_naive(const cvec& x) {
    const std::size_t n = x.size();
    if (n == 0) throw DimensionError("dft1d_naive: empty input");
    cvec out(n, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) {
            double ang = -2.0 * kPi * static_cast<double>((k * j) % n) / static_cast<double>(n);
            out[k] += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
    return out;
}

cvec idft1d_naive(const cvec& X) {
    const std::size_t n = X.size();
    if (n == 0) throw DimensionError("idft1d_naive: empty input");
    cvec out(n, {0.0, 0.0});
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            double ang = 2.0 * kPi * static_cast<double>((k * j) % n) / static_cast<double>(n);
            out[j] += X[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[j] /= static_cast<double>(n);
    }
    return out;
}

cvec fft1d(const cvec& x) { return fft_dispatch(x, -1); }

cvec ifft1d(const cvec& X) {
    cvec out = fft_dispatch(X, +1);
    for (auto& v : out) v /= static_cast<double>(X.size());
    return out;
}

cvec fft2d(const cvec& x, std::size_t m, std::size_t n) {
    if (m == 0 || n == 0) throw DimensionError("fft2d: empty axis");
    if (x.size() != m * n) throw DimensionError("fft2d: data size != m*n");
    cvec out = x;
    cvec row(n), col(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(out.begin() + i * n, out.begin() + (i + 1) * n, row.begin());
        row = fft1d(row);
        std::copy(row.begin(), row.end(), out.begin() + i * n);
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) col[i] = out[i * n + j];
        col = fft1d(col);
        for (std::size_t i = 0; i < m; ++i) out[i * n + j] = col[i];
    }
    return out;
}

cvec ifft2d(const cvec& X, std::size_t m, std::size_t n) {
    if (m == 0 || n == 0) throw DimensionError("ifft2d: empty axis");
    if (X.size() != m * n) throw DimensionError("ifft2d: data size != m*n");
    cvec out = X;
    cvec row(n), col(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(out.begin() + i * n, out.begin() + (i + 1) * n, row.begin());
        row = ifft1d(row);
        std::copy(row.begin(), row.end(), out.begin() + i * n);
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) col[i] = out[i * n + j];
        col = ifft1d(col);
        for (std::size_t i = 0; i < m; ++i) out[i * n + j] = col[i];
    }
    return out;
}

namespace {

// Applies fn along the last axis of a ComplexTensor, batched over the rest.
template <typename Fn>
ComplexTensor map_last_axis(const ComplexTensor& x, Fn fn) {
    const Shape& s = x.shape();
    if (s.empty()) throw DimensionError("transform: rank-0 input");
    std::size_t n = s.back();
    std::size_t batches = shape_numel(s) / n;
    std::vector<double> re(x.re.data()), im(x.im.data());
    cvec lane(n);
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < n; ++i)
            lane[i] = {re[b * n + i], im[b * n + i]};
        cvec out = fn(lane);
        for (std::size_t i = 0; i < n; ++i) {
            re[b * n + i] = out[i].real();
            im[b * n + i] = out[i].imag();
        }
    }
    return ComplexTensor(Tensor(s, std::move(re)), Tensor(s, std::move(im)));
}

// Real part of the 2D transform of a real plane; the building block of the
// model's FFT/IFFT layers and (being symmetric) of their backward passes.
std::vector<double> re_fft2d_plane(const double* x, std::size_t m, std::size_t n, bool inverse) {
    cvec buf(m * n);
    for (std::size_t i = 0; i < m * n; ++i) buf[i] = {x[i], 0.0};
    cvec out = inverse ? ifft2d(buf, m, n) : fft2d(buf, m, n);
    // Orthonormal split of the 1/(MN) factor between the two bridges keeps
    // activation magnitudes of the same order as the input, which the
    // downstream attention softmax needs to stay unsaturated. The pair still
    // composes to the identity on even-real spectra.
    double scl = std::sqrt(static_cast<double>(m) * static_cast<double>(n));
    double a = inverse ? scl : 1.0 / scl;
    std::vector<double> re(m * n);
    for (std::size_t i = 0; i < m * n; ++i) re[i] = out[i].real() * a;
    return re;
}

Tensor spectral_bridge(const Tensor& x, bool inverse) {
    if (x.rank() != 3)
        throw DimensionError("spectral layer: expected [batch, time, feat], got " +
                             shape_str(x.shape()));
    std::size_t nb = x.shape()[0], m = x.shape()[1], n = x.shape()[2];
    std::vector<double> out(x.size());
    for (std::size_t b = 0; b < nb; ++b) {
        auto plane = re_fft2d_plane(x.data().data() + b * m * n, m, n, inverse);
        std::copy(plane.begin(), plane.end(), out.begin() + b * m * n);
    }
    Tensor y(x.shape(), std::move(out));
    if (tracing(x)) {
        y.set_requires_grad(true);
        auto sx = x.storage(), sy = y.storage();
        active_tape()->record([sx, sy, nb, m, n, inverse] {
            sx->ensure_grad();
            // The cos-kernel map is its own adjoint (the kernel is symmetric
            // in (input, output) index swap), so the backward reapplies it.
            for (std::size_t b = 0; b < nb; ++b) {
                auto plane = re_fft2d_plane(sy->grad.data() + b * m * n, m, n, inverse);
                for (std::size_t i = 0; i < m * n; ++i) sx->grad[b * m * n + i] += plane[i];
            }
        });
    }
    return y;
}

}  // namespace

ComplexTensor fft1d(const ComplexTensor& x) {
    return map_last_axis(x, [](const cvec& v) { return fft1d(v); });
}
ComplexTensor ifft1d(const ComplexTensor& x) {
    return map_last_axis(x, [](const cvec& v) { return ifft1d(v); });
}
ComplexTensor dft1d_naive(const ComplexTensor& x) {
    return map_last_axis(x, [](const cvec& v) { return dft1d_naive(v); });
}
ComplexTensor idft1d_naive(const ComplexTensor& x) {
    return map_last_axis(x, [](const cvec& v) { return idft1d_naive(v); });
}

Tensor spectral_forward(const Tensor& x) { return spectral_bridge(x, false); }
Tensor spectral_inverse(const Tensor& x) { return spectral_bridge(x, true); }

}  // namespace fts
