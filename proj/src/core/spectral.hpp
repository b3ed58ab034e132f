#pragma once

#include <complex>
#include <vector>

#include "tensor.hpp"

namespace fts {

// Paired real/imaginary tensors of identical shape.
struct ComplexTensor {
    Tensor re;
    Tensor im;

    ComplexTensor() = default;
    ComplexTensor(Tensor re_, Tensor im_);

    static ComplexTensor from_real(const Tensor& re);
    ComplexTensor conj() const;
    const Shape& shape() const { return re.shape(); }
};

using cvec = std::vector<std::complex<double>>;

// Direct O(N^2) evaluation of the defining sums; the oracle for the fast paths.
cvec dft1d_naive(const cvec& x);
cvec idft1d_naive(const cvec& X);

// Radix-2 iterative Cooley-Tukey for power-of-two N, Bluestein chirp-z
// otherwise. Forward unnormalized, inverse carries 1/N.
cvec fft1d(const cvec& x);
cvec ifft1d(const cvec& X);

// Row transforms then column transforms; inverse carries 1/(MN).
// Data row-major [M][N].
cvec fft2d(const cvec& x, std::size_t m, std::size_t n);
cvec ifft2d(const cvec& X, std::size_t m, std::size_t n);

// ComplexTensor wrappers over the last axis (1D) / last two axes (2D).
ComplexTensor fft1d(const ComplexTensor& x);
ComplexTensor ifft1d(const ComplexTensor& x);
ComplexTensor dft1d_naive(const ComplexTensor& x);
ComplexTensor idft1d_naive(const ComplexTensor& x);

// Differentiable real<->frequency bridges for the model: lift the real input
// to complex, transform the (time, feat) plane per batch element, return the
// real part. Both are linear maps and self-adjoint up to the same transform,
// so the tape backward reapplies the forward map to the gradient.
// x: [batch, time, feat].
Tensor spectral_forward(const Tensor& x);
Tensor spectral_inverse(const Tensor& x);

}  // namespace fts
