#pragma once

#include <complex>
#include <memory>

namespace toeplab {

/// Batched 2D DFT over an interleaved block layout: element (i1, i2, a) lives at
/// data[s * (i1 * n2 + i2) + a], and each of the s block coordinates is
/// transformed independently. Transforms are unnormalized and in place.
///
/// Plans are created once (under a global lock, FFTW's planner is not
/// thread-safe); execute calls are reentrant and may run concurrently on
/// different buffers.
class Fft2 {
public:
    Fft2(int n1, int n2, int s);
    ~Fft2();
    Fft2(Fft2&&) noexcept;
    Fft2& operator=(Fft2&&) noexcept;
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    /// y_r = sum_j x_j exp(-i 2 pi <r, j / n>)
    void forward(std::complex<double>* data) const;
    /// y_j = sum_r x_r exp(+i 2 pi <r, j / n>)
    void backward(std::complex<double>* data) const;

    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int block_size() const { return s_; }

private:
    struct Plans;
    int n1_, n2_, s_;
    std::unique_ptr<Plans> plans_;
};

} // namespace toeplab
