#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace lrdspec {

/// Real-to-complex DFT of a fixed length backed by FFTW. Instances are cheap
/// handles onto a process-wide plan cache and may be used from any thread.
///
/// forward: X_k = sum_s x_s e^{-2 pi i k s / n}, k = 0..n/2.
/// inverse: unnormalized, x_s = sum_k X_k e^{+2 pi i k s / n}.
class RealFft {
public:
    explicit RealFft(std::size_t n);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

    void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
    void inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

    struct Plans;

private:
    std::size_t n_;
    std::shared_ptr<const Plans> plans_;
};

/// Smallest 2^a 3^b 5^c not below n.
[[nodiscard]] std::size_t fft_friendly_size(std::size_t n);

/// Linear convolution restricted to a window: returns c[first .. first+count)
/// where c[p] = sum_m filter[m] * signal[p - m]. Uses a direct loop for small
/// problems and an FFT otherwise; the choice depends only on the sizes.
class WindowedConvolver {
public:
    WindowedConvolver(std::vector<double> filter, std::size_t signal_size, std::size_t first,
                      std::size_t count);

    [[nodiscard]] std::vector<double> apply(std::span<const double> signal) const;

    [[nodiscard]] std::size_t signal_size() const noexcept { return signal_size_; }
    [[nodiscard]] bool uses_fft() const noexcept { return fft_ != nullptr; }

private:
    std::vector<double> filter_;
    std::size_t signal_size_;
    std::size_t first_;
    std::size_t count_;
    std::unique_ptr<RealFft> fft_;
    std::vector<std::complex<double>> filter_spectrum_;
};

}  // namespace lrdspec
