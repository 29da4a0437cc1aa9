#include "lrdspec/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <stdexcept>

namespace lrdspec {

struct RealFft::Plans {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
};

namespace {

// FFTW's planner is not re-entrant; execution with the new-array interface is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::shared_ptr<const RealFft::Plans> plans_for(std::size_t n) {
    // Plans live for the whole process.
    static auto* cache = new std::map<std::size_t, std::shared_ptr<const RealFft::Plans>>();
    std::lock_guard lock(planner_mutex());
    if (auto it = cache->find(n); it != cache->end()) return it->second;

    auto plans = std::make_shared<RealFft::Plans>();
    const int len = static_cast<int>(n);
    std::vector<double> real(n);
    std::vector<std::complex<double>> cplx(n / 2 + 1);
    auto* cptr = reinterpret_cast<fftw_complex*>(cplx.data());
    plans->r2c = fftw_plan_dft_r2c_1d(len, real.data(), cptr, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans->c2r = fftw_plan_dft_c2r_1d(len, cptr, real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plans->r2c || !plans->c2r) throw std::runtime_error("FFTW planning failed");
    cache->emplace(n, plans);
    return plans;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("RealFft: size must be positive");
    plans_ = plans_for(n);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
    if (in.size() != n_ || out.size() != spectrum_size())
        throw std::invalid_argument("RealFft::forward: buffer size mismatch");
    // r2c leaves its input untouched for out-of-place 1-D transforms.
    fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
    if (in.size() != spectrum_size() || out.size() != n_)
        throw std::invalid_argument("RealFft::inverse: buffer size mismatch");
    // c2r destroys its input.
    std::vector<std::complex<double>> scratch(in.begin(), in.end());
    fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
}

std::size_t fft_friendly_size(std::size_t n) {
    std::size_t best = 1;
    while (best < n) best <<= 1;
    for (std::size_t p5 = 1; p5 <= best; p5 *= 5)
        for (std::size_t p35 = p5; p35 <= best; p35 *= 3)
            for (std::size_t m = p35; m <= best; m <<= 1)
                if (m >= n && m < best) best = m;
    return best;
}

WindowedConvolver::WindowedConvolver(std::vector<double> filter, std::size_t signal_size,
                                     std::size_t first, std::size_t count)
    : filter_(std::move(filter)), signal_size_(signal_size), first_(first), count_(count) {
    if (filter_.empty() || signal_size_ == 0)
        throw std::invalid_argument("WindowedConvolver: empty filter or signal");
    const double direct_cost = static_cast<double>(filter_.size()) * static_cast<double>(count_);
    if (direct_cost <= 2.0e5 || count_ == 0) return;

    const std::size_t len = fft_friendly_size(signal_size_ + filter_.size() - 1);
    fft_ = std::make_unique<RealFft>(len);
    std::vector<double> padded(len, 0.0);
    std::copy(filter_.begin(), filter_.end(), padded.begin());
    filter_spectrum_.resize(fft_->spectrum_size());
    fft_->forward(padded, filter_spectrum_);
}

std::vector<double> WindowedConvolver::apply(std::span<const double> signal) const {
    if (signal.size() != signal_size_)
        throw std::invalid_argument("WindowedConvolver::apply: signal size mismatch");
    std::vector<double> out(count_, 0.0);
    if (!fft_) {
        const auto flen = static_cast<std::ptrdiff_t>(filter_.size());
        const auto slen = static_cast<std::ptrdiff_t>(signal_size_);
        for (std::size_t i = 0; i < count_; ++i) {
            const auto p = static_cast<std::ptrdiff_t>(first_ + i);
            const std::ptrdiff_t m_lo = std::max<std::ptrdiff_t>(0, p - slen + 1);
            const std::ptrdiff_t m_hi = std::min<std::ptrdiff_t>(flen - 1, p);
            double acc = 0.0;
            for (std::ptrdiff_t m = m_lo; m <= m_hi; ++m) acc += filter_[m] * signal[p - m];
            out[i] = acc;
        }
        return out;
    }
    const std::size_t len = fft_->size();
    std::vector<double> padded(len, 0.0);
    std::copy(signal.begin(), signal.end(), padded.begin());
    std::vector<std::complex<double>> spec(fft_->spectrum_size());
    fft_->forward(padded, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= filter_spectrum_[k];
    fft_->inverse(spec, padded);
    const double scale = 1.0 / static_cast<double>(len);
    for (std::size_t i = 0; i < count_; ++i) out[i] = padded[first_ + i] * scale;
    return out;
}

}  // namespace lrdspec
