#pragma once

// Thin RAII wrappers over FFTW. Plan creation and destruction go through a
// process-wide mutex because FFTW's planner is not thread-safe; execution
// with new-array functions is. Plans ignore buffer alignment so results do
// not depend on where the allocator places data.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

namespace combwdm::fft {

using cplx = std::complex<double>;

inline std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

namespace detail {

inline fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

class Plan {
public:
    Plan() = default;
    explicit Plan(fftw_plan p) : plan_(p) {}
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    Plan(Plan&& o) noexcept : plan_(o.plan_) { o.plan_ = nullptr; }
    Plan& operator=(Plan&& o) noexcept
    {
        std::swap(plan_, o.plan_);
        return *this;
    }
    ~Plan()
    {
        if (plan_) {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(plan_);
        }
    }
    fftw_plan get() const { return plan_; }

private:
    fftw_plan plan_ = nullptr;
};

inline void transform(std::vector<cplx>& data, int sign)
{
    if (data.empty()) return;
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = Plan(fftw_plan_dft_1d(static_cast<int>(data.size()), as_fftw(data.data()),
                                     as_fftw(data.data()), sign, FFTW_ESTIMATE | FFTW_UNALIGNED));
    }
    fftw_execute(plan.get());
}

} // namespace detail

/// In-place forward DFT, X[k] = sum_n x[n] exp(-j 2 pi k n / N). Unnormalized.
inline void forward(std::vector<cplx>& data) { detail::transform(data, FFTW_FORWARD); }

/// In-place inverse DFT including the 1/N factor.
inline void inverse(std::vector<cplx>& data)
{
    detail::transform(data, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= scale;
}

inline std::vector<cplx> forward_copy(std::span<const cplx> x)
{
    std::vector<cplx> out(x.begin(), x.end());
    forward(out);
    return out;
}

inline std::vector<cplx> inverse_copy(std::span<const cplx> x)
{
    std::vector<cplx> out(x.begin(), x.end());
    inverse(out);
    return out;
}

/// Real-to-complex forward transform; returns the N/2+1 non-negative bins.
inline std::vector<cplx> forward_real(std::span<const double> x)
{
    const std::size_t n = x.size();
    std::vector<double> in(x.begin(), x.end());
    std::vector<cplx> out(n / 2 + 1);
    if (n == 0) return out;
    detail::Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = detail::Plan(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                                 detail::as_fftw(out.data()), FFTW_ESTIMATE | FFTW_UNALIGNED));
    }
    fftw_execute(plan.get());
    return out;
}

/// Complex-to-real inverse transform of the N/2+1 half spectrum, with 1/N.
inline std::vector<double> inverse_real(std::span<const cplx> half, std::size_t n)
{
    std::vector<cplx> in(half.begin(), half.end());
    std::vector<double> out(n);
    if (n == 0) return out;
    detail::Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = detail::Plan(fftw_plan_dft_c2r_1d(static_cast<int>(n), detail::as_fftw(in.data()),
                                                 out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED));
    }
    fftw_execute(plan.get());
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= scale;
    return out;
}

/// Frequency in Hz of DFT bin k for an N-point transform (negative above N/2).
inline double bin_frequency(std::size_t k, std::size_t n, double sample_rate)
{
    const auto kk = static_cast<double>(k);
    const auto nn = static_cast<double>(n);
    return (2 * k < n ? kk : kk - nn) * sample_rate / nn;
}

} // namespace combwdm::fft
