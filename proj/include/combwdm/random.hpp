#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace combwdm {

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive hash of a seed path, e.g. derive_seed({base, channel, sweep}).
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts)
{
    std::uint64_t h = 0x6a09e667f3bcc909ULL;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

// Stream tags so that every stage of one channel draws from its own generator.
enum class Stream : std::uint64_t {
    carrier_phase = 1,
    lo_phase = 2,
    ase = 3,
    prbs = 4,
    comb_line = 5,
};

inline std::uint64_t stream_seed(std::uint64_t seed, Stream s)
{
    return derive_seed({seed, static_cast<std::uint64_t>(s)});
}

class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : engine_(seed) {}

    double operator()() { return dist_(engine_); }

    std::vector<double> real(std::size_t n, double sigma = 1.0)
    {
        std::vector<double> v(n);
        for (auto& x : v) x = sigma * dist_(engine_);
        return v;
    }

    /// Circular complex Gaussian with E|z|^2 = variance.
    std::complex<double> complex(double variance)
    {
        const double s = std::sqrt(variance / 2.0);
        const double re = dist_(engine_);
        const double im = dist_(engine_);
        return {s * re, s * im};
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

} // namespace combwdm
