#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace combwdm {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

/// OSNR/OCNR reference bandwidth (0.1 nm at 1550 nm).
inline constexpr double reference_bandwidth_hz = 12.5e9;
inline constexpr double speed_of_light = 299792458.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double lin)
{
    if (lin <= 0.0) return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(lin);
}

inline double mean_power(const cvec& x)
{
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

} // namespace combwdm
