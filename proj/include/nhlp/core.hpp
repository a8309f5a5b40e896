#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nhlp {

// Points live in R^1 or R^2; the measure carries the dimension, unused
// coordinates stay zero so distance code is dimension-agnostic.
using Pt = std::array<double, 2>;

// hypot, not sqrt(dx^2+dy^2): coordinates range over the full double
// exponent spectrum and the squares would under/overflow
inline double eucl_dist(const Pt& a, const Pt& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

inline double sup_dist(const Pt& a, const Pt& b) {
    return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1]));
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinFit {
    double slope = 0, intercept = 0, r2 = 0;
    std::size_t count = 0;
};

// least-squares y = slope*x + intercept
inline LinFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    LinFit f;
    f.count = xs.size();
    if (xs.size() != ys.size() || xs.size() < 2) return f;
    double n = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    double den = n * sxx - sx * sx;
    if (den <= 0) return f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    double ss_tot = syy - sy * sy / n;
    double ss_res = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double e = ys[i] - (f.slope * xs[i] + f.intercept);
        ss_res += e * e;
    }
    f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

using Rng = std::mt19937_64;

inline double pow_n(double t, double n) {
    if (n == 1.0) return t;
    if (n == 2.0) return t * t;
    return std::pow(t, n);
}

}  // namespace nhlp
