#ifndef SCURVE_QUADRATURE_HPP
#define SCURVE_QUADRATURE_HPP

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace scurve {

// 16-point Gauss-Legendre rule on [-1,1].
struct GaussLegendre16 {
    static const std::array<double, 8>& nodes();
    static const std::array<double, 8>& weights();
};

// Fixed panel rule on [a,b] with p panels of 16 points.
template <class F>
auto gl_panels(F&& f, double a, double b, int panels) -> decltype(f(0.0)) {
    using R = decltype(f(0.0));
    const auto& xs = GaussLegendre16::nodes();
    const auto& ws = GaussLegendre16::weights();
    R sum{};
    double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        double mid = a + (p + 0.5) * h, half = 0.5 * h;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            sum += R(ws[k] * half) * (f(mid - half * xs[k]) + f(mid + half * xs[k]));
        }
    }
    return sum;
}

// Doubles the panel count until two consecutive values agree to tol.
template <class F>
auto gl_adaptive(F&& f, double a, double b, double tol, int max_panels = 4096)
    -> decltype(f(0.0)) {
    auto prev = gl_panels(f, a, b, 1);
    for (int p = 2; p <= max_panels; p *= 2) {
        auto cur = gl_panels(f, a, b, p);
        if (std::abs(cur - prev) <= tol * (1.0 + std::abs(cur))) return cur;
        prev = cur;
    }
    throw std::runtime_error("gl_adaptive: quadrature did not converge");
}

// Complex line integral of f along the straight segment [za, zb].
template <class F>
std::complex<double> gl_segment(F&& f, std::complex<double> za, std::complex<double> zb,
                                int panels) {
    std::complex<double> d = zb - za;
    return d * gl_panels([&](double s) { return f(za + s * d); }, 0.0, 1.0, panels);
}

template <class F>
std::complex<double> gl_segment_adaptive(F&& f, std::complex<double> za, std::complex<double> zb,
                                         double tol, int max_panels = 2048) {
    std::complex<double> d = zb - za;
    auto g = [&](double s) { return f(za + s * d); };
    auto prev = gl_panels(g, 0.0, 1.0, 1);
    for (int p = 2; p <= max_panels; p *= 2) {
        auto cur = gl_panels(g, 0.0, 1.0, p);
        if (std::abs(cur - prev) <= tol * (1.0 + std::abs(cur))) return d * cur;
        prev = cur;
    }
    throw std::runtime_error("gl_segment_adaptive: quadrature did not converge");
}

// Integral over [0,1] with inverse-square-root endpoint behavior removed by
// the substitution s -> sin^2(pi s / 2), which makes the composition analytic
// for pure 1/sqrt endpoint singularities.
template <class F>
auto gl_endpoint_regularized(F&& f, double tol, int max_panels = 4096) -> decltype(f(0.5)) {
    auto g = [&](double s) {
        double sn = std::sin(0.5 * M_PI * s);
        double u = sn * sn;
        double du = 0.5 * M_PI * std::sin(M_PI * s);
        return f(u) * du;
    };
    return gl_adaptive(g, 0.0, 1.0, tol, max_panels);
}

}  // namespace scurve

#endif
