#include "scurve/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "scurve/quadrature.hpp"

namespace scurve {

namespace {
const Complex I{0.0, 1.0};

// Int_{y0}^{y1} Log(z - i y) dy with the principal log under the integral.
// The antiderivative jumps where the path z-iy crosses the negative reals;
// one downward crossing at y = Im z happens for Re z < 0.
Complex analytic_log_integral_down(Complex z, double y0, double y1) {
    auto ad = [&](double y) {
        Complex w = z - I * y;
        if (std::abs(w) < 1e-300) return Complex(0.0, 0.0);  // w log w -> 0
        return I * w * (std::log(w) - 1.0);
    };
    Complex f = ad(y1) - ad(y0);
    if (z.real() < 0.0 && z.imag() >= y0 && z.imag() < y1) f -= 2.0 * M_PI * z.real();
    return f;
}

// Int_{y0}^{y1} Log(z + i y) dy, same conventions (upward crossing at y=-Im z).
Complex analytic_log_integral_up(Complex z, double y0, double y1) {
    auto ad = [&](double y) {
        Complex w = z + I * y;
        if (std::abs(w) < 1e-300) return Complex(0.0, 0.0);  // w log w -> 0
        return -I * w * (std::log(w) - 1.0);
    };
    Complex f = ad(y1) - ad(y0);
    if (z.real() < 0.0 && -z.imag() >= y0 && -z.imag() < y1) f -= 2.0 * M_PI * z.real();
    return f;
}

// Log[(z+iA)/(z-iA)], cut exactly on the chord [-iA, iA]; one-sided values on
// the chord chosen by the side tag.
Complex ratio_log(Complex z, double a, Side side) {
    if (z.real() == 0.0 && std::abs(z.imag()) < a && side != Side::none) {
        double y = z.imag();
        double mod = std::log((a + y) / (a - y));
        return Complex(mod, side == Side::plus ? M_PI : -M_PI);
    }
    return std::log((z + I * a) / (z - I * a));
}

double dist_to_slit(Complex z, double a) {
    double dy = 0.0;
    if (z.imag() > a) dy = z.imag() - a;
    if (z.imag() < -a) dy = -a - z.imag();
    return std::hypot(z.real(), dy);
}

}  // namespace

double green_upper(Complex z, Complex eta) {
    if (eta.imag() == 0.0) return 0.0;
    if (z == eta) throw std::domain_error("green_upper: singular evaluation z == eta");
    return std::log(std::abs(z - std::conj(eta))) - std::log(std::abs(z - eta));
}

Complex rho0_wkb(Complex eta, const std::function<double(double)>& amplitude, double x_search,
                 double tol) {
    double y = eta.imag();
    if (!(y > 0.0) || std::abs(eta.real()) > 1e-12 * y)
        throw std::invalid_argument("rho0_wkb: eta must lie strictly inside (0, iA)");
    // Turning points: amplitude(x) = y on each side of the maximum at 0. The
    // returned endpoint lies inside the classically allowed region so the
    // discriminant stays nonnegative on the whole integration interval.
    auto solve_side = [&](double lo, double hi) {
        double flo = amplitude(lo) - y, fhi = amplitude(hi) - y;
        if (flo * fhi > 0.0) throw std::runtime_error("rho0_wkb: turning point bracket failed");
        for (int it = 0; it < 120 && hi - lo > 1e-16 * (1.0 + std::abs(lo) + std::abs(hi)); ++it) {
            double mid = 0.5 * (lo + hi);
            double fm = amplitude(mid) - y;
            if (flo * fm <= 0.0) {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        return amplitude(lo) >= y ? lo : hi;  // inner endpoint
    };
    (void)tol;
    double xp = solve_side(0.0, x_search);
    double xm = solve_side(-x_search, 0.0);

    Complex eta2 = eta * eta;
    auto integrand = [&](double u) {
        double x = xm + (xp - xm) * u;
        Complex s = Complex(amplitude(x) * amplitude(x), 0.0) + eta2;
        return (xp - xm) / std::sqrt(s);
    };
    Complex integral = gl_endpoint_regularized(integrand, 1e-11);
    return eta / M_PI * integral;
}

DensityModel DensityModel::constant(double slit_height) {
    DensityModel d;
    d.kind = Kind::constant_i;
    d.slit_height = slit_height;
    return d;
}

DensityModel DensityModel::sampled(const std::function<Complex(double)>& fn, double slit_height,
                                   int n_samples) {
    if (n_samples < 2) throw std::invalid_argument("DensityModel::sampled: need >= 2 samples");
    DensityModel d;
    d.kind = Kind::sampled;
    d.slit_height = slit_height;
    int n = n_samples;
    d.y_.resize(n + 1);
    d.rho_.resize(n + 1);
    d.bary_.resize(n + 1);
    for (int j = 0; j <= n; ++j) {
        d.y_[j] = 0.5 * slit_height * (1.0 - std::cos(M_PI * j / n));
        d.rho_[j] = fn(d.y_[j]);
        d.bary_[j] = (j % 2 == 0 ? 1.0 : -1.0) * ((j == 0 || j == n) ? 0.5 : 1.0);
    }
    return d;
}

DensityModel DensityModel::from_wkb(const std::function<double(double)>& amplitude,
                                    double slit_height, int n_samples) {
    return sampled(
        [&](double y) {
            // Clamp off the endpoints where the turning-point solve degenerates.
            double yy = std::min(std::max(y, 1e-6 * slit_height), slit_height * (1.0 - 1e-9));
            return rho0_wkb(Complex(0.0, yy), amplitude);
        },
        slit_height, n_samples);
}

Complex DensityModel::rho_upper(Complex z) const {
    if (kind == Kind::constant_i) return I;
    Complex yc = -I * z;  // eta = i y
    for (std::size_t j = 0; j < y_.size(); ++j)
        if (std::abs(yc - y_[j]) < 1e-14 * (1.0 + slit_height)) return rho_[j];
    Complex num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < y_.size(); ++j) {
        Complex c = bary_[j] / (yc - y_[j]);
        num += c * rho_[j];
        den += c;
    }
    return num / den;
}

Complex DensityModel::rho_ext(Complex z) const {
    if (z.imag() >= 0.0) return rho_upper(z);
    return std::conj(rho_upper(std::conj(z)));
}

void DensityModel::validate() const {
    if (slit_height <= 0.0) throw std::invalid_argument("density: slit height must be positive");
    const int n = 64;
    for (int k = 1; k <= n; ++k) {
        double y = slit_height * double(k) / n;
        Complex r = rho_upper(Complex(0.0, y));
        if (std::abs(r.real()) > 1e-8 * std::max(1.0, std::abs(r)))
            throw std::invalid_argument("density: Re rho must vanish on the slit");
        if (r.imag() <= 0.0) throw std::invalid_argument("density: Im rho must be positive on (0, iA]");
    }
    for (int k = -n; k <= n; ++k) {
        double x = 2.0 * slit_height * double(k) / n;
        if (rho_upper(Complex(x, 0.0)).imag() <= 0.0)
            throw std::invalid_argument("density: Im rho must be positive on the real axis");
    }
}

void DensityModel::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char buf[128];
    std::snprintf(buf, sizeof buf, "kind=%s A=%.17g\n",
                  kind == Kind::constant_i ? "constant_i" : "sampled", slit_height);
    out << buf;
    if (kind == Kind::sampled) {
        for (std::size_t j = 0; j < y_.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", y_[j], rho_[j].real(),
                          rho_[j].imag());
            out << buf;
        }
    }
}

DensityModel DensityModel::read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("density file: missing header");
    std::string kind_str;
    double a = 0.0;
    {
        std::istringstream ss(header);
        std::string tok;
        while (ss >> tok) {
            if (tok.rfind("kind=", 0) == 0) kind_str = tok.substr(5);
            if (tok.rfind("A=", 0) == 0) a = std::stod(tok.substr(2));
        }
    }
    if (a <= 0.0) throw std::runtime_error("density file: bad or missing A");
    if (kind_str == "constant_i") return constant(a);
    if (kind_str != "sampled") throw std::runtime_error("density file: unknown kind " + kind_str);
    std::vector<double> ys;
    std::vector<Complex> rs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double y, re, im;
        if (!(ss >> y >> re >> im)) throw std::runtime_error("density file: bad sample line");
        ys.push_back(y);
        rs.push_back(Complex(re, im));
    }
    if (ys.size() < 3) throw std::runtime_error("density file: too few samples");
    DensityModel d;
    d.kind = Kind::sampled;
    d.slit_height = a;
    d.y_ = ys;
    d.rho_ = rs;
    int n = int(ys.size()) - 1;
    d.bary_.resize(ys.size());
    for (int j = 0; j <= n; ++j)
        d.bary_[j] = (j % 2 == 0 ? 1.0 : -1.0) * ((j == 0 || j == n) ? 0.5 : 1.0);
    return d;
}

void FieldParams::validate() const {
    if (x < 0.0) throw std::invalid_argument("field params: x must be >= 0");
    if (t < 0.0) throw std::invalid_argument("field params: t must be >= 0");
}

BackgroundMeasure BackgroundMeasure::build(const DensityModel& d, int n_nodes) {
    int panels = std::max(1, n_nodes / 16);
    const auto& xs = GaussLegendre16::nodes();
    const auto& ws = GaussLegendre16::weights();
    BackgroundMeasure m;
    double h = d.slit_height / panels;
    for (int p = 0; p < panels; ++p) {
        double mid = (p + 0.5) * h, half = 0.5 * h;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            for (double y : {mid - half * xs[k], mid + half * xs[k]}) {
                m.y.push_back(y);
                m.w.push_back(ws[k] * half * d.rho_upper(Complex(0.0, y)).imag());
            }
        }
    }
    return m;
}

double BackgroundMeasure::total_mass() const {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
}

FieldModel::FieldModel(DensityModel d, FieldParams p, int mu0_nodes)
    : density(std::move(d)), params(p) {
    params.validate();
    mu0 = BackgroundMeasure::build(density, mu0_nodes);
}

Complex FieldModel::rho_path_integral(Complex z) const {
    Complex top(0.0, density.slit_height);
    if (z == top) return 0.0;
    if (density.kind == DensityModel::Kind::constant_i) return I * (top - z);
    return gl_segment_adaptive([&](Complex w) { return density.rho_upper(w); }, z, top, quad_tol);
}

double FieldModel::green_part(Complex z) const {
    double a = density.slit_height;
    if (z.imag() == 0.0) return 0.0;
    if (dist_to_slit(z, a) > 0.1 * a) {
        double s = 0.0;
        for (std::size_t k = 0; k < mu0.y.size(); ++k)
            s += mu0.w[k] * green_upper(z, Complex(0.0, mu0.y[k]));
        return s;
    }
    // Separate the log singularity: integrate (m(y)-m(y0)) G plus m(y0) times
    // the closed-form integral of G over the slit.
    double y0 = std::min(std::max(z.imag(), 0.0), a);
    double m0 = density.rho_upper(Complex(0.0, y0)).imag();
    auto f = [&](double y) {
        Complex eta(0.0, y);
        if (std::abs(z - eta) < 1e-300) return 0.0;
        return (density.rho_upper(eta).imag() - m0) * green_upper(z, eta);
    };
    double smooth = gl_adaptive(f, 0.0, a, quad_tol);
    double exact = (analytic_log_integral_up(z, 0.0, a) - analytic_log_integral_down(z, 0.0, a)).real();
    return smooth + m0 * exact;
}

double FieldModel::phi(Complex z, Side side) const {
    (void)side;  // phi is continuous across the slit
    Complex path = rho_path_integral(z);
    Complex drift = I * M_PI * path + 2.0 * I * (z * params.x + z * z * params.t);
    return -green_part(z) - drift.real();
}

double FieldModel::phi(const SlitPoint& p) const {
    if (p.at_infinity) throw std::invalid_argument("phi: not defined at infinity");
    return phi(p.value, p.side);
}

Complex FieldModel::log_moment(Complex z, Side side) const {
    double a = density.slit_height;
    auto rho_line = [&](double y) {
        return y >= 0.0 ? density.rho_upper(Complex(0.0, y))
                        : std::conj(density.rho_upper(Complex(0.0, -y)));
    };
    // Split at the density jump (y=0) and at the principal-log crossing
    // y = Im z that exists for Re z < 0.
    std::vector<double> knots = {-a, 0.0, a};
    if (z.real() < 0.0 && z.imag() > 0.0 && z.imag() < a) knots = {-a, 0.0, z.imag(), a};
    Complex base{0.0, 0.0};
    if (dist_to_slit(z, a) > 0.05 * a) {
        auto f = [&](double y) { return rho_line(y) * std::log(z - I * y); };
        for (std::size_t k = 0; k + 1 < knots.size(); ++k)
            base += gl_adaptive(f, knots[k], knots[k + 1], quad_tol);
        base *= I;
    } else {
        double y0 = std::min(std::max(z.imag(), -a), a);
        Complex r0 = rho_line(y0);
        auto f = [&](double y) -> Complex {
            Complex w = z - I * y;
            if (std::abs(w) < 1e-300) return Complex(0.0, 0.0);
            return (rho_line(y) - r0) * std::log(w);
        };
        for (std::size_t k = 0; k + 1 < knots.size(); ++k)
            base += gl_adaptive(f, knots[k], knots[k + 1], quad_tol);
        base = I * (base + r0 * analytic_log_integral_down(z, -a, a));
    }
    // Branch correction turning the per-eta principal logs into the branch cut
    // along the slit (left region / minus side picks up the winding).
    bool left = z.real() < 0.0 || (z.real() == 0.0 && side == Side::minus);
    if (left && z.imag() < a && z.imag() >= 0.0) {
        Complex corr = gl_segment_adaptive([&](Complex w) { return density.rho_upper(w); },
                                           Complex(0.0, std::max(z.imag(), 0.0)), Complex(0.0, a),
                                           quad_tol);
        // d eta = i dy already contained in the segment integral above.
        base += 2.0 * M_PI * I * corr;
    }
    return base;
}

Complex FieldModel::cauchy_moment(Complex z, Side side) const {
    double a = density.slit_height;
    auto rho_line = [&](double y) {
        return y >= 0.0 ? density.rho_upper(Complex(0.0, y))
                        : std::conj(density.rho_upper(Complex(0.0, -y)));
    };
    if (dist_to_slit(z, a) > 0.05 * a) {
        auto f = [&](double y) { return rho_line(y) / (z - I * y); };
        return I * (gl_adaptive(f, -a, 0.0, quad_tol) + gl_adaptive(f, 0.0, a, quad_tol));
    }
    double y0 = std::min(std::max(z.imag(), -a), a);
    Complex r0 = rho_line(y0);
    auto f = [&](double y) -> Complex {
        Complex w = z - I * y;
        if (std::abs(w) < 1e-300) return Complex(0.0, 0.0);
        return (rho_line(y) - r0) / w;
    };
    return I * (gl_adaptive(f, -a, 0.0, quad_tol) + gl_adaptive(f, 0.0, a, quad_tol)) +
           r0 * ratio_log(z, a, side);
}

Complex FieldModel::V(Complex z, Side side) const {
    double a = density.slit_height;
    if (z.imag() < 0.0) return -std::conj(V(std::conj(z), Side::none));
    if (z.real() == 0.0 && z.imag() > 0.0 && z.imag() < a && side == Side::none)
        throw std::domain_error("V: point on the branch segment requires a side");
    Complex path = rho_path_integral(z);
    return -log_moment(z, side) -
           (2.0 * I * params.x * z + 2.0 * I * params.t * z * z + I * M_PI * path);
}

Complex FieldModel::Vprime(Complex z, Side side) const {
    double a = density.slit_height;
    if (z.imag() < 0.0) return -std::conj(Vprime(std::conj(z), Side::none));
    if (z.real() == 0.0 && z.imag() > 0.0 && z.imag() < a && side == Side::none)
        throw std::domain_error("Vprime: point on the branch segment requires a side");
    Complex nudged = z;
    if (z.real() == 0.0 && z.imag() >= 0.0 && z.imag() < a && side != Side::none) {
        // One-sided boundary value; the subtracted Cauchy kernel handles the rest.
        nudged = z + Complex(side == Side::plus ? 1e-13 : -1e-13, 0.0) * a;
    }
    return -cauchy_moment(nudged, side) - 2.0 * I * params.x - 4.0 * I * params.t * z +
           I * M_PI * density.rho_ext(z);
}

}  // namespace scurve
