#include "scurve/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "scurve/quadrature.hpp"

namespace scurve {

namespace {
const Complex I{0.0, 1.0};

// Piecewise-linear path with arclength parametrization and an optional
// smoothstep substitution regularizing inverse-square-root endpoints.
struct PathParam {
    std::vector<Complex> pts;
    std::vector<double> cum;
    double total = 0.0;

    explicit PathParam(const std::vector<Complex>& p) : pts(p) {
        cum.assign(pts.size(), 0.0);
        for (std::size_t i = 1; i < pts.size(); ++i)
            cum[i] = cum[i - 1] + std::abs(pts[i] - pts[i - 1]);
        total = cum.back();
    }
    void locate(double s, Complex& z, Complex& dz) const {
        double target = s * total;
        std::size_t k = std::size_t(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin());
        if (k == 0) k = 1;
        if (k >= pts.size()) k = pts.size() - 1;
        double len = cum[k] - cum[k - 1];
        double t = len > 0.0 ? (target - cum[k - 1]) / len : 0.0;
        z = pts[k - 1] + t * (pts[k] - pts[k - 1]);
        dz = total * (pts[k] - pts[k - 1]) / std::max(len, 1e-300);
    }
};

// Per-segment quadrature (polyline corners split the panels); the sin^2
// substitution regularizes inverse-square-root endpoint divergences on every
// segment, which is harmless where the integrand is regular.
template <class F>
Complex integrate_path(F&& f, const std::vector<Complex>& pts, bool regularized, double tol,
                       int max_panels = 4096) {
    Complex total{0.0, 0.0};
    for (std::size_t e = 0; e + 1 < pts.size(); ++e) {
        Complex a = pts[e], d = pts[e + 1] - pts[e];
        if (std::abs(d) < 1e-300) continue;
        auto g = [&](double s) -> Complex {
            double u = s, du = 1.0;
            if (regularized) {
                double sn = std::sin(0.5 * M_PI * s);
                u = sn * sn;
                du = 0.5 * M_PI * std::sin(M_PI * s);
            }
            return f(a + u * d) * d * du;
        };
        total += gl_adaptive(g, 0.0, 1.0, tol, max_panels);
    }
    return total;
}

std::vector<Complex> conj_reversed(const std::vector<Complex>& pts) {
    std::vector<Complex> out(pts.rbegin(), pts.rend());
    for (auto& z : out) z = std::conj(z);
    return out;
}

Complex left_normal(const std::vector<Complex>& arc, std::size_t i) {
    Complex t = arc[std::min(i + 1, arc.size() - 1)] - arc[i > 0 ? i - 1 : 0];
    if (std::abs(t) < 1e-300) return Complex(0.0, 1.0);
    return I * t / std::abs(t);
}

// Nearest-vertex left normal for an arbitrary point of the arc.
Complex left_normal_at(const std::vector<Complex>& arc, Complex z) {
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t i = 0; i < arc.size(); ++i) {
        double d = std::abs(arc[i] - z);
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return left_normal(arc, best);
}

bool segments_intersect(Complex a, Complex b, Complex c, Complex d) {
    auto cross = [](Complex u, Complex v) { return u.real() * v.imag() - u.imag() * v.real(); };
    double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

}  // namespace

Complex g_function(Complex lambda, const SignedSupport& mu) {
    Complex g{0.0, 0.0};
    for (std::size_t k = 0; k < mu.size(); ++k) {
        Complex u = mu.nodes[k];
        Complex num = lambda - u, den = lambda - std::conj(u);
        if (std::abs(num) < 1e-300 || std::abs(den) < 1e-300)
            throw std::domain_error("g_function: evaluation on the support; use offset values");
        g += mu.weights[Eigen::Index(k)] * std::log(num / den);
    }
    return g;
}

BandGapPartition theta_phi_on_contour(const Contour& c, const EquilibriumSolution& sol,
                                      const FieldModel& f, double tol) {
    const std::size_t n = c.size();
    // Deduplicate the two slit sides and keep contour order of first sight.
    std::vector<Complex> vals;
    std::vector<bool> supp;
    std::vector<Side> sides;
    std::vector<bool> mask = sol.support_mask;
    // Close one-node dropouts in the mask (discretization noise).
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (!mask[i] && mask[i - 1] && mask[i + 1]) mask[i] = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (c[i].at_infinity) continue;
        Complex z = c[i].value;
        bool dup = false;
        for (std::size_t j = 0; j < vals.size(); ++j) {
            if (vals[j] == z) {
                dup = true;
                if (mask[i]) supp[j] = true;
                break;
            }
        }
        if (dup) continue;
        vals.push_back(z);
        supp.push_back(mask[i]);
        sides.push_back(c[i].side);
    }

    BandGapPartition part;
    // Split into bands (maximal support runs, skipping the endpoints at 0).
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t i = 0;
    while (i < vals.size()) {
        if (!supp[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < vals.size() && supp[j + 1]) ++j;
        runs.push_back({i, j});
        i = j + 1;
    }
    if (runs.empty()) throw std::runtime_error("theta_phi_on_contour: empty support");

    double spacing = c.mean_spacing();
    for (std::size_t r = 0; r < runs.size(); ++r) {
        std::vector<Complex> arc(vals.begin() + long(runs[r].first),
                                 vals.begin() + long(runs[r].second) + 1);
        if (r == 0 && std::abs(arc.front()) < 3.0 * spacing && std::abs(arc.front()) > 0.0)
            arc.insert(arc.begin(), Complex(0.0, 0.0));
        part.bands.push_back(arc);
        if (r > 0) {
            std::vector<Complex> gap(vals.begin() + long(runs[r - 1].second),
                                     vals.begin() + long(runs[r].first) + 1);
            part.gaps.push_back(gap);
        }
    }
    part.genus = 2 * (int(part.bands.size()) - 1);
    part.endpoints.push_back(part.bands[0].back());
    for (std::size_t r = 1; r < part.bands.size(); ++r) {
        part.endpoints.push_back(part.bands[r].front());
        part.endpoints.push_back(part.bands[r].back());
    }

    SignedSupport mu = SignedSupport::from_measure(sol.measure);
    double eps = 2.0 * spacing;
    // One-sided values carry an O(eps) kink term from the density; Richardson
    // over eps and 2 eps removes it.
    auto one_sided = [&](Complex z, Complex nrm) {
        Complex g1p = g_function(z + eps * nrm, mu), g1m = g_function(z - eps * nrm, mu);
        Complex g2p = g_function(z + 2.0 * eps * nrm, mu), g2m = g_function(z - 2.0 * eps * nrm, mu);
        return std::pair(2.0 * g1p - g2p, 2.0 * g1m - g2m);
    };
    auto theta_at = [&](Complex z, Complex nrm) {
        auto [gp, gm] = one_sided(z, nrm);
        return I * (gp - gm);
    };
    auto phi_at = [&](Complex z, Complex nrm, Side side) {
        auto [gp, gm] = one_sided(z, nrm);
        Side vside = side;
        if (z.real() == 0.0 && z.imag() > 0.0 && z.imag() < f.slit_height() && vside == Side::none)
            vside = Side::plus;
        return I * (gp + gm - 2.0 * f.V(z, vside));
    };

    double scale = std::max(1e-3, 2.0 * M_PI * mu.total_mass());
    // The offset evaluations are meaningful only when the stencil stays clear
    // of the arc ends (same validity rule as the normal-derivative checks).
    auto stencil_ok = [&](const std::vector<Complex>& arc, Complex z) {
        return std::abs(z - arc.front()) >= 3.0 * eps && std::abs(z - arc.back()) >= 3.0 * eps;
    };
    // Gap constants.
    for (std::size_t gidx = 0; gidx < part.gaps.size(); ++gidx) {
        const auto& gap = part.gaps[gidx];
        std::vector<double> th;
        double imdef = 0.0;
        for (std::size_t k = 1; k + 1 < gap.size(); ++k) {
            if (!stencil_ok(gap, gap[k])) continue;
            Complex v = theta_at(gap[k], left_normal(gap, k));
            th.push_back(v.real());
            imdef = std::max(imdef, std::abs(v.imag()));
        }
        if (th.empty()) {
            Complex mid = 0.5 * (gap.front() + gap.back());
            Complex v = theta_at(mid, left_normal_at(gap, mid));
            th.push_back(v.real());
        }
        std::sort(th.begin(), th.end());
        double med = th[th.size() / 2];
        part.theta.push_back(med);
        for (double v : th) part.theta_deviation = std::max(part.theta_deviation, std::abs(v - med));
        part.reality_defect = std::max(part.reality_defect, imdef);
        scale = std::max(scale, std::abs(med));
    }
    // Band constants.
    for (std::size_t bidx = 0; bidx < part.bands.size(); ++bidx) {
        const auto& band = part.bands[bidx];
        std::vector<double> ph;
        double imdef = 0.0;
        for (std::size_t k = 1; k + 1 < band.size(); ++k) {
            if (!stencil_ok(band, band[k])) continue;
            Side side = Side::none;
            for (std::size_t q = 0; q < vals.size(); ++q)
                if (vals[q] == band[k]) side = sides[q];
            Complex v = phi_at(band[k], left_normal(band, k), side);
            ph.push_back(v.real());
            imdef = std::max(imdef, std::abs(v.imag()));
        }
        if (ph.empty()) ph.push_back(0.0);
        std::sort(ph.begin(), ph.end());
        double med = ph[ph.size() / 2];
        part.alpha.push_back(med);
        for (double v : ph) part.alpha_deviation = std::max(part.alpha_deviation, std::abs(v - med));
        part.reality_defect = std::max(part.reality_defect, imdef);
        scale = std::max(scale, std::abs(med));
    }
    if (part.theta_deviation > tol * scale || part.alpha_deviation > tol * scale)
        throw std::runtime_error("theta_phi_on_contour: constancy violated (non-converged S-curve)");
    return part;
}

std::vector<std::array<Complex, 2>> SurfaceCuts::chain() const {
    auto order = [](std::array<Complex, 2> c) {
        if (c[0].imag() > c[1].imag() ||
            (c[0].imag() == c[1].imag() && c[0].real() > c[1].real()))
            std::swap(c[0], c[1]);
        return c;
    };
    std::vector<std::array<Complex, 2>> all;
    for (const auto& u : upper) {
        all.push_back(order({std::conj(u[1]), std::conj(u[0])}));
        all.push_back(order(u));
    }
    if (central) all.push_back(order(*central));
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return 0.5 * (a[0].imag() + a[1].imag()) < 0.5 * (b[0].imag() + b[1].imag());
    });
    return all;
}

SurfaceCuts cuts_from_partition(const BandGapPartition& part) {
    SurfaceCuts sc;
    if (part.endpoints.empty()) throw std::invalid_argument("cuts: no endpoints");
    Complex l0 = part.endpoints[0];
    sc.central = std::array<Complex, 2>{std::conj(l0), l0};
    for (std::size_t j = 1; j + 1 < part.endpoints.size(); j += 2)
        sc.upper.push_back({part.endpoints[j], part.endpoints[j + 1]});
    return sc;
}

namespace {

Complex two_point_factor(Complex z, Complex e1, Complex e2) {
    Complex m = 0.5 * (e1 + e2), h = 0.5 * (e2 - e1);
    Complex w = (z - m) / h;
    return h * std::sqrt(w - 1.0) * std::sqrt(w + 1.0);
}

}  // namespace

Complex R_lambda(Complex z, const SurfaceCuts& cuts) {
    Complex r{-1.0, 0.0};
    if (cuts.central) r *= two_point_factor(z, (*cuts.central)[0], (*cuts.central)[1]);
    for (const auto& u : cuts.upper) {
        r *= two_point_factor(z, u[0], u[1]);
        r *= std::conj(two_point_factor(std::conj(z), u[0], u[1]));
    }
    return r;
}

namespace {

// One-sided R on an arc (left side of the arc's orientation).
Complex R_plus(Complex eta, const std::vector<Complex>& arc, const SurfaceCuts& cuts,
               double delta) {
    Complex nrm = left_normal_at(arc, eta);
    return R_lambda(eta + delta * nrm, cuts);
}

}  // namespace

Complex k_lambda(Complex z, const BandGapPartition& part, const SurfaceCuts& cuts, double tol) {
    double scale = 0.0;
    for (Complex e : part.endpoints) scale = std::max(scale, std::abs(e));
    double delta = 1e-7 * std::max(scale, 1.0);

    Complex sum{0.0, 0.0};
    auto add_pair = [&](const std::vector<Complex>& arc, double constant, bool one_sided) {
        auto kern = [&](Complex zz) {
            return integrate_path(
                [&](Complex eta) {
                    Complex r = one_sided ? R_plus(eta, arc, cuts, delta) : R_lambda(eta, cuts);
                    return 1.0 / ((zz - eta) * r);
                },
                arc, true, tol);
        };
        Complex up = kern(z);
        Complex lo = -std::conj(kern(std::conj(z)));  // mirror arc, matching orientation
        sum += constant * (up + lo);
    };
    for (std::size_t n = 0; n < part.gaps.size(); ++n) add_pair(part.gaps[n], part.theta[n], false);
    for (std::size_t n = 0; n < part.bands.size(); ++n) add_pair(part.bands[n], part.alpha[n], true);
    return sum / (2.0 * M_PI * I);
}

Complex H_lambda(Complex z, const BandGapPartition& part, const SurfaceCuts& cuts, double tol) {
    return k_lambda(z, part, cuts, tol) * R_lambda(z, cuts);
}

namespace {

// r-series of R(lambda) = -lambda^{G+1} (1 + r_1/lambda + ...) from the power
// sums of the branch points.
std::vector<Complex> r_series(const SurfaceCuts& cuts, int order) {
    std::vector<Complex> roots;
    if (cuts.central) {
        roots.push_back((*cuts.central)[0]);
        roots.push_back((*cuts.central)[1]);
    }
    for (const auto& u : cuts.upper) {
        roots.push_back(u[0]);
        roots.push_back(u[1]);
        roots.push_back(std::conj(u[0]));
        roots.push_back(std::conj(u[1]));
    }
    std::vector<Complex> cm(std::size_t(order) + 1, Complex(0.0, 0.0));
    for (int m = 1; m <= order; ++m) {
        Complex p{0.0, 0.0};
        for (Complex e : roots) p += std::pow(e, m);
        cm[std::size_t(m)] = -p / (2.0 * double(m));
    }
    std::vector<Complex> r(std::size_t(order) + 1, Complex(0.0, 0.0));
    r[0] = 1.0;
    for (int i = 1; i <= order; ++i) {
        Complex acc{0.0, 0.0};
        for (int m = 1; m <= i; ++m) acc += double(m) * cm[std::size_t(m)] * r[std::size_t(i - m)];
        r[std::size_t(i)] = acc / double(i);
    }
    return r;
}

}  // namespace

std::vector<Complex> p_polynomial(const BandGapPartition& part, const SurfaceCuts& cuts,
                                  double tol) {
    int G = cuts.genus();
    double delta = 1e-7;
    for (Complex e : part.endpoints) delta = std::max(delta, 1e-7 * std::abs(e));

    // kappa_m = (1/2pi i) * sum over arcs of constant * int eta^m / R.
    std::vector<Complex> kappa(std::size_t(G) + 1, Complex(0.0, 0.0));
    auto add_moments = [&](const std::vector<Complex>& arc, double constant, bool one_sided) {
        for (int m = 0; m <= G; ++m) {
            Complex up = integrate_path(
                [&](Complex eta) {
                    Complex r = one_sided ? R_plus(eta, arc, cuts, delta) : R_lambda(eta, cuts);
                    return std::pow(eta, m) / r;
                },
                arc, true, tol);
            kappa[std::size_t(m)] += constant * (up - std::conj(up)) / (2.0 * M_PI * I);
        }
    };
    for (std::size_t n = 0; n < part.gaps.size(); ++n) add_moments(part.gaps[n], part.theta[n], false);
    for (std::size_t n = 0; n < part.bands.size(); ++n) add_moments(part.bands[n], part.alpha[n], true);

    std::vector<Complex> r = r_series(cuts, G + 1);
    // H_j = -sum_{m+i=G-j} kappa_m r_i (coefficients of lambda^j).
    std::vector<Complex> p(std::size_t(G) + 1, Complex(0.0, 0.0));
    for (int j = 0; j <= G; ++j) {
        Complex acc{0.0, 0.0};
        for (int m = 0; m <= G - j; ++m) acc += kappa[std::size_t(m)] * r[std::size_t(G - j - m)];
        p[std::size_t(j)] = -acc;
    }
    return p;
}

SurfaceData build_surface(const SurfaceCuts& cuts) {
    SurfaceData sd;
    sd.cuts = cuts;
    auto chain = cuts.chain();
    int G = cuts.genus();
    if (G < 1) {
        sd.base_point = chain.empty() ? Complex(0.0, 1.0) : chain.back()[1];
        return sd;
    }
    if (int(chain.size()) != G + 1) throw std::invalid_argument("build_surface: bad cut count");

    // a_k: rectangle around the lowest k cuts; b_k: branch-point pair joining
    // cut k to cut k+1.
    for (int k = 1; k <= G; ++k) {
        double lo = 1e300, hi = -1e300, left = 1e300, right = -1e300;
        for (int j = 0; j < k; ++j) {
            for (Complex e : {chain[std::size_t(j)][0], chain[std::size_t(j)][1]}) {
                lo = std::min(lo, e.imag());
                hi = std::max(hi, e.imag());
                left = std::min(left, e.real());
                right = std::max(right, e.real());
            }
        }
        double next_lo = std::min(chain[std::size_t(k)][0].imag(), chain[std::size_t(k)][1].imag());
        double gap = next_lo - hi;
        if (gap <= 0.0) throw std::invalid_argument("build_surface: overlapping cuts in the chain");
        double m = 0.45 * gap;
        double mh = std::max(m, 0.15 * (right - left + hi - lo + m));
        // Clockwise orientation pairs with the chosen b-cycles so that the
        // period matrix comes out with a negative-definite real part.
        std::vector<Complex> rect = {
            Complex(left - mh, lo - m), Complex(left - mh, hi + m), Complex(right + mh, hi + m),
            Complex(right + mh, lo - m), Complex(left - mh, lo - m)};
        sd.a_loops.push_back(rect);
        // Join the closest branch points of consecutive cuts (keeps the path
        // mirror-symmetric for conjugate-symmetric configurations).
        Complex from = chain[std::size_t(k - 1)][0], to = chain[std::size_t(k)][0];
        double best = 1e300;
        for (Complex e1 : {chain[std::size_t(k - 1)][0], chain[std::size_t(k - 1)][1]})
            for (Complex e2 : {chain[std::size_t(k)][0], chain[std::size_t(k)][1]}) {
                double d = std::abs(e1 - e2);
                if (d < best) {
                    best = d;
                    from = e1;
                    to = e2;
                }
            }
        sd.b_pairs.push_back({from, to});
    }
    sd.base_point = chain.back()[1];
    return sd;
}

Complex SurfaceData::nu(Complex z, int sheet, int k) const {
    Complex num{0.0, 0.0};
    for (int m = 0; m < genus(); ++m) num += coeff(k, m) * std::pow(z, m);
    Complex r = R(z);
    return sheet == 1 ? num / r : -num / r;
}

namespace {

std::vector<Complex> routed_path(Complex from, Complex to, const SurfaceCuts& cuts) {
    auto chain = cuts.chain();
    auto blocked = [&](Complex a, Complex b) {
        for (const auto& cut : chain) {
            // Skip cuts sharing an endpoint with the segment.
            if (std::abs(cut[0] - a) < 1e-12 || std::abs(cut[1] - a) < 1e-12 ||
                std::abs(cut[0] - b) < 1e-12 || std::abs(cut[1] - b) < 1e-12)
                continue;
            if (segments_intersect(a, b, cut[0], cut[1])) return true;
        }
        return false;
    };
    if (!blocked(from, to)) return {from, to};
    // Detour to the right of the cut system.
    double right = 0.0, scale = 1.0;
    for (const auto& cut : chain)
        for (Complex e : {cut[0], cut[1]}) {
            right = std::max(right, e.real());
            scale = std::max(scale, std::abs(e));
        }
    for (double margin : {0.5 * scale, scale}) {
        Complex way(right + margin, 0.5 * (from.imag() + to.imag()));
        if (!blocked(from, way) && !blocked(way, to)) return {from, way, to};
        // Two-leg detour: sideways, vertical drop outside the chain, back in.
        Complex w1(right + margin, from.imag());
        Complex w2(right + margin, to.imag());
        if (!blocked(from, w1) && !blocked(w1, w2) && !blocked(w2, to)) return {from, w1, w2, to};
    }
    throw std::runtime_error("routed_path: could not avoid the cut system");
}

}  // namespace

void holomorphic_differentials(SurfaceData& sd) {
    int G = sd.genus();
    if (G < 1) return;
    Eigen::MatrixXcd A(G, G);
    for (int j = 0; j < G; ++j) {
        for (int m = 0; m < G; ++m) {
            A(j, m) = integrate_path(
                [&](Complex z) { return std::pow(z, m) / R_lambda(z, sd.cuts); },
                sd.a_loops[std::size_t(j)], false, sd.quad_tol);
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
    double smin = svd.singularValues().minCoeff();
    if (smin <= 0.0) throw std::runtime_error("holomorphic_differentials: singular cycle matrix");
    sd.condition = svd.singularValues().maxCoeff() / smin;
    sd.coeff = 2.0 * M_PI * I * A.transpose().inverse();
}

void period_matrix(SurfaceData& sd, double sym_tol) {
    int G = sd.genus();
    if (G < 1) {
        sd.period.resize(0, 0);
        return;
    }
    Eigen::MatrixXcd B(G, G);
    for (int j = 0; j < G; ++j) {
        auto pts = routed_path(sd.b_pairs[std::size_t(j)][0], sd.b_pairs[std::size_t(j)][1], sd.cuts);
        for (int m = 0; m < G; ++m) {
            B(j, m) = 2.0 * integrate_path(
                                [&](Complex z) { return std::pow(z, m) / R_lambda(z, sd.cuts); },
                                pts, true, sd.quad_tol);
        }
    }
    Eigen::MatrixXcd H(G, G);
    for (int j = 0; j < G; ++j)
        for (int k = 0; k < G; ++k) {
            Complex acc{0.0, 0.0};
            for (int m = 0; m < G; ++m) acc += sd.coeff(k, m) * B(j, m);
            H(j, k) = acc;
        }
    double scale = H.cwiseAbs().maxCoeff();
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > sym_tol * std::max(scale, 1.0))
        throw std::runtime_error("period_matrix: symmetry violated; cycle paths inconsistent");
    Eigen::MatrixXd reH = H.real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (reH + reH.transpose()));
    if (es.eigenvalues().maxCoeff() > 0.0) {
        // Opposite a-orientation: negate every differential (and hence H) and
        // reverse the stored loops so later quadratures stay consistent.
        sd.coeff *= -1.0;
        H *= -1.0;
        for (auto& loop : sd.a_loops) std::reverse(loop.begin(), loop.end());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(
            0.5 * (H.real() + H.real().transpose()));
        if (es2.eigenvalues().maxCoeff() > 0.0)
            throw std::runtime_error("period_matrix: Re H not negative definite");
    }
    sd.period = H;
}

Complex theta_sum(const Eigen::VectorXcd& w, const Eigen::MatrixXcd& H, double tail) {
    int G = int(H.rows());
    if (G == 0) return Complex(1.0, 0.0);
    Eigen::MatrixXd reH = -H.real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (reH + reH.transpose()));
    double lmin = es.eigenvalues().minCoeff();
    if (lmin <= 0.0) throw std::invalid_argument("theta_sum: Re H must be negative definite");
    double wnorm = w.real().norm();
    double logtail = std::log(tail);
    double N = (wnorm + std::sqrt(wnorm * wnorm - 2.0 * lmin * logtail)) / lmin;
    int radius = std::min(int(std::ceil(N)) + 1, 96);

    Eigen::VectorXi n(G);
    n.setConstant(-radius);
    Complex sum{0.0, 0.0};
    for (;;) {
        Complex quad{0.0, 0.0}, lin{0.0, 0.0};
        for (int a = 0; a < G; ++a) {
            lin += double(n[a]) * w[a];
            for (int b = 0; b < G; ++b) quad += 0.5 * double(n[a]) * H(a, b) * double(n[b]);
        }
        sum += std::exp(quad + lin);
        int d = 0;
        while (d < G) {
            if (n[d] < radius) {
                ++n[d];
                break;
            }
            n[d] = -radius;
            ++d;
        }
        if (d == G) break;
    }
    return sum;
}

namespace {

Complex nu_along(const SurfaceData& sd, int k, const std::vector<Complex>& pts, bool reg,
                 double tol) {
    return integrate_path([&](Complex z) { return sd.nu(z, 1, k); }, pts, reg, tol);
}

bool is_branch_point(const SurfaceData& sd, Complex z) {
    for (const auto& cut : sd.cuts.chain())
        for (Complex e : {cut[0], cut[1]})
            if (std::abs(e - z) < 1e-12 * (1.0 + std::abs(e))) return true;
    return false;
}

}  // namespace

Eigen::VectorXcd abel_map(Complex P, int sheet, const SurfaceData& sd) {
    if (sheet != 1) throw std::invalid_argument("abel_map: only sheet 1 paths are supported");
    int G = sd.genus();
    Eigen::VectorXcd A(G);
    if (G == 0) return A;
    auto pts = routed_path(sd.base_point, P, sd.cuts);
    bool reg = true;  // base point is a branch point; smoothstep regularizes both ends
    for (int k = 0; k < G; ++k) A[k] = nu_along(sd, k, pts, reg, sd.quad_tol);
    return A;
}

Eigen::VectorXcd abel_map_infinity(const SurfaceData& sd) {
    int G = sd.genus();
    Eigen::VectorXcd A(G);
    if (G == 0) return A;
    double scale = 1.0;
    for (const auto& cut : sd.cuts.chain())
        for (Complex e : {cut[0], cut[1]}) scale = std::max(scale, std::abs(e));
    double Rfar = 400.0 * scale;
    Complex far(0.3 * scale, Rfar);  // slight tilt keeps the ray off the cut chords
    auto pts = routed_path(sd.base_point, far, sd.cuts);
    std::vector<Complex> r = r_series(sd.cuts, 3);
    for (int k = 0; k < G; ++k) {
        Complex val = nu_along(sd, k, pts, true, sd.quad_tol);
        // Analytic tail of nu ~ -sum_m c_{km} lambda^{m-G-1} (1 + r1/l + r2/l^2).
        for (int m = 0; m < G; ++m) {
            for (int i = 0; i <= 2; ++i) {
                double p = double(m - G - 1 - i);
                // int_R^inf lambda^p dlambda along the ray, p <= -2
                Complex tail = -sd.coeff(k, m) * r[std::size_t(i)] *
                               (-std::pow(far, p + 1.0) / (p + 1.0));
                val += tail;
            }
        }
        A[k] = val;
    }
    return A;
}

Eigen::VectorXcd riemann_constant(const SurfaceData& sd, int loop_samples) {
    int G = sd.genus();
    Eigen::VectorXcd K(G);
    for (int k = 0; k < G; ++k) K[k] = I * M_PI + 0.5 * sd.period(k, k);
    if (G <= 1) return K;

    for (int k = 0; k < G; ++k) {
        Complex corr{0.0, 0.0};
        for (int j = 0; j < G; ++j) {
            if (j == k) continue;
            const auto& loop = sd.a_loops[std::size_t(j)];
            PathParam path(loop);
            Complex anchor = loop.front();
            Eigen::VectorXcd A0 = abel_map(anchor, 1, sd);
            // Trapezoid walk: inner integral accumulates nu_k, outer nu_j * inner.
            int M = loop_samples;
            Complex inner = A0[k];
            Complex acc{0.0, 0.0};
            Complex zprev, dzprev;
            path.locate(0.0, zprev, dzprev);
            Complex fj_prev = sd.nu(zprev, 1, j), fk_prev = sd.nu(zprev, 1, k);
            for (int s = 1; s <= M; ++s) {
                Complex z, dz;
                path.locate(double(s) / M, z, dz);
                Complex fj = sd.nu(z, 1, j), fk = sd.nu(z, 1, k);
                Complex dzeta = z - zprev;
                Complex inner_new = inner + 0.5 * (fk + fk_prev) * dzeta;
                acc += 0.5 * (fj * inner_new + fj_prev * inner) * dzeta;
                inner = inner_new;
                zprev = z;
                fj_prev = fj;
                fk_prev = fk;
            }
            corr += acc;
        }
        K[k] -= corr / (2.0 * M_PI * I);
    }
    return K;
}

Eigen::VectorXcd omega_b_periods(const SurfaceData& sd, const std::vector<Complex>& p,
                                 std::vector<Complex>* f_coeffs, Eigen::VectorXcd* a_residuals) {
    int G = sd.genus();
    Eigen::VectorXcd U(G);
    U.setZero();
    bool zero = true;
    for (Complex c : p)
        if (std::abs(c) > 0.0) zero = false;
    if (zero || G == 0) {
        if (f_coeffs) f_coeffs->assign(p.size() * 2, Complex(0.0, 0.0));
        if (a_residuals) {
            a_residuals->resize(G);
            a_residuals->setZero();
        }
        return U;
    }

    // f = polynomial part of p'(lambda) * (-R-series), residue at infinity
    // killed through the lambda^G coefficient; Omega_0 = (f / R_X) dlambda.
    std::vector<Complex> r = r_series(sd.cuts, 2 * G + 4);
    std::vector<Complex> q(std::size_t(std::max(G, 1)), Complex(0.0, 0.0));  // p' coefficients
    for (int j = 1; j < int(p.size()); ++j) q[std::size_t(j - 1)] = double(j) * p[std::size_t(j)];
    // Laurent coefficients of p' * S where S = sum_i r_i lambda^{G+1-i}.
    std::map<int, Complex> laurent;
    for (int j = 0; j < int(q.size()); ++j)
        for (int i = 0; i < int(r.size()); ++i)
            laurent[j + G + 1 - i] += q[std::size_t(j)] * r[std::size_t(i)];
    std::vector<Complex> f(std::size_t(2 * G + 1), Complex(0.0, 0.0));
    for (int pw = 0; pw <= 2 * G; ++pw)
        if (laurent.count(pw)) f[std::size_t(pw)] = -laurent[pw];
    // Residue of f/R at infinity: -sum_{p>=G} f_p rtilde_{p-G}; rtilde = 1/r.
    std::vector<Complex> rt(r.size(), Complex(0.0, 0.0));
    rt[0] = 1.0;
    for (int i = 1; i < int(rt.size()); ++i) {
        Complex acc{0.0, 0.0};
        for (int j = 1; j <= i; ++j) acc += r[std::size_t(j)] * rt[std::size_t(i - j)];
        rt[std::size_t(i)] = -acc;
    }
    Complex res{0.0, 0.0};
    for (int pw = G; pw <= 2 * G; ++pw) {
        if (pw == G) continue;  // f_G set below
        res += -f[std::size_t(pw)] * rt[std::size_t(pw - G)];
    }
    f[std::size_t(G)] = res;  // makes the total residue vanish
    if (f_coeffs) *f_coeffs = f;

    auto omega0 = [&](Complex z) {
        Complex num{0.0, 0.0};
        for (int pw = 0; pw <= 2 * G; ++pw) num += f[std::size_t(pw)] * std::pow(z, pw);
        return num / R_lambda(z, sd.cuts);
    };

    // a-normalization.
    Eigen::VectorXcd d(G);
    for (int j = 0; j < G; ++j)
        d[j] = integrate_path(omega0, sd.a_loops[std::size_t(j)], false, sd.quad_tol) /
               (2.0 * M_PI * I);
    // b-periods of Omega0, minus the holomorphic correction.
    for (int j = 0; j < G; ++j) {
        auto pts = routed_path(sd.b_pairs[std::size_t(j)][0], sd.b_pairs[std::size_t(j)][1], sd.cuts);
        Complex b0 = 2.0 * integrate_path(omega0, pts, true, sd.quad_tol);
        Complex corr{0.0, 0.0};
        for (int k = 0; k < G; ++k) corr += d[k] * sd.period(j, k);
        U[j] = b0 - corr;
    }
    if (a_residuals) {
        a_residuals->resize(G);
        for (int j = 0; j < G; ++j) {
            // Independent re-quadrature of the normalized differential.
            auto fn = [&](Complex z) {
                Complex v = omega0(z);
                for (int k = 0; k < G; ++k) v -= d[k] * sd.nu(z, 1, k);
                return v;
            };
            (*a_residuals)[j] =
                integrate_path(fn, sd.a_loops[std::size_t(j)], false, 0.25 * sd.quad_tol, 8192);
        }
    }
    return U;
}

Complex assemble_psi(const ThetaParams& tp, double xhat, double that) {
    Complex phase = std::exp(I * tp.U0 / tp.hbar) * std::exp(I * (tp.k0 * xhat - tp.w0 * that));
    if (tp.genus == 0) return tp.amplitude * phase;
    Eigen::VectorXcd drift = I * tp.U / tp.hbar + I * (tp.kvec * xhat - tp.wvec * that);
    Complex num = theta_sum(tp.Y + drift, tp.period);
    Complex den = theta_sum(tp.Z + drift, tp.period);
    if (std::abs(den) < 1e-12)
        throw std::runtime_error("assemble_psi: denominator theta vanished");
    return tp.amplitude * phase * num / den;
}

ReconstructionResult reconstruct(const Contour& c, const EquilibriumSolution& sol,
                                 const FieldModel& f, double hbar, const StateProvider& provider,
                                 double x0, double t0, double fd_step) {
    ReconstructionResult res;
    res.partition = theta_phi_on_contour(c, sol, f);
    int G = res.partition.genus;
    ThetaParams tp;
    tp.genus = G;
    tp.hbar = hbar;

    auto at = [&](double x, double t) { return provider(std::max(x, 0.0), std::max(t, 0.0)); };
    auto base = at(x0, t0);
    tp.U0 = base.first;

    // Wavenumbers / frequencies by Richardson finite differences; one-sided at
    // the domain corner x=0 or t=0.
    auto fd = [&](auto&& getter, double v0, bool is_x) {
        auto g = [&](double v) {
            auto s = is_x ? at(v, t0) : at(x0, v);
            return getter(s);
        };
        double d = fd_step;
        if (v0 >= d) {
            auto cd = [&](double dd) { return (g(v0 + dd) - g(v0 - dd)) / (2.0 * dd); };
            return (4.0 * cd(0.5 * d) - cd(d)) / 3.0;
        }
        auto osd = [&](double dd) { return (g(v0 + dd) - g(v0)) / dd; };
        return 2.0 * osd(0.5 * d) - osd(d);
    };
    auto get_u0 = [](const std::pair<double, Eigen::VectorXd>& s) { return s.first; };
    tp.k0 = fd(get_u0, x0, true);
    tp.w0 = -fd(get_u0, t0, false);

    if (G >= 1) {
        SurfaceCuts cuts = cuts_from_partition(res.partition);
        SurfaceData sd = build_surface(cuts);
        holomorphic_differentials(sd);
        period_matrix(sd);
        auto p = p_polynomial(res.partition, cuts);
        tp.U = omega_b_periods(sd, p);
        tp.period = sd.period;

        tp.kvec.resize(G);
        tp.wvec.resize(G);
        for (int n = 0; n < G; ++n) {
            auto get_un = [n](const std::pair<double, Eigen::VectorXd>& s) {
                return n < s.second.size() ? s.second[n] : 0.0;
            };
            tp.kvec[n] = fd(get_un, x0, true);
            tp.wvec[n] = -fd(get_un, t0, false);
        }

        Eigen::VectorXcd Ainf = abel_map_infinity(sd);
        Eigen::VectorXcd sum(G);
        sum.setZero();
        for (int j = 1; j <= G; ++j) {
            Complex pt = res.partition.endpoints[std::size_t(j)];
            if (j % 2 == 1) pt = std::conj(pt);
            sum += abel_map(pt, 1, sd);
        }
        tp.V1.resize(G);
        tp.V2.resize(G);
        for (int k = 0; k < G; ++k) {
            Complex base_k = sum[k] + I * M_PI + 0.5 * sd.period(k, k);
            tp.V1[k] = base_k + Ainf[k];
            tp.V2[k] = base_k - Ainf[k];
        }
        tp.Y = -Ainf - tp.V1;
        tp.Z = Ainf - tp.V1;
        res.surface = std::move(sd);
    }

    double alt = 0.0;
    for (std::size_t k = 0; k < res.partition.endpoints.size(); ++k)
        alt += (k % 2 == 0 ? 1.0 : -1.0) * res.partition.endpoints[k].imag();
    if (G == 0) {
        tp.amplitude = alt;
    } else {
        tp.amplitude = theta_sum(tp.Z, tp.period) / theta_sum(tp.Y, tp.period) * alt;
    }
    res.params = tp;
    return res;
}

}  // namespace scurve
