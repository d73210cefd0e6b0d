#include "scurve/maxmin.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace scurve {

namespace {
const Complex I{0.0, 1.0};

double self_log_energy(double h) { return 1.5 - std::log(h); }

bool crosses_slit(Complex a, Complex b, double A) {
    // Straight segment against the open slit {Re=0, 0<Im<A}.
    if ((a.real() > 0.0 && b.real() > 0.0) || (a.real() < 0.0 && b.real() < 0.0)) return false;
    double dr = b.real() - a.real();
    if (std::abs(dr) < 1e-300) return a.real() == 0.0;
    double t = -a.real() / dr;
    if (t < 0.0 || t > 1.0) return false;
    double y = a.imag() + t * (b.imag() - a.imag());
    return y > 0.0 && y < A;
}

}  // namespace

SignedSupport SignedSupport::from_measure(const DiscreteMeasure& mu, double mass_tol,
                                          bool aggregate) {
    SignedSupport s;
    const auto& nodes = mu.host.nodes;
    std::vector<double> w;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (mu.weights[Eigen::Index(k)] <= mass_tol) continue;
        if (nodes[k].at_infinity) throw std::invalid_argument("signed support: mass at infinity");
        Complex u = nodes[k].value;
        if (u.imag() <= 0.0) continue;  // endpoint cells carry no mass
        if (aggregate) {
            bool merged = false;
            for (std::size_t j = 0; j < s.nodes.size(); ++j) {
                if (s.nodes[j] == u) {
                    w[j] += mu.weights[Eigen::Index(k)];
                    s.cell[j] += mu.host.cell_length(k);
                    s.averaged[j] = true;
                    merged = true;
                    break;
                }
            }
            if (merged) continue;
        }
        s.nodes.push_back(u);
        w.push_back(mu.weights[Eigen::Index(k)]);
        s.cell.push_back(std::max(mu.host.cell_length(k), 1e-12));
        s.sides.push_back(nodes[k].side);
        s.averaged.push_back(false);
        s.orig.push_back(int(k));
    }
    s.weights = Eigen::Map<Eigen::VectorXd>(w.data(), Eigen::Index(w.size()));
    return s;
}

Complex SignedSupport::vprime_at(const FieldModel& f, std::size_t k) const {
    Complex u = nodes[k];
    // V' is log-singular at the slit top; nodes within a cell of it use the
    // cell-interior value.
    Complex top(0.0, f.slit_height());
    if (std::abs(u - top) < 0.6 * cell[k]) u -= Complex(0.0, 0.5 * cell[k]);
    bool on_slit = u.real() == 0.0 && u.imag() > 0.0 && u.imag() < f.slit_height();
    if (!on_slit) return f.Vprime(u);
    if (averaged[k] || sides[k] == Side::none)
        return 0.5 * (f.Vprime(u, Side::plus) + f.Vprime(u, Side::minus));
    return f.Vprime(u, sides[k]);
}

TwoSheetMeasure expand(const SignedSupport& s) {
    TwoSheetMeasure m;
    std::size_t n = s.size();
    m.pos.reserve(2 * n);
    m.w.reserve(2 * n);
    m.cell.reserve(2 * n);
    m.side.reserve(2 * n);
    for (std::size_t k = 0; k < n; ++k) {
        m.pos.push_back(s.nodes[k]);
        m.w.push_back(s.weights[Eigen::Index(k)]);
        m.cell.push_back(s.cell[k]);
        m.side.push_back(s.sides[k]);
    }
    for (std::size_t k = 0; k < n; ++k) {
        m.pos.push_back(std::conj(s.nodes[k]));
        m.w.push_back(-s.weights[Eigen::Index(k)]);
        m.cell.push_back(s.cell[k]);
        m.side.push_back(Side::none);
    }
    return m;
}

double signed_log_energy(const TwoSheetMeasure& m, const FieldModel& f) {
    const std::size_t n = m.pos.size();
    double e = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        e += m.w[k] * m.w[k] * self_log_energy(std::max(m.cell[k], 1e-12));
        for (std::size_t l = k + 1; l < n; ++l) {
            double d = std::abs(m.pos[k] - m.pos[l]);
            if (d < 1e-300) {
                e += 2.0 * m.w[k] * m.w[l] * self_log_energy(std::max(m.cell[k], 1e-12));
            } else {
                e -= 2.0 * m.w[k] * m.w[l] * std::log(d);
            }
        }
        Side side = m.side[k];
        Complex u = m.pos[k];
        if (u.real() == 0.0 && u.imag() > 0.0 && u.imag() < f.slit_height() && side == Side::none)
            side = Side::plus;  // merged slit node; Re V is continuous there
        e += 2.0 * m.w[k] * f.V(u, side).real();
    }
    return e;
}

DeformationValues schiffer_pole(const SignedSupport& s, Complex z) {
    DeformationValues dv;
    auto h = [&](Complex u) { return u * u / (u - z); };
    auto hp = [&](Complex u) { return u * (u - 2.0 * z) / ((u - z) * (u - z)); };
    for (std::size_t k = 0; k < s.size(); ++k) {
        for (Complex u : {s.nodes[k], std::conj(s.nodes[k])}) {
            if (std::abs(u - z) < 1e-9 * (1.0 + std::abs(z)))
                throw std::invalid_argument("schiffer_pole: pole on the support");
        }
        dv.h_up.push_back(h(s.nodes[k]));
        dv.diag_up.push_back(hp(s.nodes[k]));
        dv.h_lo.push_back(h(std::conj(s.nodes[k])));
        dv.diag_lo.push_back(hp(std::conj(s.nodes[k])));
    }
    return dv;
}

DeformationValues pinned_pole(const SignedSupport& s, const std::vector<Complex>& pins,
                              Complex z) {
    DeformationValues dv;
    auto h = [&](Complex u) {
        Complex p{1.0, 0.0};
        for (Complex a : pins) p *= (u - a);
        return p / (u - z);
    };
    auto hp = [&](Complex u) {
        Complex v = h(u), sum{0.0, 0.0};
        for (Complex a : pins) sum += 1.0 / (u - a);
        return v * (sum - 1.0 / (u - z));
    };
    for (std::size_t k = 0; k < s.size(); ++k) {
        for (Complex u : {s.nodes[k], std::conj(s.nodes[k])}) {
            if (std::abs(u - z) < 1e-9 * (1.0 + std::abs(z)))
                throw std::invalid_argument("pinned_pole: pole on the support");
        }
        dv.h_up.push_back(h(s.nodes[k]));
        dv.diag_up.push_back(hp(s.nodes[k]));
        dv.h_lo.push_back(h(std::conj(s.nodes[k])));
        dv.diag_lo.push_back(hp(std::conj(s.nodes[k])));
    }
    return dv;
}

ContourField normal_bump(const Contour& c, int b) {
    const std::size_t n = c.size();
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        s[i] = s[i - 1] + std::abs(c[i].value - c[i - 1].value);
    double total = s.back();
    ContourField cf;
    cf.h.assign(n, Complex(0.0, 0.0));
    cf.diag.assign(n, Complex(0.0, 0.0));
    for (std::size_t i = 1; i + 1 < n; ++i) {
        auto nrm = normal_directions(c, i);
        cf.h[i] = std::sin(M_PI * b * s[i] / total) * nrm.first;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        Complex dz = c[i + 1].value - c[i - 1].value;
        cf.diag[i] = (cf.h[i + 1] - cf.h[i - 1]) / dz;
    }
    return cf;
}

DeformationValues restrict_field(const ContourField& cf, const SignedSupport& s) {
    DeformationValues dv;
    for (std::size_t k = 0; k < s.size(); ++k) {
        int i = s.orig[k];
        dv.h_up.push_back(cf.h[std::size_t(i)]);
        dv.diag_up.push_back(cf.diag[std::size_t(i)]);
        dv.h_lo.push_back(std::conj(cf.h[std::size_t(i)]));
        dv.diag_lo.push_back(std::conj(cf.diag[std::size_t(i)]));
    }
    return dv;
}

Complex schiffer_H(const SignedSupport& s, const DeformationValues& dv, const FieldModel& f) {
    TwoSheetMeasure m = expand(s);
    const std::size_t n2 = m.pos.size(), n = s.size();
    std::vector<Complex> h(n2), diag(n2);
    for (std::size_t k = 0; k < n; ++k) {
        h[k] = dv.h_up[k];
        diag[k] = dv.diag_up[k];
        h[n + k] = dv.h_lo[k];
        diag[n + k] = dv.diag_lo[k];
    }
    Complex quad{0.0, 0.0};
    for (std::size_t k = 0; k < n2; ++k) {
        quad += m.w[k] * m.w[k] * diag[k];
        for (std::size_t l = k + 1; l < n2; ++l) {
            Complex du = m.pos[k] - m.pos[l];
            Complex hh = std::abs(du) < 1e-300 ? diag[k] : (h[k] - h[l]) / du;
            quad += 2.0 * m.w[k] * m.w[l] * hh;
        }
    }
    Complex lin{0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
        Complex vp_up = s.vprime_at(f, k);
        Complex vp_lo = -std::conj(vp_up);  // V'(conj u) = -conj(V'(u))
        lin += s.weights[Eigen::Index(k)] * (vp_up * h[k] - vp_lo * h[n + k]);
    }
    return quad - 2.0 * lin;
}

double schiffer_derivative(const SignedSupport& s, const DeformationValues& dv,
                           const FieldModel& f) {
    return -schiffer_H(s, dv, f).real();
}

TwoSheetMeasure transport(const SignedSupport& s, const DeformationValues& dv, double tau) {
    TwoSheetMeasure m = expand(s);
    const std::size_t n = s.size();
    for (std::size_t k = 0; k < n; ++k) {
        m.pos[k] += tau * dv.h_up[k];
        m.pos[n + k] += tau * dv.h_lo[k];
        m.cell[k] *= std::abs(1.0 + tau * dv.diag_up[k]);
        m.cell[n + k] *= std::abs(1.0 + tau * dv.diag_lo[k]);
        if (m.pos[k].real() != 0.0) m.side[k] = Side::none;
    }
    return m;
}

namespace {

Contour displaced_contour(const Contour& c, const std::vector<Complex>& disp, double step,
                          double clearance, double im_floor) {
    Contour out = c;
    double A = c.slit_height;
    for (std::size_t i = 1; i + 1 < c.size(); ++i) {
        if (c[i].at_infinity) continue;
        Complex z = c[i].value + step * disp[i];
        if (z.imag() < im_floor) z = Complex(z.real(), im_floor);
        // Keep the iterate strictly off the closed slit; the tube is tiny so
        // the ascent is not distorted, and side flips are rejected below.
        if (std::abs(z.real()) < clearance && z.imag() > 0.0 && z.imag() < A + clearance) {
            double sgn = z.real() != 0.0 ? (z.real() > 0.0 ? 1.0 : -1.0)
                                         : (c[i].value.real() != 0.0
                                                ? (c[i].value.real() > 0.0 ? 1.0 : -1.0)
                                                : (c[i].side == Side::minus ? -1.0 : 1.0));
            z = Complex(sgn * clearance, z.imag());
        }
        out.nodes[i] = SlitPoint(z, Side::none);
    }
    out.validate();
    // No segment may cross the open slit.
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
        if (out[i].at_infinity || out[i + 1].at_infinity) continue;
        if (crosses_slit(out[i].value, out[i + 1].value, A) &&
            !(out[i].value == Complex(0.0, 0.0) || out[i + 1].value == Complex(0.0, 0.0)))
            throw std::invalid_argument("displaced contour crosses the slit");
    }
    return out;
}

}  // namespace

MaxMinResult maximize_contour(const Contour& c0, const FieldModel& f, const MaxMinOptions& opt) {
    MaxMinResult res;
    res.contour = c0;
    res.solution = solve_equilibrium(c0, f, opt.inner);
    double energy = res.solution.energy;
    double step = opt.initial_step;
    double clearance = std::min(0.1 * c0.mean_spacing(), 1e-3 * c0.slit_height);
    double im_floor = clearance;
    int stalls = 0;

    // BFGS on the bump coefficients (inverse Hessian of -E).
    const int nb = opt.basis_size;
    Eigen::MatrixXd Binv = Eigen::MatrixXd::Identity(nb, nb);
    Eigen::VectorXd g_prev(nb), step_prev(nb);
    bool have_prev = false;

    for (int outer = 0; outer < opt.max_outer; ++outer) {
        SignedSupport s = SignedSupport::from_measure(res.solution.measure, opt.inner.mass_tol);
        if (s.size() == 0) break;
        std::vector<ContourField> fields;
        Eigen::VectorXd grad(nb);
        double resid = 0.0;
        for (int b = 1; b <= nb; ++b) {
            ContourField cf = normal_bump(res.contour, b);
            // dE_phi/dtau = Re(-H)/2 for the conjugate-symmetric transport.
            grad[b - 1] = 0.5 * schiffer_derivative(s, restrict_field(cf, s), f);
            resid = std::max(resid, std::abs(grad[b - 1]));
            fields.push_back(std::move(cf));
        }
        res.gradient.assign(grad.data(), grad.data() + nb);
        res.trace.push_back({double(outer), energy, resid});
        double threshold = opt.stat_tol * std::max(std::abs(energy), 1e-6);
        if (resid <= threshold) {
            res.converged = true;
            break;
        }
        if (have_prev) {
            Eigen::VectorXd y = g_prev - grad;  // gradient change of -E
            double sy = step_prev.dot(y);
            if (sy > 1e-14 * step_prev.norm() * y.norm()) {
                Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nb, nb);
                Eigen::MatrixXd V = I - step_prev * y.transpose() / sy;
                Binv = V * Binv * V.transpose() + step_prev * step_prev.transpose() / sy;
            }
        }
        Eigen::VectorXd dir = Binv * grad;
        if (dir.dot(grad) <= 0.0) {
            Binv = Eigen::MatrixXd::Identity(nb, nb);
            dir = grad;
        }
        std::vector<Complex> disp(res.contour.size(), Complex(0.0, 0.0));
        for (int b = 0; b < nb; ++b)
            for (std::size_t i = 0; i < disp.size(); ++i)
                disp[i] += dir[b] * fields[std::size_t(b)].h[i];
        double dispmax = 0.0;
        for (const auto& d : disp) dispmax = std::max(dispmax, std::abs(d));
        if (dispmax < 1e-300) break;
        double cur = std::min(step, 2.0 * res.contour.mean_spacing() / dispmax);
        bool accepted = false;
        for (int bt = 0; bt < opt.max_backtracks; ++bt, cur *= 0.5) {
            Contour trial;
            try {
                trial = displaced_contour(res.contour, disp, cur, clearance, im_floor);
            } catch (const std::invalid_argument&) {
                continue;
            }
            EquilibriumSolution cand;
            try {
                cand = solve_equilibrium(trial, f, opt.inner);
            } catch (const std::exception&) {
                continue;
            }
            if (cand.energy > energy) {
                res.contour = std::move(trial);
                res.solution = std::move(cand);
                energy = cand.energy;
                g_prev = grad;
                step_prev = cur * dir;
                have_prev = true;
                step = cur * 2.0;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Direction exhausted: restart the curvature model from a small
            // step before giving up (best-so-far otherwise).
            if (++stalls > 2) break;
            Binv = Eigen::MatrixXd::Identity(nb, nb);
            have_prev = false;
            step = opt.initial_step * std::pow(0.1, stalls);
        } else {
            stalls = 0;
        }
    }
    if (!res.trace.empty()) {
        double threshold = opt.stat_tol * std::max(std::abs(energy), 1e-6);
        res.converged = res.trace.back()[2] <= threshold || res.converged;
    }
    return res;
}

RmuEvaluator::RmuEvaluator(SignedSupport s, const FieldModel& f) : mu_(std::move(s)), f_(&f) {
    vp_.resize(mu_.size());
    for (std::size_t k = 0; k < mu_.size(); ++k) {
        vp_[k] = mu_.vprime_at(f, k);
        Complex u = mu_.nodes[k];
        double w = mu_.weights[Eigen::Index(k)];
        Complex vp_lo = -std::conj(vp_[k]);
        // Moments of 2(u+z)V'(u): constant and linear coefficients in z.
        c1_ += 2.0 * w * (u * vp_[k] - std::conj(u) * vp_lo);
        c2_ += 2.0 * w * (vp_[k] - vp_lo);
    }
}

Complex RmuEvaluator::cauchy(Complex z) const {
    Complex c{0.0, 0.0};
    for (std::size_t k = 0; k < mu_.size(); ++k) {
        double w = mu_.weights[Eigen::Index(k)];
        c += w / (mu_.nodes[k] - z) - w / (std::conj(mu_.nodes[k]) - z);
    }
    return c;
}

Complex RmuEvaluator::operator()(Complex z) const {
    if (std::abs(z) < 1e-12)
        throw std::domain_error("R_mu: possible pole at zero");
    Complex vpz = f_->Vprime(z);
    Complex mid{0.0, 0.0};
    for (std::size_t k = 0; k < mu_.size(); ++k) {
        double w = mu_.weights[Eigen::Index(k)];
        Complex u = mu_.nodes[k];
        // The difference quotients are regular on the support; only the exact
        // node evaluation is indeterminate.
        if (std::abs(z - u) < 1e-9 * (1.0 + std::abs(u)) ||
            std::abs(z - std::conj(u)) < 1e-9 * (1.0 + std::abs(u)))
            throw std::domain_error("R_mu: evaluation at a support node");
        Complex vp_lo = -std::conj(vp_[k]);
        mid += w * (vpz - vp_[k]) / (z - u) - w * (vpz - vp_lo) / (z - std::conj(u));
    }
    return vpz * vpz - 2.0 * mid - (c1_ + c2_ * z) / (z * z);
}

double quadratic_identity_residual(const RmuEvaluator& ev, Complex z) {
    Complex lhs = ev.cauchy(z) + ev.field().Vprime(z);
    return std::abs((lhs * lhs).real() - ev(z).real());
}

std::vector<Complex> find_endpoints(const RmuEvaluator& ev, const std::vector<Complex>& seeds,
                                    double tol) {
    std::vector<Complex> zeros;
    for (Complex seed : seeds) {
        Complex z = seed;
        bool ok = false;
        for (int it = 0; it < 80; ++it) {
            Complex r;
            try {
                r = ev(z);
            } catch (const std::domain_error&) {
                z += Complex(0.0, 1e-3);
                continue;
            }
            Complex vp = ev.field().Vprime(z);
            double scale = 1.0 + std::norm(vp);
            if (std::abs(r) <= tol * scale) {
                ok = true;
                break;
            }
            double h = 1e-7 * (1.0 + std::abs(z));
            Complex dr;
            try {
                dr = (ev(z + h) - ev(z - h)) / (2.0 * h);
            } catch (const std::domain_error&) {
                break;
            }
            if (std::abs(dr) < 1e-300) break;
            Complex dz = r / dr;
            double cap = 0.5 * (1.0 + std::abs(z));
            if (std::abs(dz) > cap) dz *= cap / std::abs(dz);
            z -= dz;
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || std::abs(z) > 1e6) break;
        }
        if (!ok || z.imag() <= 0.0) continue;
        bool dup = false;
        for (Complex w : zeros)
            if (std::abs(w - z) < 1e-5 * (1.0 + std::abs(z))) dup = true;
        if (!dup) zeros.push_back(z);
    }
    std::sort(zeros.begin(), zeros.end(), [](Complex a, Complex b) {
        return a.imag() != b.imag() ? a.imag() < b.imag() : a.real() < b.real();
    });
    return zeros;
}

ArcTrace trace_arc(const RmuEvaluator& ev, Complex from, double step, Complex aim,
                   const std::vector<Complex>& known_zeros, int max_steps) {
    ArcTrace arc;
    arc.points.push_back(from);
    auto sqrtR = [&](Complex z, Complex prev) {
        Complex s = std::sqrt(ev(z));
        if (std::abs(-s - prev) < std::abs(s - prev)) s = -s;
        return s;
    };

    Complex z = from, dir, s_prev;
    double r0 = std::abs(ev.field().Vprime(from));
    bool from_zero = false;
    try {
        from_zero = std::abs(ev(from)) < 1e-5 * (1.0 + r0 * r0);
    } catch (const std::domain_error&) {
        from_zero = false;
    }
    if (from_zero) {
        // Near a simple zero sqrt(R) ~ sqrt(R'(z0)) (z-z0)^{1/2}: three arc
        // directions 120 degrees apart; pick the one heading toward the aim.
        double h = 10.0 * step;
        Complex dr = (ev(from + h) - ev(from - h)) / (2.0 * h);
        double base = M_PI / 3.0 - std::arg(dr) / 3.0;
        double best = -2.0;
        for (int k = 0; k < 3; ++k) {
            Complex cand = std::exp(I * (base + 2.0 * M_PI * k / 3.0));
            Complex want = aim - from;
            double score = std::abs(want) > 0 ? (cand * std::conj(want / std::abs(want))).real()
                                              : cand.imag();
            if (score > best) {
                best = score;
                dir = cand;
            }
        }
        z = from + step * dir;
        arc.points.push_back(z);
        s_prev = std::sqrt(ev(z));
        // Align the branch so that sqrt(R) dz is imaginary along the heading.
        if (std::abs((s_prev * dir).real()) > std::abs((-s_prev * dir).real())) s_prev = -s_prev;
    } else {
        s_prev = std::sqrt(ev(from));
        Complex cand = I / s_prev;
        cand /= std::abs(cand);
        Complex want = aim - from;
        if (std::abs(want) > 0 && (cand * std::conj(want)).real() < 0.0) cand = -cand;
        dir = cand;
        z = from + step * dir;
        arc.points.push_back(z);
        s_prev = sqrtR(z, s_prev);
    }

    Complex cum{0.0, 0.0};
    for (int n = 0; n < max_steps; ++n) {
        Complex s, s2, znew;
        try {
            s = sqrtR(z, s_prev);
            if (std::abs(s) < 1e-10 * (1.0 + r0)) {
                arc.stop = ArcTrace::Stop::branch_point;
                return arc;
            }
            Complex d = I / s;
            d /= std::abs(d);
            if ((d * std::conj(dir)).real() < 0.0) d = -d;
            znew = z + step * d;
            s2 = sqrtR(znew, s);
            cum += 0.5 * step * d * (s + s2);
            // Project back onto Re int sqrt(R) dz = 0.
            Complex corr = -cum.real() / s2;
            if (std::abs(corr) < 0.5 * step) {
                znew += corr;
                cum += s2 * corr;
            }
            dir = d;
        } catch (const std::domain_error&) {
            arc.stop = ArcTrace::Stop::branch_point;
            return arc;
        }
        s_prev = s2;
        z = znew;
        arc.points.push_back(z);
        arc.max_re_residual = std::max(arc.max_re_residual, std::abs(cum.real()));
        if (z.imag() <= step) {
            arc.stop = ArcTrace::Stop::real_axis;
            return arc;
        }
        bool nearzero = false;
        for (Complex w : known_zeros)
            if (std::abs(z - w) < step && std::abs(w - from) > 2.0 * step) nearzero = true;
        if (nearzero) {
            arc.stop = ArcTrace::Stop::endpoint;
            return arc;
        }
    }
    return arc;
}

SCurveReport verify_s_property(const Contour& c, const EquilibriumSolution& sol,
                               const FieldModel& f, double offset, const RmuEvaluator* ev) {
    SCurveReport rep;
    const std::size_t n = c.size();
    double spacing = c.mean_spacing();
    if (offset <= 0.0) offset = 3.0 * spacing;
    const auto& mask = sol.support_mask;

    auto u_value = [&](Complex z) { return f.phi(z) + green_potential(sol.measure, z); };

    // Distances to the nearest support-mask boundary: the difference quotients
    // measure the interior normal derivatives only when the probe stencil
    // stays clear of the band endpoints.
    std::vector<Complex> boundaries;
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (mask[i] && (!mask[i - 1] || !mask[i + 1])) boundaries.push_back(c[i].value);

    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!mask[i] || !mask[i - 1] || !mask[i + 1]) continue;  // interior support only
        auto nrm = normal_directions(c, i);
        Complex z = c[i].value;
        double d_end = 1e300;
        for (Complex b : boundaries) d_end = std::min(d_end, std::abs(z - b));
        d_end = std::min(d_end, std::abs(z));  // the support also ends at 0
        if (d_end < 2.0 * offset) continue;
        double off = std::min(offset, d_end / 3.0);
        bool valid = true;
        // Shrink the probe offset until it clears other contour branches and
        // the slit.
        for (;; off *= 0.5) {
            if (off < spacing / 10.0) {
                valid = false;
                break;
            }
            bool collide = false;
            for (Complex probe : {z + off * nrm.first, z + off * nrm.second}) {
                if (probe.imag() <= 0.0) collide = true;
                if (crosses_slit(z, probe, c.slit_height)) collide = true;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j + 3 >= i && j <= i + 3) continue;
                    if (std::abs(probe - c[j].value) < 0.5 * off) collide = true;
                }
                if (collide) break;
            }
            if (!collide) break;
        }
        if (!valid) continue;
        double dp = u_value(z + off * nrm.first) / off;
        double dm = u_value(z + off * nrm.second) / off;
        SNodeCheck chk;
        chk.node = i;
        chk.d_plus = dp;
        chk.d_minus = dm;
        chk.offset = off;
        chk.mismatch = std::abs(dp - dm) / std::max({std::abs(dp), std::abs(dm), 1e-300});
        if (dp > 0.0) ++rep.sign_violations;
        if (dm > 0.0) ++rep.sign_violations;
        rep.max_mismatch = std::max(rep.max_mismatch, chk.mismatch);
        rep.checks.push_back(chk);
    }

    // Band endpoints from the support-mask boundaries.
    for (std::size_t i = 1; i + 1 < n; ++i) {
        bool boundary = mask[i] && (!mask[i - 1] || !mask[i + 1]);
        if (boundary) rep.band_endpoints.push_back(c[i].value);
    }
    if (ev) {
        for (Complex e : rep.band_endpoints) {
            try {
                rep.endpoint_rmu_residuals.push_back(std::abs((*ev)(e + Complex(0.0, 1e-6))));
            } catch (const std::domain_error&) {
                rep.endpoint_rmu_residuals.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
    }
    return rep;
}

}  // namespace scurve
