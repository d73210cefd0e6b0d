#include "scurve/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace scurve {

namespace {

// Exact log self-energy of a unit-mass uniform density on a straight segment
// of length h: Int Int log(1/|u-v|) = 3/2 - log h.
double self_log_energy(double h) { return 1.5 - std::log(h); }

// Mean of log|p - u| over a straight segment [a, b]. All-real antiderivative
// (no log branches): with xi = (p-a)/(b-a),
// Int_0^1 ln|xi - s| ds = G(x) - G(x-1), G(t) = t ln sqrt(t^2+y^2) - t + |y| atan(t/|y|).
double segment_log_mean(Complex p, Complex a, Complex b) {
    Complex d = b - a;
    double h = std::abs(d);
    if (h < 1e-300) return std::log(std::abs(p - a));
    Complex xi = (p - a) / d;
    double x = xi.real(), y = std::abs(xi.imag());
    auto G = [&](double t) {
        if (y < 1e-300)
            return t == 0.0 ? 0.0 : t * std::log(std::abs(t)) - t;
        return 0.5 * t * std::log(t * t + y * y) - t + y * std::atan(t / y);
    };
    return std::log(h) + G(x) - G(x - 1.0);
}

}  // namespace

double GreenKernelMatrix::psd_margin() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    return es.eigenvalues().minCoeff() / scale;
}

namespace {

// Mean of -log|p - u| over node k's half-segment cell.
double cell_log_mean(const Contour& c, std::size_t k, Complex p) {
    const auto& nodes = c.nodes;
    Complex u = nodes[k].value;
    Complex a = k > 0 && !nodes[k - 1].at_infinity ? 0.5 * (nodes[k - 1].value + u) : u;
    Complex b = k + 1 < nodes.size() && !nodes[k + 1].at_infinity
                    ? 0.5 * (nodes[k + 1].value + u)
                    : u;
    double la = std::abs(u - a), lb = std::abs(b - u);
    if (la + lb < 1e-300) return -std::log(std::max(std::abs(p - u), 1e-300));
    double ma = la > 1e-300 ? segment_log_mean(p, a, u) : 0.0;
    double mb = lb > 1e-300 ? segment_log_mean(p, u, b) : 0.0;
    return -(la * ma + lb * mb) / (la + lb);
}

}  // namespace

GreenKernelMatrix kernel_matrix(const Contour& c) {
    const std::size_t n = c.size();
    if (n < 3) throw std::invalid_argument("kernel_matrix: contour needs >= 3 nodes");
    for (std::size_t i = 0; i < n; ++i) {
        if (c[i].at_infinity) throw std::invalid_argument("kernel_matrix: node at infinity");
        if (i > 0 && c[i].value == c[i - 1].value && c[i].side == c[i - 1].side)
            throw std::invalid_argument("kernel_matrix: coincident nodes");
    }
    GreenKernelMatrix km;
    km.K.resize(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        Complex zi = c[i].value;
        for (std::size_t j = 0; j <= i; ++j) {
            Complex zj = c[j].value;
            double v;
            if (zi.imag() == 0.0 || zj.imag() == 0.0) {
                v = 0.0;  // endpoint rows: G vanishes on the real axis
            } else if (i == j || zi == zj) {
                double h = std::max(i == j ? c.cell_length(i)
                                           : std::min(c.cell_length(i), c.cell_length(j)),
                                    1e-12);
                v = self_log_energy(h) + std::log(2.0 * zi.imag());
            } else if (std::abs(zi - zj) < 0.45 * (c.cell_length(i) + c.cell_length(j))) {
                // Sub-spacing pair (e.g. the two sides of a thin lens):
                // symmetrized cell average keeps the quadratic form positive
                // where point values would overshoot. Regular neighbors keep
                // point values, matching the transport derivative.
                double m = 0.5 * (cell_log_mean(c, j, zi) + cell_log_mean(c, i, zj));
                v = m + std::log(std::abs(zi - std::conj(zj)));
            } else {
                v = green_upper(zi, zj);
            }
            km.K(i, j) = v;
            km.K(j, i) = v;
        }
    }
    return km;
}

double green_energy(const DiscreteMeasure& mu, const GreenKernelMatrix& km) {
    return mu.weights.dot(km.K * mu.weights);
}

double green_energy(const DiscreteMeasure& mu) { return green_energy(mu, kernel_matrix(mu.host)); }

// Potential at z of a unit mass attached to node k (uniform density over the
// node's half-segments when z is within a cell length).
static double unit_node_potential(const Contour& host, std::size_t k, Complex z) {
    const auto& nodes = host.nodes;
    Complex u = nodes[k].value;
    if (u.imag() == 0.0 || z.imag() == 0.0) return 0.0;
    double cell = host.cell_length(k);
    if (std::abs(z - u) > cell) return green_upper(z, u);
    Complex a = k > 0 && !nodes[k - 1].at_infinity ? 0.5 * (nodes[k - 1].value + u) : u;
    Complex b = k + 1 < nodes.size() && !nodes[k + 1].at_infinity
                    ? 0.5 * (nodes[k + 1].value + u)
                    : u;
    double near;
    if (std::abs(b - a) < 1e-300) {
        near = std::abs(z - u) < 1e-300 ? self_log_energy(std::max(cell, 1e-12))
                                        : -std::log(std::abs(z - u));
    } else {
        double la = std::abs(u - a), lb = std::abs(b - u);
        double ma = la > 1e-300 ? segment_log_mean(z, a, u) : 0.0;
        double mb = lb > 1e-300 ? segment_log_mean(z, u, b) : 0.0;
        near = -(la * ma + lb * mb) / std::max(la + lb, 1e-300);
    }
    return near + std::log(std::abs(z - std::conj(u)));
}

double green_potential(const DiscreteMeasure& mu, Complex z) {
    if (z.imag() == 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < mu.host.size(); ++k) {
        double w = mu.weights[Eigen::Index(k)];
        if (w == 0.0) continue;
        s += w * unit_node_potential(mu.host, k, z);
    }
    return s;
}

double weighted_energy(const DiscreteMeasure& mu, const FieldModel& f) {
    double e = green_energy(mu);
    const auto& nodes = mu.host.nodes;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (mu.weights[k] == 0.0) continue;
        if (nodes[k].at_infinity)
            throw std::invalid_argument("weighted_energy: mass at infinity");
        e += 2.0 * mu.weights[k] * f.phi(nodes[k]);
    }
    return e;
}

Eigen::VectorXd solve_qp(const Eigen::MatrixXd& K, const Eigen::VectorXd& phi,
                         const std::vector<bool>& pinned, const SolverOptions& opt,
                         int* iterations) {
    const Eigen::Index n = K.rows();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    auto project = [&](Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (pinned[std::size_t(i)])
                v[i] = 0.0;
            else if (v[i] < 0.0)
                v[i] = 0.0;
        }
    };
    auto grad = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return 2.0 * (K * v + phi); };

    double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    Eigen::VectorXd g = grad(w);
    double step = 1.0 / scale;
    int it = 0;
    Eigen::VectorXd w_prev = w, g_prev = g;
    for (; it < opt.max_iterations; ++it) {
        Eigen::VectorXd trial = w - step * g;
        project(trial);
        Eigen::VectorXd d = trial - w;
        if (d.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + w.lpNorm<Eigen::Infinity>())) {
            w = trial;
            break;
        }
        w_prev = w;
        g_prev = g;
        w = trial;
        g = grad(w);
        // Barzilai-Borwein step from the last displacement.
        Eigen::VectorXd s = w - w_prev, y = g - g_prev;
        double sy = s.dot(y);
        step = sy > 1e-300 ? s.dot(s) / sy : 1.0 / scale;
        step = std::min(std::max(step, 1e-12 / scale), 1e12 / scale);
        // g/2 = K w + phi is the KKT vector; energy = w.g/2 + phi.w.
        double energy = 0.5 * w.dot(g) + phi.dot(w);
        if (energy < -1e14 * scale || !std::isfinite(energy))
            throw std::runtime_error("solve_qp: objective unbounded below");
        double viol = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (pinned[std::size_t(i)]) continue;
            double kkt = 0.5 * g[i];
            viol = std::max(viol, w[i] > opt.mass_tol ? std::abs(kkt) : std::max(0.0, -kkt));
        }
        if (viol < 0.25 * opt.tol) break;
    }

    // Active-set polish: equality-solve on the detected support, exchange
    // until primal feasible and dual nonnegative.
    std::vector<bool> active(std::size_t(n), false);
    for (Eigen::Index i = 0; i < n; ++i)
        active[std::size_t(i)] = !pinned[std::size_t(i)] && w[i] > opt.mass_tol;
    for (int polish = 0; polish < 4 * int(n) + 50; ++polish) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < n; ++i)
            if (active[std::size_t(i)]) idx.push_back(i);
        Eigen::VectorXd ws = Eigen::VectorXd::Zero(n);
        if (!idx.empty()) {
            Eigen::MatrixXd Ks(idx.size(), idx.size());
            Eigen::VectorXd ps(idx.size());
            for (std::size_t a = 0; a < idx.size(); ++a) {
                ps[Eigen::Index(a)] = -phi[idx[a]];
                for (std::size_t b = 0; b < idx.size(); ++b) Ks(Eigen::Index(a), Eigen::Index(b)) = K(idx[a], idx[b]);
            }
            Eigen::VectorXd sol;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Ks);
            if (ldlt.info() == Eigen::Success) sol = ldlt.solve(ps);
            if (!sol.size() || !sol.allFinite() ||
                (Ks * sol - ps).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + ps.lpNorm<Eigen::Infinity>())) {
                sol = Ks.completeOrthogonalDecomposition().solve(ps);
            }
            for (std::size_t a = 0; a < idx.size(); ++a) ws[idx[a]] = sol[Eigen::Index(a)];
        }
        // Drop the most negative primal coordinate, if any.
        Eigen::Index drop = -1;
        double most_neg = -1e-14;
        for (Eigen::Index i = 0; i < n; ++i)
            if (active[std::size_t(i)] && ws[i] < most_neg) {
                most_neg = ws[i];
                drop = i;
            }
        if (drop >= 0) {
            active[std::size_t(drop)] = false;
            continue;
        }
        // Add the worst dual violation, if any.
        Eigen::VectorXd kkt = K * ws + phi;
        Eigen::Index add = -1;
        double worst = -opt.tol * 0.5;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!pinned[std::size_t(i)] && !active[std::size_t(i)] && kkt[i] < worst) {
                worst = kkt[i];
                add = i;
            }
        w = ws;
        if (add < 0) break;
        active[std::size_t(add)] = true;
    }
    if (iterations) *iterations = it;
    return w;
}

EquilibriumSolution solve_equilibrium(const Contour& c, const FieldModel& f,
                                      const SolverOptions& opt) {
    c.validate();
    GreenKernelMatrix km = kernel_matrix(c);
    double margin = km.psd_margin();
    if (margin < -1e-8)
        throw std::runtime_error("solve_equilibrium: kernel is not PSD within tolerance");
    if (margin < 1e-12) {
        // Lift the discretization's slightly negative tail so the cone
        // minimization stays bounded.
        double scale = std::max(1.0, km.K.cwiseAbs().maxCoeff());
        km.K.diagonal().array() += (-std::min(margin, 0.0) + 1e-12) * scale;
    }
    const std::size_t n = c.size();
    Eigen::VectorXd phi(n);
    std::vector<bool> pinned(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        phi[Eigen::Index(i)] = f.phi(c[i]);
        // Density vanishes at the contour endpoints 0+ and 0-.
        if (i == 0 || i + 1 == n || c[i].value.imag() == 0.0) pinned[i] = true;
    }
    int its = 0;
    Eigen::VectorXd w = solve_qp(km.K, phi, pinned, opt, &its);

    EquilibriumSolution sol;
    sol.measure = DiscreteMeasure{c, w};
    sol.energy = w.dot(km.K * w) + 2.0 * phi.dot(w);
    sol.iterations = its;
    sol.support_mask.assign(n, false);
    Eigen::VectorXd kkt = km.K * w + phi;
    double rs = 0.0, ro = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (pinned[i]) continue;
        if (w[Eigen::Index(i)] > opt.mass_tol) {
            sol.support_mask[i] = true;
            rs = std::max(rs, std::abs(kkt[Eigen::Index(i)]));
        } else {
            ro = std::max(ro, -kkt[Eigen::Index(i)]);
        }
    }
    sol.kkt_residual_supp = rs;
    sol.kkt_residual_off = std::max(0.0, ro);
    sol.converged = rs <= opt.tol && ro <= opt.tol;

    // If every support node sits on the imaginary axis, report the arc top.
    double top = 0.0;
    bool imaginary_arc = true, any = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (!sol.support_mask[i]) continue;
        any = true;
        if (std::abs(c[i].value.real()) > 1e-12) imaginary_arc = false;
        top = std::max(top, c[i].value.imag());
    }
    if (any && imaginary_arc) sol.b0 = Complex(0.0, top);
    return sol;
}

namespace {

// Lawson-Hanson nonnegative least squares: min |A w - v| over w >= 0 with
// pinned coordinates held at zero. Primal subsolves keep the residual at
// least-squares accuracy.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& v,
                     const std::vector<bool>& pinned, double tol, int max_pass) {
    const Eigen::Index n = A.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    std::vector<bool> active(std::size_t(n), false);
    auto solve_subset = [&](const std::vector<Eigen::Index>& idx) {
        Eigen::MatrixXd As(A.rows(), Eigen::Index(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) As.col(Eigen::Index(a)) = A.col(idx[a]);
        return As.completeOrthogonalDecomposition().solve(v).eval();
    };
    double vnorm = std::max(v.lpNorm<Eigen::Infinity>(), 1e-300);
    for (int pass = 0; pass < max_pass; ++pass) {
        Eigen::VectorXd g = A.transpose() * (v - A * w);
        Eigen::Index best = -1;
        double gmax = tol * vnorm;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!pinned[std::size_t(i)] && !active[std::size_t(i)] && g[i] > gmax) {
                gmax = g[i];
                best = i;
            }
        if (best < 0) break;
        active[std::size_t(best)] = true;
        for (int inner = 0; inner < 4 * int(n); ++inner) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index i = 0; i < n; ++i)
                if (active[std::size_t(i)]) idx.push_back(i);
            Eigen::VectorXd s = solve_subset(idx);
            double smin = s.size() ? s.minCoeff() : 0.0;
            if (smin > -1e-14) {
                w.setZero();
                for (std::size_t a = 0; a < idx.size(); ++a) w[idx[a]] = std::max(s[Eigen::Index(a)], 0.0);
                break;
            }
            // Step to the feasibility boundary and drop the vanished index.
            double t = 1.0;
            for (std::size_t a = 0; a < idx.size(); ++a)
                if (s[Eigen::Index(a)] <= 0.0)
                    t = std::min(t, w[idx[a]] / (w[idx[a]] - s[Eigen::Index(a)]));
            for (std::size_t a = 0; a < idx.size(); ++a) {
                w[idx[a]] += t * (s[Eigen::Index(a)] - w[idx[a]]);
                if (w[idx[a]] <= 1e-14) {
                    w[idx[a]] = 0.0;
                    active[std::size_t(idx[a])] = false;
                }
            }
        }
    }
    return w;
}

}  // namespace

DiscreteMeasure balayage(const DiscreteMeasure& mu, const Contour& q, const SolverOptions& opt) {
    q.validate();
    const std::size_t n = q.size();
    // Collocation in the potential convention: column j is the potential of a
    // unit mass on node j evaluated at every node of q.
    Eigen::MatrixXd A(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            A(Eigen::Index(i), Eigen::Index(j)) = unit_node_potential(q, j, q[i].value);
    Eigen::VectorXd v(n);
    for (std::size_t i = 0; i < n; ++i) v[Eigen::Index(i)] = green_potential(mu, q[i].value);
    std::vector<bool> pinned(n, false);
    for (std::size_t i = 0; i < n; ++i)
        if (q[i].value.imag() == 0.0) pinned[i] = true;
    Eigen::VectorXd w = nnls(A, v, pinned, std::min(opt.tol, 1e-10), 8 * int(n));
    if (!w.allFinite()) throw std::runtime_error("balayage: collocation solve failed");
    return DiscreteMeasure{q, w};
}

double ContinuityProbe::median_deviation() const {
    if (deviations.empty()) return 0.0;
    std::vector<double> d = deviations;
    std::sort(d.begin(), d.end());
    return d[d.size() / 2];
}

ContinuityProbe continuity_probe(const Contour& c, const FieldModel& f, double scale,
                                 unsigned long long seed, int samples, const SolverOptions& opt) {
    for (const auto& p : c.nodes)
        if (p.at_infinity) throw std::invalid_argument("continuity_probe: unbounded contour");
    ContinuityProbe probe;
    probe.base_energy = solve_equilibrium(c, f, opt).energy;
    if (scale == 0.0) {
        probe.deviations.assign(std::size_t(samples), 0.0);
        return probe;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // One-sided fallback for folded ladders whose central tangent degenerates.
    auto normal_at = [&](const Contour& cc, std::size_t i) -> Complex {
        try {
            return normal_directions(cc, i).first;
        } catch (const std::invalid_argument&) {
            Complex t = cc[i].value - cc[i - 1].value;
            if (std::abs(t) < 1e-300) t = Complex(0, 1);
            return Complex(0, 1) * t / std::abs(t);
        }
    };
    std::vector<double> s_of(c.size(), 0.0);
    for (std::size_t i = 1; i < c.size(); ++i)
        s_of[i] = s_of[i - 1] + std::abs(c[i].value - c[i - 1].value);
    double total = s_of.back();
    const int modes = 8;
    for (int s = 0; s < samples; ++s) {
        // Smooth random normal displacement field, endpoints fixed, scaled to
        // a sup displacement of exactly `scale`.
        std::vector<double> coef(modes);
        for (int b = 0; b < modes; ++b) coef[b] = gauss(rng);
        std::vector<Complex> disp(c.size(), Complex(0.0, 0.0));
        double sup = 0.0;
        for (std::size_t i = 1; i + 1 < c.size(); ++i) {
            double amp = 0.0;
            for (int b = 0; b < modes; ++b)
                amp += coef[std::size_t(b)] * std::sin(M_PI * (b + 1) * s_of[i] / total);
            disp[i] = amp * normal_at(c, i);
            sup = std::max(sup, std::abs(disp[i]));
        }
        if (sup < 1e-300) continue;
        Contour pert = c;
        for (std::size_t i = 1; i + 1 < c.size(); ++i) {
            Complex z = c[i].value + disp[i] * (scale / sup);
            Side side = c[i].side;
            if (z.real() != 0.0) side = Side::none;
            pert.nodes[i] = SlitPoint(z, side);
        }
        try {
            pert.validate();
        } catch (const std::invalid_argument&) {
            ++probe.rejected;
            continue;
        }
        try {
            double e = solve_equilibrium(pert, f, opt).energy;
            probe.deviations.push_back(std::abs(e - probe.base_energy));
        } catch (const std::exception&) {
            ++probe.rejected;
        }
    }
    return probe;
}

}  // namespace scurve
