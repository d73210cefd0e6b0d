#include <doctest.h>

#include <cmath>
#include <random>

#include "scurve/maxmin.hpp"

using namespace scurve;

namespace {
const double A = 1.0;

FieldModel sech_field(double x, double t) {
    FieldParams p;
    p.x = x;
    p.t = t;
    return FieldModel(DensityModel::constant(A), p);
}

Contour bowed_lens(double bow, std::size_t n) {
    return Contour::wrapped_slit_opened(A, n, bow);
}

SignedSupport random_support(std::mt19937_64& rng, const FieldModel& f, std::size_t n) {
    Contour c = bowed_lens(0.05, n);
    SolverOptions opt;
    EquilibriumSolution sol = solve_equilibrium(c, f, opt);
    // Random positive tweak keeps it a generic (non-critical) measure.
    std::uniform_real_distribution<double> u(0.5, 1.5);
    DiscreteMeasure mu = sol.measure;
    for (Eigen::Index i = 0; i < mu.weights.size(); ++i) mu.weights[i] *= u(rng);
    return SignedSupport::from_measure(mu);
}

// Cached converged max-min run shared by several cases.
struct ConvergedRun {
    FieldModel field = sech_field(0.5, 0.3);
    MaxMinResult result;
    ConvergedRun() {
        MaxMinOptions opt;
        opt.basis_size = 12;
        opt.stat_tol = 1e-3;
        opt.max_outer = 120;
        result = maximize_contour(bowed_lens(0.2, 121), field, opt);
    }
};

const ConvergedRun& converged() {
    static ConvergedRun run;
    return run;
}

}  // namespace

TEST_CASE("signed extension is antisymmetric by construction") {
    FieldModel f = sech_field(0.0, 0.0);
    Contour f0 = Contour::wrapped_slit(A, 41);
    EquilibriumSolution sol = solve_equilibrium(f0, f, SolverOptions{});
    SignedSupport s = SignedSupport::from_measure(sol.measure);
    TwoSheetMeasure m = expand(s);
    std::size_t n = s.size();
    for (std::size_t k = 0; k < n; ++k) {
        CHECK(m.pos[n + k] == std::conj(m.pos[k]));
        CHECK(m.w[n + k] == -m.w[k]);
        CHECK(m.w[k] > 0.0);
    }
    // Aggregation merged the two slit sides.
    CHECK(s.total_mass() == doctest::Approx(sol.measure.total_mass()).epsilon(1e-12));
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = k + 1; l < n; ++l) CHECK(s.nodes[k] != s.nodes[l]);
}

TEST_CASE("schiffer derivative matches the transported-energy difference") {
    std::mt19937_64 rng(21);
    FieldModel f = sech_field(0.4, 0.25);
    for (int trial = 0; trial < 6; ++trial) {
        SignedSupport s = random_support(rng, f, 61);
        REQUIRE(s.size() > 5);
        std::vector<DeformationValues> fields;
        fields.push_back(schiffer_pole(s, Complex(1.3, 0.4)));
        fields.push_back(schiffer_pole(s, Complex(-0.8, 1.9)));
        std::vector<Complex> pins = {Complex(0, A), Complex(0, -A)};
        fields.push_back(pinned_pole(s, pins, Complex(2.0, 1.0)));
        for (const auto& dv : fields) {
            double deriv = schiffer_derivative(s, dv, f);
            double tau = 1e-4;
            double ep = signed_log_energy(transport(s, dv, tau), f);
            double em = signed_log_energy(transport(s, dv, -tau), f);
            double fd = (ep - em) / (2.0 * tau);
            CHECK(std::abs(fd - deriv) <= 1e-3 * std::max({std::abs(deriv), std::abs(fd), 1e-6}));
        }
        // Null variation.
        DeformationValues zero;
        zero.h_up.assign(s.size(), Complex(0, 0));
        zero.h_lo.assign(s.size(), Complex(0, 0));
        zero.diag_up.assign(s.size(), Complex(0, 0));
        zero.diag_lo.assign(s.size(), Complex(0, 0));
        CHECK(schiffer_derivative(s, zero, f) == 0.0);
    }
}

TEST_CASE("transport remainder is quadratic in tau") {
    std::mt19937_64 rng(31);
    FieldModel f = sech_field(0.3, 0.2);
    SignedSupport s = random_support(rng, f, 81);
    DeformationValues dv = schiffer_pole(s, Complex(1.1, 0.8));
    double e0 = signed_log_energy(expand(s), f);
    double deriv = schiffer_derivative(s, dv, f);
    double taus[3] = {4e-3, 2e-3, 1e-3};
    double rem[3];
    for (int k = 0; k < 3; ++k) {
        double e = signed_log_energy(transport(s, dv, taus[k]), f);
        rem[k] = std::abs(e - e0 - taus[k] * deriv);
    }
    double p = std::log(rem[0] / rem[2]) / std::log(taus[0] / taus[2]);
    CHECK(p >= 1.9);
}

TEST_CASE("pole on the support is rejected") {
    std::mt19937_64 rng(7);
    FieldModel f = sech_field(0.2, 0.1);
    SignedSupport s = random_support(rng, f, 41);
    CHECK_THROWS_AS(schiffer_pole(s, s.nodes[s.size() / 2]), std::invalid_argument);
}

TEST_CASE("maximizer: monotone ascent, beats the wrapped start, fixed point") {
    const auto& run = converged();
    const MaxMinResult& r = run.result;
    REQUIRE(r.trace.size() > 1);
    for (std::size_t k = 1; k < r.trace.size(); ++k)
        CHECK(r.trace[k][1] >= r.trace[k - 1][1] - 1e-14);
    CHECK(r.converged);

    // Energy at least that of the wrapped contour (which is feasible).
    FieldModel f = run.field;
    Contour f0 = Contour::wrapped_slit(A, 121);
    EquilibriumSolution base = solve_equilibrium(f0, f, SolverOptions{});
    CHECK(r.solution.energy >= base.energy - 1e-6);

    // Restart from the converged contour: stationary immediately.
    MaxMinOptions opt;
    opt.basis_size = 12;
    opt.stat_tol = 1e-3;
    opt.max_outer = 10;
    MaxMinResult r2 = maximize_contour(r.contour, f, opt);
    CHECK(r2.converged);
    CHECK(std::abs(r2.solution.energy - r.solution.energy) <=
          2e-4 * std::abs(r.solution.energy));

    // The iterates never touch the real axis or the slit.
    for (std::size_t i = 1; i + 1 < r.contour.size(); ++i) {
        Complex z = r.contour[i].value;
        CHECK(z.imag() > 0.0);
        bool on_slit = z.real() == 0.0 && z.imag() <= A;
        CHECK(!on_slit);
    }
}

TEST_CASE("stationarity of the basis derivatives at the maximizer") {
    const auto& run = converged();
    const MaxMinResult& r = run.result;
    SignedSupport s = SignedSupport::from_measure(r.solution.measure);
    double scale = std::abs(r.solution.energy);
    for (int b = 1; b <= 12; ++b) {
        ContourField cf = normal_bump(r.contour, b);
        double g = 0.5 * schiffer_derivative(s, restrict_field(cf, s), run.field);
        CHECK(std::abs(g) <= 1.2e-3 * scale);
    }
}

TEST_CASE("quadratic identity at and away from the maximizer") {
    const auto& run = converged();
    SignedSupport s = SignedSupport::from_measure(run.result.solution.measure);
    RmuEvaluator ev(s, run.field);

    // Zero-measure reduction: both sides are Re (V')^2.
    DiscreteMeasure empty{run.result.contour,
                          Eigen::VectorXd::Zero(Eigen::Index(run.result.contour.size()))};
    SignedSupport s0 = SignedSupport::from_measure(empty);
    RmuEvaluator ev0(s0, run.field);
    Complex z0(0.9, 1.1);
    Complex vp = run.field.Vprime(z0);
    CHECK(std::abs(ev0(z0) - vp * vp) < 1e-12 * std::norm(vp));
    CHECK(quadratic_identity_residual(ev0, z0) < 1e-12 * std::norm(vp));

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ur(-1.6, 1.6), ui(0.2, 2.2);
    double worst = 0.0;
    int used = 0;
    while (used < 20) {
        Complex z(ur(rng), ui(rng));
        double scale = std::norm(run.field.Vprime(z));
        try {
            worst = std::max(worst, quadratic_identity_residual(ev, z) / scale);
        } catch (const std::domain_error&) {
            continue;  // landed on the support
        }
        ++used;
    }
    CHECK(worst <= 1e-3);

    // A deliberately non-optimal equilibrium violates the identity somewhere.
    FieldModel f = run.field;
    Contour off = bowed_lens(0.45, 121);
    EquilibriumSolution sol_off = solve_equilibrium(off, f, SolverOptions{});
    RmuEvaluator ev_off(SignedSupport::from_measure(sol_off.measure), f);
    double bad = 0.0;
    used = 0;
    std::mt19937_64 rng2(18);
    while (used < 20) {
        Complex z(ur(rng2), ui(rng2));
        double scale = std::norm(f.Vprime(z));
        try {
            bad = std::max(bad, quadratic_identity_residual(ev_off, z) / scale);
        } catch (const std::domain_error&) {
            continue;
        }
        ++used;
    }
    CHECK(bad > 1e-3);
}

TEST_CASE("R_mu far-field expansion") {
    // R_mu(z) = (V'(z))^2 + O(1/z): at z = 100i with the sech density and
    // t = 1/4 this is (4tR - pi)^2 + O(1), about 6 percent below the
    // cross-term-free combination 16 t^2 R^2 + pi^2.
    FieldModel f = sech_field(0.5, 0.25);
    Contour f0 = Contour::wrapped_slit(A, 121);
    EquilibriumSolution sol = solve_equilibrium(f0, f, SolverOptions{});
    RmuEvaluator ev(SignedSupport::from_measure(sol.measure), f);
    Complex z(0.0, 100.0);
    Complex vp = f.Vprime(z);
    CHECK(std::abs(ev(z) - vp * vp) <= 0.01 * std::abs(vp * vp));
    CHECK(std::abs(vp * vp) ==
          doctest::Approx(std::norm(Complex(100.0 - M_PI, -1.0))).epsilon(0.01));
    // Pole warning at zero.
    CHECK_THROWS_AS(ev(Complex(0.0, 0.0)), std::domain_error);
}

TEST_CASE("endpoint detection agrees with the support mask") {
    const auto& run = converged();
    const MaxMinResult& r = run.result;
    SignedSupport s = SignedSupport::from_measure(r.solution.measure);
    RmuEvaluator ev(s, run.field);
    double spacing = r.contour.mean_spacing();

    std::vector<Complex> mask_ends;
    for (std::size_t i = 1; i + 1 < r.contour.size(); ++i) {
        bool b = r.solution.support_mask[i] &&
                 (!r.solution.support_mask[i - 1] || !r.solution.support_mask[i + 1]);
        if (b && std::abs(r.contour[i].value) > 3.0 * spacing)
            mask_ends.push_back(r.contour[i].value);
    }
    REQUIRE(!mask_ends.empty());

    std::vector<Complex> seeds;
    for (Complex e : mask_ends) {
        seeds.push_back(e + Complex(2.0 * spacing, 2.0 * spacing));
        seeds.push_back(e - Complex(2.0 * spacing, -2.0 * spacing));
    }
    std::vector<Complex> zeros = find_endpoints(ev, seeds);
    REQUIRE(!zeros.empty());
    for (Complex e : mask_ends) {
        double best = 1e300;
        for (Complex z : zeros) best = std::min(best, std::abs(z - e));
        CHECK(best <= 2.0 * spacing);
    }
    // Re-running from the zeros is a fixed point.
    std::vector<Complex> again = find_endpoints(ev, zeros);
    REQUIRE(again.size() == zeros.size());
    for (std::size_t k = 0; k < zeros.size(); ++k) CHECK(std::abs(again[k] - zeros[k]) < 1e-8);
}

TEST_CASE("arc tracing follows the support") {
    const auto& run = converged();
    const MaxMinResult& r = run.result;
    SignedSupport s = SignedSupport::from_measure(r.solution.measure);
    RmuEvaluator ev(s, run.field);
    double spacing = r.contour.mean_spacing();

    std::vector<Complex> seeds;
    for (std::size_t i = 1; i + 1 < r.contour.size(); ++i) {
        bool b = r.solution.support_mask[i] &&
                 (!r.solution.support_mask[i - 1] || !r.solution.support_mask[i + 1]);
        if (b) {
            Complex e = r.contour[i].value;
            seeds.push_back(e + Complex(2.0 * spacing, 2.0 * spacing));
            seeds.push_back(e - Complex(2.0 * spacing, -2.0 * spacing));
        }
    }
    std::vector<Complex> zeros = find_endpoints(ev, seeds);
    REQUIRE(!zeros.empty());
    // Newton can also land on quadratic zeros away from the support; trace
    // from the one matching the top band endpoint.
    Complex mask_top{0.0, 0.0};
    for (std::size_t i = 1; i + 1 < r.contour.size(); ++i)
        if (r.solution.support_mask[i] &&
            r.contour[i].value.imag() > mask_top.imag())
            mask_top = r.contour[i].value;
    Complex top = zeros.front();
    for (Complex z : zeros)
        if (std::abs(z - mask_top) < std::abs(top - mask_top)) top = z;

    ArcTrace arc = trace_arc(ev, top, 0.5 * spacing, Complex(0.0, 0.0), zeros);
    REQUIRE(arc.points.size() > 5);
    CHECK(arc.max_re_residual <= 1e-6);

    // The traced arc stays within two node spacings of the support polyline.
    CompactSet traced, support;
    for (Complex z : arc.points) traced.points.push_back(SlitPoint(z));
    for (std::size_t i = 0; i < r.contour.size(); ++i)
        if (r.solution.support_mask[i]) support.points.push_back(r.contour[i]);
    double d = directed_set_distance(traced, support, A);
    CHECK(d <= 2.0 * spacing);

    // Refinement sweep: heading change per step shrinks with the step.
    auto max_turn = [&](double step) {
        ArcTrace a = trace_arc(ev, top, step, Complex(0.0, 0.0), zeros, 300);
        double worst = 0.0;
        for (std::size_t k = 2; k < std::min<std::size_t>(a.points.size(), 100); ++k) {
            Complex d1 = a.points[k - 1] - a.points[k - 2];
            Complex d2 = a.points[k] - a.points[k - 1];
            if (std::abs(d1) < 1e-300 || std::abs(d2) < 1e-300) continue;
            worst = std::max(worst, std::abs(std::arg(d2 / d1)));
        }
        return worst;
    };
    CHECK(max_turn(0.25 * spacing) <= 0.6 * max_turn(spacing) + 1e-6);
}

TEST_CASE("degenerate configuration: far-field of the quadratic function") {
    // At x=t=0 the wrapped contour maximizes only against one-sided
    // variations (it presses on the slit), so the interior stationarity
    // identity does not apply near the support; the far field is still
    // pinned by the density: R -> pi^2.
    FieldModel f = sech_field(0.0, 0.0);
    Contour f0 = Contour::wrapped_slit(A, 101);
    EquilibriumSolution sol = solve_equilibrium(f0, f, SolverOptions{});
    SignedSupport s = SignedSupport::from_measure(sol.measure);
    RmuEvaluator ev(s, f);
    CHECK(std::abs(ev(Complex(2.0, 2.0)) - M_PI * M_PI) < 0.05 * M_PI * M_PI);
    CHECK(std::abs(ev(Complex(0.0, 10.0)) - M_PI * M_PI) < 0.01 * M_PI * M_PI);
    // The corrector invariant holds along any traced level line.
    double spacing = f0.mean_spacing();
    ArcTrace arc = trace_arc(ev, Complex(0.6, 1.1), 0.5 * spacing, Complex(0.6, 0.0));
    CHECK(arc.points.size() > 10);
    CHECK(arc.max_re_residual <= 1e-6);
}

TEST_CASE("s-property verification at the maximizer and a bowed contour") {
    const auto& run = converged();
    const MaxMinResult& r = run.result;
    SignedSupport s = SignedSupport::from_measure(r.solution.measure);
    RmuEvaluator ev(s, run.field);
    SCurveReport rep = verify_s_property(r.contour, r.solution, run.field, 0.0, &ev);
    REQUIRE(!rep.checks.empty());
    CHECK(rep.max_mismatch <= 5e-2);
    CHECK(rep.sign_violations == 0);
    CHECK(!rep.band_endpoints.empty());

    // A deliberately bowed contour fails the check.
    FieldModel f = run.field;
    Contour off = bowed_lens(0.45, 121);
    EquilibriumSolution sol_off = solve_equilibrium(off, f, SolverOptions{});
    SCurveReport rep_off = verify_s_property(off, sol_off, f);
    REQUIRE(!rep_off.checks.empty());
    CHECK(rep_off.max_mismatch > 0.1);
}
