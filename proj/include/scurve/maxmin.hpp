#ifndef SCURVE_MAXMIN_HPP
#define SCURVE_MAXMIN_HPP

#include <array>
#include <optional>
#include <vector>

#include "scurve/equilibrium.hpp"

// Outer maximization over contours. Measures are doubled to the lower
// half-plane with negated weights, the weighted Green energy becomes a signed
// logarithmic energy against Re V, and contour derivatives come from the
// Schiffer-variation functional H(mu,h).

namespace scurve {

// Positive part (upper sheet) of the signed extension; the mirror copy at
// conj(u) with weight -w is implicit.
struct SignedSupport {
    std::vector<Complex> nodes;
    Eigen::VectorXd weights;       // > 0
    std::vector<double> cell;      // discretization cell length per node
    std::vector<Side> sides;       // slit tags where applicable
    std::vector<bool> averaged;    // merged two-sided slit nodes
    std::vector<int> orig;         // index into the host contour

    static SignedSupport from_measure(const DiscreteMeasure& mu, double mass_tol = 1e-10,
                                      bool aggregate = true);
    std::size_t size() const { return nodes.size(); }
    double total_mass() const { return weights.sum(); }
    // V' at node k resolved by the node's side (averaged across the slit for
    // merged nodes).
    Complex vprime_at(const FieldModel& f, std::size_t k) const;
};

// Explicit two-sheet node list (positions, signed weights).
struct TwoSheetMeasure {
    std::vector<Complex> pos;
    std::vector<double> w;
    std::vector<double> cell;
    std::vector<Side> side;
};

TwoSheetMeasure expand(const SignedSupport& s);

// Signed logarithmic energy sum_{k!=l} W_k W_l log 1/|U_k-U_l| (+ exact cell
// self-terms) + 2 sum W_k Re V(U_k). Equals twice the weighted Green energy of
// the upper measure.
double signed_log_energy(const TwoSheetMeasure& m, const FieldModel& f);

// Deformation field sampled on the signed support (upper and mirror values,
// plus the diagonal limits of (h(u)-h(v))/(u-v)).
struct DeformationValues {
    std::vector<Complex> h_up, diag_up;
    std::vector<Complex> h_lo, diag_lo;
};

// h(u) = u^2/(u-z), evaluated on both sheets; pole z must avoid the support.
DeformationValues schiffer_pole(const SignedSupport& s, Complex z);
// h(u) = prod (u - a_i) / (u - z).
DeformationValues pinned_pole(const SignedSupport& s, const std::vector<Complex>& pins, Complex z);

// Smooth normal displacement bump sin(pi * b * arclength fraction) * normal,
// sampled at every contour node (endpoints fixed).
struct ContourField {
    std::vector<Complex> h, diag;
};
ContourField normal_bump(const Contour& c, int b);
// Conjugate-symmetric restriction of a contour field to the support nodes.
DeformationValues restrict_field(const ContourField& cf, const SignedSupport& s);

// H(mu,h) = sum sum (h(u)-h(v))/(u-v) dmu dmu - 2 sum V'(u) h(u) dmu over the
// signed extension. The energy derivative along u -> u + tau h(u) is Re(-H).
Complex schiffer_H(const SignedSupport& s, const DeformationValues& dv, const FieldModel& f);
double schiffer_derivative(const SignedSupport& s, const DeformationValues& dv,
                           const FieldModel& f);

// Transport both sheets by tau * h (finite-difference oracle for Re(-H)).
TwoSheetMeasure transport(const SignedSupport& s, const DeformationValues& dv, double tau);

struct MaxMinOptions {
    int basis_size = 16;
    double stat_tol = 1e-4;       // relative to |energy|
    int max_outer = 100;
    int max_backtracks = 30;
    double initial_step = 0.05;
    SolverOptions inner;
};

struct MaxMinResult {
    Contour contour;
    EquilibriumSolution solution;
    std::vector<std::array<double, 3>> trace;  // iter, energy, stationarity residual
    std::vector<double> gradient;              // last basis derivatives
    bool converged = false;
};

MaxMinResult maximize_contour(const Contour& c0, const FieldModel& f,
                              const MaxMinOptions& opt = {});

// Quadratic function whose square root's vertical level lines trace the
// support arcs; endpoints of the arcs are its zeros.
class RmuEvaluator {
  public:
    RmuEvaluator(SignedSupport s, const FieldModel& f);

    Complex operator()(Complex z) const;
    Complex cauchy(Complex z) const;  // int dmu / (u - z), both sheets
    Complex moment_const() const { return c1_; }
    Complex moment_linear() const { return c2_; }
    const SignedSupport& support() const { return mu_; }
    const FieldModel& field() const { return *f_; }

  private:
    SignedSupport mu_;
    const FieldModel* f_;
    std::vector<Complex> vp_;
    Complex c1_{0.0, 0.0}, c2_{0.0, 0.0};
};

// |Re (cauchy + V')^2 - Re R_mu| at z; vanishes at the maximizer.
double quadratic_identity_residual(const RmuEvaluator& ev, Complex z);

std::vector<Complex> find_endpoints(const RmuEvaluator& ev, const std::vector<Complex>& seeds,
                                    double tol = 1e-8);

struct ArcTrace {
    enum class Stop { endpoint, real_axis, branch_point, max_steps };
    std::vector<Complex> points;
    double max_re_residual = 0.0;  // cumulative |Re int sqrt(R) dz| along the arc
    Stop stop = Stop::max_steps;
};

ArcTrace trace_arc(const RmuEvaluator& ev, Complex from, double step, Complex aim,
                   const std::vector<Complex>& known_zeros = {}, int max_steps = 4000);

struct SNodeCheck {
    std::size_t node = 0;
    double d_plus = 0.0;   // one-sided normal difference quotients of phi + V^mu
    double d_minus = 0.0;
    double mismatch = 0.0;
    double offset = 0.0;
};

struct SCurveReport {
    std::vector<SNodeCheck> checks;
    double max_mismatch = 0.0;
    int sign_violations = 0;  // sides where the outward slope is positive
    std::vector<Complex> band_endpoints;
    std::vector<double> endpoint_rmu_residuals;
};

SCurveReport verify_s_property(const Contour& c, const EquilibriumSolution& sol,
                               const FieldModel& f, double offset = 0.0,
                               const RmuEvaluator* ev = nullptr);

}  // namespace scurve

#endif
