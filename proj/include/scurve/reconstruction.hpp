#ifndef SCURVE_RECONSTRUCTION_HPP
#define SCURVE_RECONSTRUCTION_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "scurve/maxmin.hpp"

// From the converged equilibrium measure to the modulated multi-phase
// wavetrain: band/gap partition, hyperelliptic surface over the band
// endpoints, normalized differentials, period matrix, theta series, and the
// wavetrain parameters.

namespace scurve {

// g(lambda) = int log(lambda - eta) d(signed measure): the conjugate pairing
// log[(lambda-u)/(lambda-conj u)] keeps each term's branch cut on the chord
// joining u to conj(u).
Complex g_function(Complex lambda, const SignedSupport& mu);

struct BandGapPartition {
    int genus = 0;                             // G, even
    std::vector<Complex> endpoints;            // lambda_0 .. lambda_G
    std::vector<std::vector<Complex>> bands;   // band polylines (upper sheet), bands[0] starts at 0
    std::vector<std::vector<Complex>> gaps;    // gap polylines, gaps[n] joins band n-1 to band n
    std::vector<double> theta;                 // gap constants theta_1..theta_{G/2} (index 0 = theta_1)
    std::vector<double> alpha;                 // band constants alpha_0..alpha_{G/2}
    double theta_deviation = 0.0;              // worst constancy defect over gaps
    double alpha_deviation = 0.0;              // worst constancy defect over bands
    double reality_defect = 0.0;               // worst |Im| of the band/gap functions
};

// Jump functions on the contour: theta = i(g+ - g-), Phi = i(g+ + g- - 2V).
// Constants are medians over interior nodes; constancy failures beyond tol
// signal a non-converged S-curve.
BandGapPartition theta_phi_on_contour(const Contour& c, const EquilibriumSolution& sol,
                                      const FieldModel& f, double tol = 1e-2);

// Square-root branch structure over the band endpoints.
struct SurfaceCuts {
    std::optional<std::array<Complex, 2>> central;     // self-conjugate cut (low, high)
    std::vector<std::array<Complex, 2>> upper;         // strictly upper cuts; conjugates implied
    int genus() const { return (central ? 1 : 0) + 2 * int(upper.size()) - 1; }
    std::vector<std::array<Complex, 2>> chain() const;  // all cuts ordered bottom to top
};

SurfaceCuts cuts_from_partition(const BandGapPartition& part);

// R(lambda): cut along the band chords, R(lambda)/lambda^{G+1} -> -1,
// R(conj lambda) = conj(R(lambda)).
Complex R_lambda(Complex z, const SurfaceCuts& cuts);

// Cauchy-type function with the prescribed jumps -theta_n/R on gaps and
// -alpha_n/R_+ on bands; H = k R is bounded with polynomial growth.
Complex k_lambda(Complex z, const BandGapPartition& part, const SurfaceCuts& cuts,
                 double tol = 1e-9);
Complex H_lambda(Complex z, const BandGapPartition& part, const SurfaceCuts& cuts,
                 double tol = 1e-9);

// Real coefficients p_G..p_0 of the polynomial part of H at infinity
// (index i holds the coefficient of lambda^i).
std::vector<Complex> p_polynomial(const BandGapPartition& part, const SurfaceCuts& cuts,
                                  double tol = 1e-10);

struct SurfaceData {
    SurfaceCuts cuts;
    std::vector<std::vector<Complex>> a_loops;        // closed sheet-1 polylines
    std::vector<std::array<Complex, 2>> b_pairs;      // branch points joined by each b-cycle
    Eigen::MatrixXcd coeff;                           // c_{km}: nu_k = sum_m c_{km} lambda^m / R_X
    Eigen::MatrixXcd period;                          // H_{jk} = oint_{b_j} nu_k
    Complex base_point;                               // P0, sheet 1
    double condition = 0.0;                           // a-cycle system conditioning
    double quad_tol = 1e-10;

    int genus() const { return cuts.genus(); }
    Complex R(Complex z) const { return R_lambda(z, cuts); }
    Complex nu(Complex z, int sheet, int k) const;    // differential density
};

// Geometry only (cycle paths); differentials/periods filled by the two calls
// below.
SurfaceData build_surface(const SurfaceCuts& cuts);

// Solves the a-cycle normalization oint_{a_j} nu_k = 2 pi i delta_{jk}.
void holomorphic_differentials(SurfaceData& sd);
// Fills the b-period matrix; throws if symmetry or Re-negative-definiteness
// fail beyond tolerance.
void period_matrix(SurfaceData& sd, double sym_tol = 1e-6);

// Theta series with truncation from the spectral bound of Re H.
Complex theta_sum(const Eigen::VectorXcd& w, const Eigen::MatrixXcd& H, double tail = 1e-14);

// Abel map from the base point along a straight chain avoiding the cuts.
Eigen::VectorXcd abel_map(Complex P, int sheet, const SurfaceData& sd);
Eigen::VectorXcd abel_map_infinity(const SurfaceData& sd);

Eigen::VectorXcd riemann_constant(const SurfaceData& sd, int loop_samples = 2048);

// Second-kind differential with dp behavior at the two infinities and zero
// a-periods; returns its b-periods U (plus the raw data via pointers).
Eigen::VectorXcd omega_b_periods(const SurfaceData& sd, const std::vector<Complex>& p,
                                 std::vector<Complex>* f_coeffs = nullptr,
                                 Eigen::VectorXcd* a_residuals = nullptr);

struct ThetaParams {
    int genus = 0;
    double hbar = 1.0;
    double U0 = 0.0, k0 = 0.0, w0 = 0.0;
    Eigen::VectorXcd U, kvec, wvec;  // length G
    Eigen::VectorXcd V1, V2, Y, Z;
    Complex amplitude{0.0, 0.0};     // a
    Eigen::MatrixXcd period;
};

// Wavetrain value at fast variables (xhat, that). Throws if the denominator
// theta falls below 1e-12 in magnitude.
Complex assemble_psi(const ThetaParams& tp, double xhat, double that);

// Scalar phase data at slow variables (x,t): U0 plus the U vector.
using StateProvider = std::function<std::pair<double, Eigen::VectorXd>(double x, double t)>;

struct ReconstructionResult {
    BandGapPartition partition;
    std::optional<SurfaceData> surface;
    ThetaParams params;
};

// Full pipeline at slow variables (x0,t0); the provider supplies U0/U at
// perturbed (x,t) for the finite-difference wavenumbers and frequencies.
ReconstructionResult reconstruct(const Contour& c, const EquilibriumSolution& sol,
                                 const FieldModel& f, double hbar,
                                 const StateProvider& provider, double x0, double t0,
                                 double fd_step = 1e-3);

}  // namespace scurve

#endif
