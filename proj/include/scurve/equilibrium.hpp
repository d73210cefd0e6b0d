#ifndef SCURVE_EQUILIBRIUM_HPP
#define SCURVE_EQUILIBRIUM_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "scurve/field.hpp"
#include "scurve/geometry.hpp"

// Inner minimization: discretize positive measures on a contour by node
// weights (piecewise-constant density on each node's half-segments) and solve
// the weighted-energy quadratic program with nonnegativity constraints.

namespace scurve {

struct DiscreteMeasure {
    Contour host;
    Eigen::VectorXd weights;  // mass per node, >= 0

    std::size_t size() const { return host.size(); }
    double total_mass() const { return weights.sum(); }
};

struct GreenKernelMatrix {
    Eigen::MatrixXd K;
    // Smallest eigenvalue over the scale of K; checked against a PSD tolerance.
    double psd_margin() const;
};

// K[i][j] = G(z_i, z_j), i != j; diagonal from the exact self-integration of a
// uniform density over the node's cell against the log kernel.
GreenKernelMatrix kernel_matrix(const Contour& c);

double green_energy(const DiscreteMeasure& mu);
double green_energy(const DiscreteMeasure& mu, const GreenKernelMatrix& km);

// Green potential of the measure at z, with segment averaging when z comes
// within a cell length of a node.
double green_potential(const DiscreteMeasure& mu, Complex z);

double weighted_energy(const DiscreteMeasure& mu, const FieldModel& f);

struct EquilibriumSolution {
    DiscreteMeasure measure;
    double energy = 0.0;        // weighted energy at the minimizer
    double kkt_residual_supp = 0.0;  // max |Kw+phi| on the support
    double kkt_residual_off = 0.0;   // max(0, -(Kw+phi)) off the support
    std::vector<bool> support_mask;
    std::optional<Complex> b0;  // upper endpoint when the support is one imaginary arc
    bool converged = false;
    int iterations = 0;
};

struct SolverOptions {
    double tol = 1e-6;        // KKT tolerance
    double mass_tol = 1e-10;  // support threshold
    int max_iterations = 20000;
};

// Low-level QP: minimize w^T K w + 2 phi^T w over w >= 0, w_i = 0 for pinned i.
// Projected Barzilai-Borwein gradient phase plus an active-set polish.
Eigen::VectorXd solve_qp(const Eigen::MatrixXd& K, const Eigen::VectorXd& phi,
                         const std::vector<bool>& pinned, const SolverOptions& opt,
                         int* iterations = nullptr);

EquilibriumSolution solve_equilibrium(const Contour& c, const FieldModel& f,
                                      const SolverOptions& opt = {});

// Green balayage onto the contour q: nonnegative weights on q matching the
// potential of mu at q's nodes in least squares.
DiscreteMeasure balayage(const DiscreteMeasure& mu, const Contour& q,
                         const SolverOptions& opt = {});

struct ContinuityProbe {
    double base_energy = 0.0;
    std::vector<double> deviations;  // |E[c'] - E[c]| per accepted sample
    int rejected = 0;                // perturbations violating the invariants
    double median_deviation() const;
};

ContinuityProbe continuity_probe(const Contour& c, const FieldModel& f, double scale,
                                 unsigned long long seed, int samples = 20,
                                 const SolverOptions& opt = {});

}  // namespace scurve

#endif
