#ifndef SCURVE_FIELD_HPP
#define SCURVE_FIELD_HPP

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scurve/geometry.hpp"

// External field machinery: spectral density rho0 on the slit, the background
// measure mu0 = -rho0(eta) d eta, the real field phi on the closed upper
// half-plane, and its complexification V with V' (log-potential form with the
// branch cut along the segment chi = [-iA, iA]).

namespace scurve {

// Upper half-plane Green's function log(|z - conj(eta)| / |z - eta|).
// Continuous extension: 0 when eta is real. Throws on z == eta.
double green_upper(Complex z, Complex eta);

// Semiclassical eigenvalue density for a bell-shaped amplitude a(x):
// rho(eta) = (eta/pi) * Int dx / sqrt(a(x)^2 + eta^2) between the turning
// points a(x+-) = |eta|; eta strictly inside the open slit (0, iA).
Complex rho0_wkb(Complex eta, const std::function<double(double)>& amplitude,
                 double x_search = 60.0, double tol = 1e-12);

class DensityModel {
  public:
    enum class Kind { constant_i, sampled };

    Kind kind = Kind::constant_i;
    double slit_height = 1.0;  // A

    static DensityModel constant(double slit_height);
    // Chebyshev-sampled density on [0, iA]; fn maps y in [0,A] to rho(iy).
    static DensityModel sampled(const std::function<Complex(double)>& fn, double slit_height,
                                int n_samples = 24);
    static DensityModel from_wkb(const std::function<double(double)>& amplitude,
                                 double slit_height, int n_samples = 24);

    // Density on the closed upper half-plane (holomorphic continuation of the
    // slit samples for the sampled kind; reliable near the slit region).
    Complex rho_upper(Complex z) const;
    // Symmetric extension rho(conj z) = conj(rho(z)) to the lower half-plane.
    Complex rho_ext(Complex z) const;

    // Grid checks of the defining sign conditions; throws on violation.
    void validate() const;

    void write(const std::string& path) const;
    static DensityModel read(const std::string& path);

    const std::vector<double>& sample_y() const { return y_; }
    const std::vector<Complex>& sample_rho() const { return rho_; }

  private:
    std::vector<double> y_;      // Chebyshev-Lobatto nodes on [0, A]
    std::vector<Complex> rho_;   // density values at i*y_
    std::vector<double> bary_;   // barycentric weights
};

struct FieldParams {
    double x = 0.0;  // space parameter, >= 0
    double t = 0.0;  // time parameter, >= 0
    void validate() const;
};

// Quadrature discretization of d mu0 = -rho0(eta) d eta on [0, iA]:
// nonnegative weights against nodes i*y_k.
struct BackgroundMeasure {
    std::vector<double> y;
    std::vector<double> w;  // Im rho0(i y_k) * quadrature weight

    static BackgroundMeasure build(const DensityModel& d, int n_nodes = 256);
    double total_mass() const;
};

class FieldModel {
  public:
    DensityModel density;
    FieldParams params;
    BackgroundMeasure mu0;
    double quad_tol = 1e-9;

    FieldModel() = default;
    FieldModel(DensityModel d, FieldParams p, int mu0_nodes = 256);

    double slit_height() const { return density.slit_height; }

    // External field on the closed upper half-plane. The side matters only on
    // the slit, where phi is continuous anyway; kept for interface symmetry.
    double phi(Complex z, Side side = Side::none) const;
    double phi(const SlitPoint& p) const;

    // Complexified field; Re V restricted to the upper half-plane equals phi.
    // V(conj z) = -conj(V(z)); the branch cut of the log integral lies on chi.
    Complex V(Complex z, Side side = Side::none) const;
    Complex Vprime(Complex z, Side side = Side::none) const;

    // Int_z^{iA} rho0, path inside the closed upper half-plane.
    Complex rho_path_integral(Complex z) const;

  private:
    Complex log_moment(Complex z, Side side) const;   // Int log(z-eta) rho_ext d eta over chi
    Complex cauchy_moment(Complex z, Side side) const;  // Int rho_ext/(z-eta) d eta over chi
    double green_part(Complex z) const;               // Int G(z; eta) d mu0
};

}  // namespace scurve

#endif
