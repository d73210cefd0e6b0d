#include <doctest.h>

#include <cmath>
#include <random>

#include "scurve/field.hpp"
#include "scurve/quadrature.hpp"

using namespace scurve;

namespace {
const double A = 1.0;

FieldModel sech_field(double x, double t) {
    FieldParams p;
    p.x = x;
    p.t = t;
    return FieldModel(DensityModel::constant(A), p);
}
}  // namespace

TEST_CASE("green function pinned values and symmetry") {
    CHECK(green_upper(Complex(0.7, 0.0), Complex(0, 1)) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(green_upper(Complex(0, 1), Complex(0, 2)) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-14));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> v(0.05, 3.0);
    for (int i = 0; i < 100; ++i) {
        Complex z(u(rng), v(rng)), eta(u(rng), v(rng));
        if (std::abs(z - eta) < 1e-6) continue;
        CHECK(green_upper(z, eta) == doctest::Approx(green_upper(eta, z)).epsilon(1e-12));
        CHECK(green_upper(z, eta) >= 0.0);
    }
    CHECK_THROWS_AS(green_upper(Complex(0, 1), Complex(0, 1)), std::domain_error);
}

TEST_CASE("wkb density of the sech amplitude is the constant i") {
    auto amp = [](double x) { return A / std::cosh(x); };
    for (double y : {0.15, 0.5, 0.85}) {
        Complex rho = rho0_wkb(Complex(0.0, y), amp);
        CHECK(std::abs(rho - Complex(0.0, 1.0)) < 1e-6);
        CHECK(rho.imag() > 0.0);
    }
    // Turning points satisfy amp(x)^2 + eta^2 = 0.
    double y = 0.37;
    double xp = std::acosh(A / y);
    CHECK(std::abs(amp(xp) * amp(xp) - y * y) < 1e-10);
}

TEST_CASE("sampled density model io and validation") {
    auto fn = [](double y) { return Complex(0.0, 1.0 + 0.2 * y * (A - y)); };
    DensityModel d = DensityModel::sampled(fn, A, 16);
    d.validate();
    // Interpolation reproduces the function off the nodes.
    for (double y : {0.11, 0.43, 0.77})
        CHECK(std::abs(d.rho_upper(Complex(0.0, y)) - fn(y)) < 1e-10);
    // Symmetric extension.
    Complex z(0.4, -0.3);
    CHECK(std::abs(d.rho_ext(z) - std::conj(d.rho_upper(std::conj(z)))) < 1e-15);

    d.write("density_rt.txt");
    DensityModel back = DensityModel::read("density_rt.txt");
    CHECK(back.kind == DensityModel::Kind::sampled);
    for (double y : {0.2, 0.6})
        CHECK(std::abs(back.rho_upper(Complex(0.0, y)) - d.rho_upper(Complex(0.0, y))) < 1e-12);

    DensityModel c = DensityModel::constant(A);
    c.write("density_const.txt");
    CHECK(DensityModel::read("density_const.txt").kind == DensityModel::Kind::constant_i);

    // A density with negative imaginary part on the slit is rejected.
    CHECK_THROWS(DensityModel::sampled([](double) { return Complex(0.0, -1.0); }, A).validate());
}

TEST_CASE("background measure mass converges") {
    DensityModel d = DensityModel::constant(A);
    BackgroundMeasure m1 = BackgroundMeasure::build(d, 256);
    BackgroundMeasure m2 = BackgroundMeasure::build(d, 512);
    CHECK(std::abs(m1.total_mass() - m2.total_mass()) < 1e-8);
    CHECK(m1.total_mass() == doctest::Approx(A).epsilon(1e-12));
    for (double w : m1.w) CHECK(w >= 0.0);
}

TEST_CASE("phi pinned values for the sech case") {
    FieldModel f = sech_field(0.0, 0.0);
    // Negative real axis: phi(z) = pi |z|.
    CHECK(f.phi(Complex(-0.5, 0.0)) == doctest::Approx(M_PI * 0.5).epsilon(1e-9));
    for (double xx : {-1.5, -0.7, -0.1})
        CHECK(f.phi(Complex(xx, 0.0)) > 0.0);
    // phi -> 0 at the origin.
    CHECK(std::abs(f.phi(SlitPoint::zero_plus())) < 1e-9);
    CHECK(std::abs(f.phi(Complex(0.0, 1e-5), Side::plus))< 1e-3);

    // Upward derivative on the positive axis for t > 0.
    FieldModel ft = sech_field(1.0, 0.5);
    double h = 1e-5;
    double d = (ft.phi(Complex(1.0, 2.0 * h)) - ft.phi(Complex(1.0, h))) / h;
    CHECK(d > 0.0);
}

TEST_CASE("complexified field matches phi and its derivative") {
    FieldModel f = sech_field(0.3, 0.2);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ur(-1.5, 1.5);
    std::uniform_real_distribution<double> ui(0.05, 2.5);
    for (int i = 0; i < 50; ++i) {
        Complex z(ur(rng), ui(rng));
        if (std::abs(z.real()) < 0.15) z += Complex(0.3, 0.0);
        CHECK(f.V(z).real() == doctest::Approx(f.phi(z)).epsilon(1e-7));
    }
    // Finite-difference check of V'.
    for (Complex z : {Complex(0.8, 0.6), Complex(-1.1, 1.4), Complex(0.5, 2.2)}) {
        double h = 1e-5;
        Complex fd = (f.V(z + h) - f.V(z - h)) / (2.0 * h);
        Complex fd2 = (f.V(z + Complex(0, h)) - f.V(z - Complex(0, h))) / (2.0 * Complex(0, h));
        Complex vp = f.Vprime(z);
        CHECK(std::abs(fd - vp) / std::abs(vp) < 1e-6);
        CHECK(std::abs(fd2 - vp) / std::abs(vp) < 1e-6);
    }
}

TEST_CASE("V is antisymmetric under conjugation") {
    // V(conj z) = -conj(V(z)); the symmetric version would erase the field
    // term of the doubled energy.
    FieldModel f = sech_field(0.4, 0.3);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ur(-2.0, 2.0);
    std::uniform_real_distribution<double> ui(0.1, 2.0);
    for (int i = 0; i < 40; ++i) {
        Complex z(ur(rng), ui(rng));
        if (std::abs(z.real()) < 0.1) z += Complex(0.4, 0.0);
        Complex lhs = f.V(std::conj(z));
        Complex rhs = -std::conj(f.V(z));
        CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(rhs)));
    }
}

TEST_CASE("Vprime asymptotics") {
    FieldModel f = sech_field(0.2, 0.4);
    // V' + 4 i t z stays bounded along the imaginary axis.
    for (double r : {10.0, 100.0}) {
        Complex z(0.0, r);
        Complex rest = f.Vprime(z) + 4.0 * Complex(0, 1) * f.params.t * z;
        CHECK(std::abs(rest) < 10.0);
    }
    auto rest = [&](double r) {
        Complex z(0.0, r);
        return f.Vprime(z) + 4.0 * Complex(0, 1) * f.params.t * z;
    };
    CHECK(std::abs(rest(100.0) - rest(10.0)) < 0.05);
}

TEST_CASE("one-sided V across the slit") {
    FieldModel f = sech_field(0.0, 0.0);
    double y = 0.4;
    Complex vp = f.V(Complex(0.0, y), Side::plus);
    Complex vm = f.V(Complex(0.0, y), Side::minus);
    // Re V is continuous across the slit; Im V jumps by 2 pi (A - y) for the
    // constant density.
    CHECK(vp.real() == doctest::Approx(vm.real()).epsilon(1e-8));
    CHECK((vm - vp).imag() == doctest::Approx(2.0 * M_PI * (A - y)).epsilon(1e-8));
    CHECK_THROWS_AS(f.V(Complex(0.0, y)), std::domain_error);

    // One-sided values agree with nearby interior evaluations.
    CHECK(f.V(Complex(1e-4, y)).real() == doctest::Approx(vp.real()).epsilon(1e-3));
}
