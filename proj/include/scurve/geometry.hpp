#ifndef SCURVE_GEOMETRY_HPP
#define SCURVE_GEOMETRY_HPP

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Points, contours and finite compact sets in the closed upper half-plane
// with a two-sided vertical slit from 0 to i*A. The two sides of the slit
// are distinct points of the space and carry a side tag.

namespace scurve {

using Complex = std::complex<double>;

enum class Side : int { plus = +1, minus = -1, none = 0 };

struct SlitPoint {
    Complex value{0.0, 0.0};
    Side side = Side::none;
    bool at_infinity = false;

    SlitPoint() = default;
    SlitPoint(Complex v, Side s = Side::none) : value(v), side(s) {}

    static SlitPoint zero_plus() { return SlitPoint(Complex(0, 0), Side::plus); }
    static SlitPoint zero_minus() { return SlitPoint(Complex(0, 0), Side::minus); }
    static SlitPoint infinity() {
        SlitPoint p;
        p.at_infinity = true;
        return p;
    }

    bool operator==(const SlitPoint& o) const {
        if (at_infinity || o.at_infinity) return at_infinity == o.at_infinity;
        return value == o.value && side == o.side;
    }
};

// Stereographic chord between two points of the Riemann sphere, d(0,inf)=2.
double sphere_chord(const SlitPoint& p, const SlitPoint& q);

// Metric on the slit space. Equals sphere_chord away from the slit; points on
// opposite slit sides are separated by the path over the slit top i*A.
double chordal_distance(const SlitPoint& p, const SlitPoint& q, double slit_height);

struct CompactSet {
    std::vector<SlitPoint> points;
};

double hausdorff_distance(const CompactSet& a, const CompactSet& b, double slit_height);
// One-sided sup-inf distance max_{p in a} min_{q in b} d(p,q).
double directed_set_distance(const CompactSet& a, const CompactSet& b, double slit_height);

class Contour {
  public:
    std::vector<SlitPoint> nodes;
    double slit_height = 1.0;   // A
    double min_angle = 0.1;     // non-tangential approach bound at the endpoints

    Contour() = default;
    Contour(std::vector<SlitPoint> n, double a) : nodes(std::move(n)), slit_height(a) { validate(); }

    std::size_t size() const { return nodes.size(); }
    const SlitPoint& operator[](std::size_t i) const { return nodes[i]; }

    // Throws std::invalid_argument describing the first violated invariant.
    void validate() const;

    // Euclidean polyline arclength (infinite-node contours are rejected).
    double arclength() const;
    // Characteristic spacing: arclength / (#segments).
    double mean_spacing() const;
    // Length of the node's adjacent half-segments (used as the cell size of a
    // piecewise-constant density attached to the node).
    double cell_length(std::size_t i) const;

    CompactSet as_set() const;

    void write(const std::string& path) const;
    static Contour read(const std::string& path, double slit_height);

    // Ladder hugging both sides of the slit: 0+ up the plus side, through iA,
    // down the minus side to 0-. Node count is rounded to the nearest odd value.
    static Contour wrapped_slit(double slit_height, std::size_t n);
    // Wrapped slit opened sideways into a smooth lens of half-width `bow`.
    static Contour wrapped_slit_opened(double slit_height, std::size_t n, double bow);
    // Teardrop through 0 around the slit: straight legs plus an arc over the top.
    static Contour circle_lens(double slit_height, std::size_t n, double radius = 0.0);
};

Contour resample_contour(const Contour& c, std::size_t n);

// Unit normals (left, right of the orientation) at interior node i.
std::pair<Complex, Complex> normal_directions(const Contour& c, std::size_t i);

}  // namespace scurve

#endif
