#include "scurve/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace scurve {

namespace {

bool on_open_slit(const Complex& z, double a) {
    return z.real() == 0.0 && z.imag() > 0.0 && z.imag() < a;
}

bool taggable(const Complex& z, double a) {
    // Side tags are meaningful on the closed slit below the top: Re=0, 0<=Im<A.
    return z.real() == 0.0 && z.imag() >= 0.0 && z.imag() < a;
}

// Side coordinate used to separate the two slit sheets: +-chord to the slit
// top for tagged points, 0 otherwise. |s(p)-s(q)| is a pseudometric.
double side_coordinate(const SlitPoint& p, double a) {
    if (p.at_infinity || p.side == Side::none) return 0.0;
    SlitPoint top(Complex(0.0, a));
    double g = sphere_chord(p, top);
    return p.side == Side::plus ? g : -g;
}

}  // namespace

double sphere_chord(const SlitPoint& p, const SlitPoint& q) {
    if (p.at_infinity && q.at_infinity) return 0.0;
    if (p.at_infinity) return 2.0 / std::sqrt(1.0 + std::norm(q.value));
    if (q.at_infinity) return 2.0 / std::sqrt(1.0 + std::norm(p.value));
    double num = 2.0 * std::abs(p.value - q.value);
    return num / std::sqrt((1.0 + std::norm(p.value)) * (1.0 + std::norm(q.value)));
}

double chordal_distance(const SlitPoint& p, const SlitPoint& q, double slit_height) {
    double base = sphere_chord(p, q);
    if (p == q) return 0.0;
    double gap = std::abs(side_coordinate(p, slit_height) - side_coordinate(q, slit_height));
    double d = std::max(base, gap);
    if (d == 0.0 && !(p == q)) {
        // Same location, same effective side but different tag bookkeeping.
        d = 0.0;
    }
    return d;
}

double directed_set_distance(const CompactSet& a, const CompactSet& b, double slit_height) {
    if (a.points.empty() || b.points.empty())
        throw std::invalid_argument("directed_set_distance: empty set");
    double worst = 0.0;
    for (const auto& p : a.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : b.points) best = std::min(best, chordal_distance(p, q, slit_height));
        worst = std::max(worst, best);
    }
    return worst;
}

double hausdorff_distance(const CompactSet& a, const CompactSet& b, double slit_height) {
    return std::max(directed_set_distance(a, b, slit_height),
                    directed_set_distance(b, a, slit_height));
}

void Contour::validate() const {
    if (nodes.size() < 2) throw std::invalid_argument("contour: needs at least 2 nodes");
    if (slit_height <= 0.0) throw std::invalid_argument("contour: slit height must be positive");
    const SlitPoint& first = nodes.front();
    const SlitPoint& last = nodes.back();
    if (first.at_infinity || first.value != Complex(0, 0) || first.side != Side::plus)
        throw std::invalid_argument("contour: first node must be 0+");
    if (last.at_infinity || last.value != Complex(0, 0) || last.side != Side::minus)
        throw std::invalid_argument("contour: last node must be 0-");

    std::size_t infinities = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const SlitPoint& p = nodes[i];
        if (p.at_infinity) {
            if (i == 0 || i + 1 == nodes.size())
                throw std::invalid_argument("contour: endpoint at infinity");
            ++infinities;
            continue;
        }
        if (p.value.imag() < 0.0)
            throw std::invalid_argument("contour: node below the real axis");
        bool interior = i > 0 && i + 1 < nodes.size();
        if (interior && p.value.imag() == 0.0)
            throw std::invalid_argument("contour: interior node on the real axis");
        if (p.side != Side::none) {
            if (!taggable(p.value, slit_height))
                throw std::invalid_argument("contour: side tag off the slit");
        } else if (interior && on_open_slit(p.value, slit_height)) {
            throw std::invalid_argument("contour: untagged interior node on the open slit");
        }
        if (i > 0 && nodes[i - 1] == p)
            throw std::invalid_argument("contour: repeated node");
    }
    if (infinities > 1) throw std::invalid_argument("contour: more than one node at infinity");

    // Non-tangential approach to 0 at both ends.
    auto end_angle = [&](const SlitPoint& a, const SlitPoint& b) {
        if (a.at_infinity || b.at_infinity) return min_angle;  // unconstrained
        Complex d = b.value - a.value;
        if (std::abs(d) == 0.0) return min_angle;  // degenerate 0+ -> 0- contour
        double ang = std::atan2(std::abs(d.imag()), std::abs(d.real()));
        return ang;
    };
    for (auto ang : {end_angle(nodes[0], nodes[1]), end_angle(nodes.back(), nodes[nodes.size() - 2])}) {
        if (ang < min_angle - 1e-15)
            throw std::invalid_argument("contour: tangential approach to the real line at 0");
    }
}

double Contour::arclength() const {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        if (nodes[i].at_infinity || nodes[i + 1].at_infinity)
            throw std::invalid_argument("arclength: contour passes through infinity");
        s += std::abs(nodes[i + 1].value - nodes[i].value);
    }
    return s;
}

double Contour::mean_spacing() const { return arclength() / double(nodes.size() - 1); }

double Contour::cell_length(std::size_t i) const {
    double l = 0.0;
    if (i > 0 && !nodes[i].at_infinity && !nodes[i - 1].at_infinity)
        l += 0.5 * std::abs(nodes[i].value - nodes[i - 1].value);
    if (i + 1 < nodes.size() && !nodes[i].at_infinity && !nodes[i + 1].at_infinity)
        l += 0.5 * std::abs(nodes[i + 1].value - nodes[i].value);
    return l;
}

CompactSet Contour::as_set() const { return CompactSet{nodes}; }

void Contour::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    char buf[96];
    for (const auto& p : nodes) {
        if (p.at_infinity) {
            out << "inf\n";
            continue;
        }
        char flag = p.side == Side::plus ? '+' : (p.side == Side::minus ? '-' : '.');
        std::snprintf(buf, sizeof buf, "%.17g %.17g %c\n", p.value.real(), p.value.imag(), flag);
        out << buf;
    }
}

Contour Contour::read(const std::string& path, double slit_height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    Contour c;
    c.slit_height = slit_height;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line == "inf") {
            c.nodes.push_back(SlitPoint::infinity());
            continue;
        }
        std::istringstream ss(line);
        double re, im;
        char flag;
        if (!(ss >> re >> im >> flag)) throw std::runtime_error("bad contour line: " + line);
        Side s = flag == '+' ? Side::plus : (flag == '-' ? Side::minus : Side::none);
        c.nodes.emplace_back(Complex(re, im), s);
    }
    c.validate();
    return c;
}

Contour Contour::wrapped_slit(double slit_height, std::size_t n) {
    if (n < 3) throw std::invalid_argument("wrapped_slit: need at least 3 nodes");
    std::size_t m = n / 2;  // nodes per side, total 2m+1
    Contour c;
    c.slit_height = slit_height;
    c.nodes.reserve(2 * m + 1);
    for (std::size_t k = 0; k <= m; ++k) {
        double y = slit_height * double(k) / double(m);
        c.nodes.emplace_back(Complex(0.0, y), k == m ? Side::none : Side::plus);
    }
    for (std::size_t k = m; k-- > 0;) {
        double y = slit_height * double(k) / double(m);
        c.nodes.emplace_back(Complex(0.0, y), Side::minus);
    }
    c.validate();
    return c;
}

Contour Contour::wrapped_slit_opened(double slit_height, std::size_t n, double bow) {
    if (bow <= 0.0) return wrapped_slit(slit_height, n);
    Contour c = wrapped_slit(slit_height, n);
    std::size_t m = c.size();
    for (std::size_t i = 1; i + 1 < m; ++i) {
        double y = c[i].value.imag();
        bool ascending = 2 * i < m;
        double s = ascending ? y / slit_height : 2.0 - y / slit_height;  // in [0,2]
        Complex z;
        if (c[i].value == Complex(0.0, slit_height) && c[i].side == Side::none) {
            z = Complex(0.0, slit_height + bow);  // fold node moves straight up
        } else {
            double w = bow * std::sin(0.5 * M_PI * s);
            z = Complex(ascending ? w : -w, y);
        }
        c.nodes[i] = SlitPoint(z, Side::none);
    }
    c.validate();
    return c;
}

Contour Contour::circle_lens(double slit_height, std::size_t n, double radius) {
    // Teardrop around the slit: straight legs leaving 0 at a fixed angle,
    // joined by a circular arc over the slit top (the legs keep the approach
    // to 0 non-tangential).
    double d = radius > 0.0 ? radius : 0.6 * slit_height;
    double h = 0.9 * slit_height;
    if (h + d <= slit_height)
        throw std::invalid_argument("circle_lens: lens does not wrap the slit top");
    if (n < 7) throw std::invalid_argument("circle_lens: need at least 7 nodes");
    Complex pr(d, h), pl(-d, h), center(0.0, h);
    double leg = std::abs(pr);
    double arc = M_PI * d;
    double total = 2.0 * leg + arc;
    std::size_t n_leg = std::max<std::size_t>(2, std::size_t(double(n) * leg / total));
    std::size_t n_arc = n - 2 * n_leg;

    Contour c;
    c.slit_height = slit_height;
    c.nodes.reserve(n + 1);
    c.nodes.push_back(SlitPoint::zero_plus());
    for (std::size_t k = 1; k < n_leg; ++k)
        c.nodes.emplace_back(pr * (double(k) / double(n_leg)), Side::none);
    for (std::size_t k = 0; k < n_arc; ++k) {
        double th = M_PI * double(k) / double(n_arc - 1);
        Complex z = center + d * std::exp(Complex(0, th));
        if (std::abs(z.real()) < 1e-15) z = Complex(0.0, z.imag());
        c.nodes.emplace_back(z, Side::none);
    }
    for (std::size_t k = n_leg; k-- > 1;)
        c.nodes.emplace_back(pl * (double(k) / double(n_leg)), Side::none);
    c.nodes.push_back(SlitPoint::zero_minus());
    c.validate();
    return c;
}

namespace {

Side interpolated_side(const SlitPoint& a, const SlitPoint& b, const Complex& z, double A) {
    if (!(z.real() == 0.0 && z.imag() > 0.0 && z.imag() < A)) return Side::none;
    // On the open slit a tag is mandatory; inherit from the nearer tagged end.
    if (a.side != Side::none && b.side != Side::none) {
        if (a.side != b.side) throw std::invalid_argument("resample: segment joins opposite slit sides");
        return a.side;
    }
    if (a.side != Side::none) return a.side;
    if (b.side != Side::none) return b.side;
    throw std::invalid_argument("resample: untagged segment crosses the slit");
}

}  // namespace

Contour resample_contour(const Contour& c, std::size_t n) {
    if (n < 2) throw std::invalid_argument("resample: n must be >= 2");
    for (const auto& p : c.nodes)
        if (p.at_infinity) throw std::invalid_argument("resample: contour passes through infinity");
    if (n == 2 && c.nodes.size() == 2) return c;

    // Geometric chord lengths: side tags separate the sheets in the metric
    // but do not stretch a continuous path.
    std::vector<double> cum(c.nodes.size(), 0.0);
    for (std::size_t i = 1; i < c.nodes.size(); ++i)
        cum[i] = cum[i - 1] + sphere_chord(c.nodes[i - 1], c.nodes[i]);
    double total = cum.back();

    Contour out;
    out.slit_height = c.slit_height;
    out.min_angle = c.min_angle;
    out.nodes.reserve(n);
    out.nodes.push_back(c.nodes.front());
    std::size_t seg = 0;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        double target = total * double(k) / double(n - 1);
        while (seg + 2 < c.nodes.size() && cum[seg + 1] < target) ++seg;
        double denom = cum[seg + 1] - cum[seg];
        double t = denom > 0.0 ? (target - cum[seg]) / denom : 0.0;
        Complex z = c.nodes[seg].value + t * (c.nodes[seg + 1].value - c.nodes[seg].value);
        if (std::abs(z.real()) < 1e-300) z = Complex(0.0, z.imag());
        Side s = interpolated_side(c.nodes[seg], c.nodes[seg + 1], z, c.slit_height);
        SlitPoint p(z, s);
        if (!(p == out.nodes.back())) out.nodes.push_back(p);
    }
    out.nodes.push_back(c.nodes.back());
    out.validate();
    return out;
}

std::pair<Complex, Complex> normal_directions(const Contour& c, std::size_t i) {
    if (i == 0 || i + 1 >= c.nodes.size())
        throw std::invalid_argument("normal_directions: index is not interior");
    if (c.nodes[i - 1].at_infinity || c.nodes[i].at_infinity || c.nodes[i + 1].at_infinity)
        throw std::invalid_argument("normal_directions: neighbor at infinity");
    Complex t = c.nodes[i + 1].value - c.nodes[i - 1].value;
    if (std::abs(t) < 1e-300) throw std::invalid_argument("normal_directions: degenerate tangent");
    t /= std::abs(t);
    Complex left = Complex(0, 1) * t;   // left of the orientation
    return {left, -left};
}

}  // namespace scurve
