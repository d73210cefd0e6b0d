#include <doctest.h>

#include <cmath>
#include <random>

#include "scurve/geometry.hpp"

using namespace scurve;

namespace {

const double A = 1.0;

SlitPoint random_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double kind = u(rng);
    if (kind < 0.04) return SlitPoint::infinity();
    if (kind < 0.12) return SlitPoint(Complex(4.0 * u(rng) - 2.0, 0.0));  // real axis
    if (kind < 0.30) {
        // Tagged slit points.
        double y = 0.999 * A * u(rng);
        return SlitPoint(Complex(0.0, y), u(rng) < 0.5 ? Side::plus : Side::minus);
    }
    double re = 4.0 * u(rng) - 2.0;
    double im = 3.0 * u(rng);
    if (re == 0.0 && im > 0.0 && im < A) re = 0.5;  // keep untagged points off the slit
    return SlitPoint(Complex(re, im));
}

Contour semicircle_arc(std::size_t n) {
    // Circular arc contour used for resampling checks.
    return Contour::circle_lens(A, n);
}

}  // namespace

TEST_CASE("chordal distance pinned values") {
    CHECK(chordal_distance(SlitPoint::zero_plus(), SlitPoint::zero_plus(), A) == 0.0);
    CHECK(chordal_distance(SlitPoint(Complex(0, 0), Side::plus), SlitPoint::infinity(), A) ==
          doctest::Approx(2.0).epsilon(1e-14));
    CHECK(chordal_distance(SlitPoint(Complex(1, 0)), SlitPoint(Complex(-1, 0)), A) ==
          doctest::Approx(2.0).epsilon(1e-14));
    // Direct evaluation of the chordal formula away from the slit.
    SlitPoint p(Complex(0.3, 0.7)), q(Complex(-1.2, 2.0));
    double expect = 2.0 * std::abs(p.value - q.value) /
                    std::sqrt((1.0 + std::norm(p.value)) * (1.0 + std::norm(q.value)));
    CHECK(chordal_distance(p, q, A) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("opposite slit sides separated by the path over the slit top") {
    SlitPoint top(Complex(0.0, A));
    SlitPoint p(Complex(0.0, 0.25), Side::plus);
    SlitPoint q(Complex(0.0, 0.25), Side::minus);
    double want = sphere_chord(p, top) + sphere_chord(top, q);
    CHECK(chordal_distance(p, q, A) == doctest::Approx(want).epsilon(1e-14));
    CHECK(chordal_distance(SlitPoint::zero_plus(), SlitPoint::zero_minus(), A) > 0.5);
}

TEST_CASE("chordal distance is a metric on random triples") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 10000; ++trial) {
        SlitPoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
        double dab = chordal_distance(a, b, A);
        double dba = chordal_distance(b, a, A);
        CHECK(dab == doctest::Approx(dba).epsilon(1e-12));
        double dac = chordal_distance(a, c, A);
        double dcb = chordal_distance(c, b, A);
        CHECK(dab <= dac + dcb + 1e-12);
        if (a == b) CHECK(dab == 0.0);
        if (dab == 0.0) CHECK(a == b);
    }
}

TEST_CASE("hausdorff distance basics and brute force") {
    CompactSet s1{{SlitPoint(Complex(0.2, 0.5)), SlitPoint(Complex(1.0, 1.0)),
                   SlitPoint(Complex(-0.5, 2.0))}};
    CompactSet s2{{SlitPoint(Complex(0.1, 0.4)), SlitPoint(Complex(1.5, 0.7)),
                   SlitPoint(Complex(-0.8, 1.6))}};
    CHECK(hausdorff_distance(s1, s1, A) == 0.0);

    SlitPoint p(Complex(0.3, 0.9)), q(Complex(-1.0, 0.2));
    CompactSet sp{{p}}, sq{{q}};
    CHECK(hausdorff_distance(sp, sq, A) ==
          doctest::Approx(chordal_distance(p, q, A)).epsilon(1e-14));

    // Exhaustive pairwise min-max.
    auto directed = [&](const CompactSet& x, const CompactSet& y) {
        double worst = 0.0;
        for (const auto& a : x.points) {
            double best = 1e300;
            for (const auto& b : y.points) best = std::min(best, chordal_distance(a, b, A));
            worst = std::max(worst, best);
        }
        return worst;
    };
    double brute = std::max(directed(s1, s2), directed(s2, s1));
    CHECK(hausdorff_distance(s1, s2, A) == doctest::Approx(brute).epsilon(1e-14));

    CHECK_THROWS(hausdorff_distance(CompactSet{}, s1, A));
}

TEST_CASE("hausdorff metric axioms on random finite sets") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> size(1, 5);
    auto random_set = [&]() {
        CompactSet s;
        int n = size(rng);
        for (int i = 0; i < n; ++i) s.points.push_back(random_point(rng));
        return s;
    };
    for (int trial = 0; trial < 2000; ++trial) {
        CompactSet a = random_set(), b = random_set(), c = random_set();
        double dab = hausdorff_distance(a, b, A);
        CHECK(dab == doctest::Approx(hausdorff_distance(b, a, A)).epsilon(1e-12));
        CHECK(dab <= hausdorff_distance(a, c, A) + hausdorff_distance(c, b, A) + 1e-12);
    }
    // Nested sets have zero one-sided distance.
    CompactSet big = random_set();
    big.points.push_back(SlitPoint(Complex(0.4, 0.4)));
    CompactSet small{{big.points[0]}};
    CHECK(directed_set_distance(small, big, A) == 0.0);
}

TEST_CASE("contour invariants") {
    Contour f0 = Contour::wrapped_slit(A, 41);
    CHECK(f0.size() == 41);
    CHECK(f0.nodes.front() == SlitPoint::zero_plus());
    CHECK(f0.nodes.back() == SlitPoint::zero_minus());

    // Untagged node on the open slit is rejected.
    Contour bad = f0;
    bad.nodes[3].side = Side::none;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    // Interior node on the real axis is rejected.
    Contour lens = Contour::circle_lens(A, 31);
    Contour bad2 = lens;
    bad2.nodes[5] = SlitPoint(Complex(0.7, 0.0));
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);

    // Tangential approach to the real line at 0 is rejected.
    Contour bad3 = lens;
    bad3.nodes[1] = SlitPoint(Complex(0.3, 1e-5));
    CHECK_THROWS_AS(bad3.validate(), std::invalid_argument);
}

TEST_CASE("contour serialization round trip") {
    Contour lens = Contour::circle_lens(A, 17);
    lens.nodes.insert(lens.nodes.begin() + 8, SlitPoint::infinity());
    lens.validate();
    lens.write("contour_rt.txt");
    Contour back = Contour::read("contour_rt.txt", A);
    REQUIRE(back.size() == lens.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == lens[i]);
}

TEST_CASE("resample preserves endpoints, invariants and shape") {
    Contour two({SlitPoint::zero_plus(), SlitPoint::zero_minus()}, A);
    // Needs >= 2 nodes; the two-node contour is its own resample.
    CHECK_THROWS(resample_contour(two, 1));

    Contour lens = semicircle_arc(11);
    double max_seg = 0.0;
    for (std::size_t i = 1; i < lens.size(); ++i)
        max_seg = std::max(max_seg,
                           chordal_distance(lens[i - 1], lens[i], A));
    Contour fine = resample_contour(lens, 100);
    CHECK(fine.size() == 100);
    CHECK(fine.nodes.front() == SlitPoint::zero_plus());
    CHECK(fine.nodes.back() == SlitPoint::zero_minus());
    double d = hausdorff_distance(lens.as_set(), fine.as_set(), A);
    CHECK(d <= max_seg);

    // Arclength of the inscribed polyline is preserved within 1%.
    CHECK(fine.arclength() == doctest::Approx(lens.arclength()).epsilon(0.01));

    // Composition n -> 2n -> n stays within one segment length.
    Contour up = resample_contour(lens, 22);
    Contour down = resample_contour(up, 11);
    CHECK(hausdorff_distance(down.as_set(), lens.as_set(), A) <= max_seg);

    // Slit-wrapping ladders keep their tags.
    Contour f0 = Contour::wrapped_slit(A, 21);
    Contour f0r = resample_contour(f0, 41);
    f0r.validate();
    int tagged = 0;
    for (const auto& p : f0r.nodes)
        if (p.side != Side::none) ++tagged;
    CHECK(tagged > 30);
}

TEST_CASE("normal directions") {
    // Vertical segment: normals are -1 and +1 (left of upward orientation is -1).
    Contour f0 = Contour::wrapped_slit(A, 21);
    auto [left, right] = normal_directions(f0, 3);
    CHECK(std::abs(left - Complex(-1.0, 0.0)) < 1e-12);
    CHECK(std::abs(right - Complex(1.0, 0.0)) < 1e-12);

    // Horizontal segment: normals +-i.
    Contour flat({SlitPoint::zero_plus(), SlitPoint(Complex(0.6, 1.0)),
                  SlitPoint(Complex(0.1, 1.0)), SlitPoint(Complex(-0.4, 1.0)),
                  SlitPoint::zero_minus()},
                 A);
    auto [l2, r2] = normal_directions(flat, 2);
    CHECK(std::abs(std::abs(l2.imag()) - 1.0) < 1e-12);
    CHECK(std::abs(l2 + r2) < 1e-15);

    // 45-degree segment: rotation of the tangent by +-pi/2.
    Contour diag({SlitPoint::zero_plus(), SlitPoint(Complex(0.5, 0.5)),
                  SlitPoint(Complex(1.0, 1.0)), SlitPoint(Complex(-0.2, 1.5)),
                  SlitPoint::zero_minus()},
                 A);
    auto [l3, r3] = normal_directions(diag, 1);
    Complex tangent = (diag[2].value - diag[0].value);
    tangent /= std::abs(tangent);
    CHECK(std::abs(l3 - Complex(0, 1) * tangent) < 1e-12);
    CHECK(std::abs(r3 + Complex(0, 1) * tangent) < 1e-12);

    CHECK_THROWS(normal_directions(diag, 0));
}
