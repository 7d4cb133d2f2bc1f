#include <cmath>

#include "doctest.h"
#include "frozen_oracles.hpp"
#include "kgsub/cluster_metrics.hpp"
#include "kgsub/error.hpp"
#include "kgsub/random.hpp"
#include "oracles.hpp"

using namespace kgsub;

namespace {

Matrix rows(std::initializer_list<std::vector<double>> r) {
    Matrix m(r.size(), r.begin()->size());
    std::size_t i = 0;
    for (const auto& v : r) {
        for (std::size_t d = 0; d < v.size(); ++d) {
            m(i, d) = v[d];
        }
        ++i;
    }
    return m;
}

Matrix from_flat(const std::vector<double>& flat, std::size_t cols) {
    Matrix m(flat.size() / cols, cols);
    std::copy(flat.begin(), flat.end(), m.data().begin());
    return m;
}

Matrix random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double offset = 0) {
    Rng rng(seed);
    Matrix m(n, dim);
    for (auto& v : m.data()) {
        v = rng.normal() + offset;
    }
    return m;
}

// random orthogonal matrix by Gram-Schmidt
std::vector<std::vector<double>> rotation(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> q;
    while (q.size() < dim) {
        std::vector<double> v(dim);
        for (auto& x : v) {
            x = rng.normal();
        }
        for (const auto& u : q) {
            double d = 0;
            for (std::size_t i = 0; i < dim; ++i) {
                d += v[i] * u[i];
            }
            for (std::size_t i = 0; i < dim; ++i) {
                v[i] -= d * u[i];
            }
        }
        q.push_back(oracle::unit(v));
    }
    return q;
}

Matrix rotate(const Matrix& m, const std::vector<std::vector<double>>& q) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t a = 0; a < m.cols(); ++a) {
            for (std::size_t b = 0; b < m.cols(); ++b) {
                out(i, a) += q[a][b] * m(i, b);
            }
        }
    }
    return out;
}

}

TEST_CASE("cluster centroid") {
    CHECK(cluster_centroid(rows({{2, 3}})) == std::vector<double>{2, 3});
    CHECK(cluster_centroid(rows({{1, 0}, {0, 1}})) == std::vector<double>{0.5, 0.5});
    const std::vector<std::size_t> none;
    CHECK_THROWS_AS(cluster_centroid(rows({{1, 0}}), none), DataError);

    const auto pts = random_points(100, 5, 3);
    const auto c = cluster_centroid(pts);
    for (std::size_t d = 0; d < 5; ++d) {
        double s = 0;
        for (std::size_t i = 0; i < 100; ++i) {
            s += pts(i, d);
        }
        CHECK(c[d] == doctest::Approx(s / 100).epsilon(1e-9));
    }
    const std::vector<std::size_t> some{1, 4};
    CHECK(cluster_centroid(pts, some)[0] == doctest::Approx((pts(1, 0) + pts(4, 0)) / 2));
}

TEST_CASE("normalize") {
    const auto u = normalize_unit(std::vector<double>{3, 4});
    CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-15));
    const auto again = normalize_unit(u);
    CHECK(std::abs(again[0] - u[0]) <= 1e-12);
    CHECK(std::abs(again[1] - u[1]) <= 1e-12);
    CHECK_THROWS_AS(normalize_unit(std::vector<double>{0, 0}), DegenerateVectorError);
}

TEST_CASE("cohesion") {
    const auto same = rows({{1, 2}, {1, 2}, {1, 2}});
    const auto r0 = cohesion(same, cluster_centroid(same));
    CHECK(r0.t == 0.0);
    CHECK(r0.coh == 1.0);

    // same direction, different lengths: normalized points coincide
    const auto scaled = rows({{1, 1}, {2, 2}, {5, 5}});
    CHECK(cohesion(scaled, cluster_centroid(scaled)).coh == doctest::Approx(1.0).epsilon(1e-15));

    const auto two = rows({{1, 0}, {0, 1}});
    const auto r = cohesion(two, cluster_centroid(two));
    CHECK(r.t == doctest::Approx(0.76536686473).epsilon(1e-9));
    CHECK(r.coh == doctest::Approx(0.23463313527).epsilon(1e-9));
    const double hand = std::sqrt(std::pow(1 - std::sqrt(0.5), 2) + 0.5);
    CHECK(r.t == doctest::Approx(hand).epsilon(1e-12));

    const auto frozen_pts = from_flat(frozen::cohesion_points, 4);
    CHECK(cohesion(frozen_pts, cluster_centroid(frozen_pts)).t == doctest::Approx(frozen::cohesion_t).epsilon(1e-9));

    const auto big = random_points(500, 6, 9, 0.7);
    const auto c = cluster_centroid(big);
    const auto cu = oracle::unit(c);
    double sum = 0;
    for (std::size_t i = 0; i < 500; ++i) {
        sum += oracle::dist(oracle::unit({big.row(i).begin(), big.row(i).end()}), cu);
    }
    const auto rb = cohesion(big, c);
    CHECK(rb.t == doctest::Approx(sum / 500).epsilon(1e-9));
    CHECK(rb.coh >= -1.0);
    CHECK(rb.coh <= 1.0);

    const auto with_zero = rows({{0, 0}, {1, 0}, {0, 1}});
    const auto rz = cohesion(with_zero, cluster_centroid(with_zero));
    CHECK(rz.excluded == 1);
    CHECK(rz.t == doctest::Approx(r.t).epsilon(1e-12));

    const auto cancel = rows({{1, 0}, {-1, 0}});
    CHECK_THROWS_AS(cohesion(cancel, cluster_centroid(cancel)), DegenerateVectorError);
}

TEST_CASE("separation") {
    const auto ortho = rows({{3, 0}, {0, 0.5}});
    Matrix norm(2, 2);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto u = normalize_unit(ortho.row(i));
        norm(i, 0) = u[0];
        norm(i, 1) = u[1];
    }
    CHECK(separation(norm, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(separation(norm, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    const auto dup = rows({{1, 0}, {1, 0}, {0, 1}});
    CHECK(separation(dup, 0) == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-12));

    CHECK_THROWS_AS(separation(rows({{1, 0}}), 0), ParameterError);

    const auto cs = from_flat(frozen::separation_centroids, 4);
    Matrix cn(cs.rows(), 4);
    for (std::size_t i = 0; i < cs.rows(); ++i) {
        const auto u = normalize_unit(cs.row(i));
        std::copy(u.begin(), u.end(), cn.row(i).begin());
    }
    for (std::size_t m = 0; m < cs.rows(); ++m) {
        CHECK(separation(cn, m) == doctest::Approx(frozen::separation_values[m]).epsilon(1e-9));
    }

    const auto twenty = random_points(20, 5, 12);
    Matrix tn(20, 5);
    for (std::size_t i = 0; i < 20; ++i) {
        const auto u = normalize_unit(twenty.row(i));
        std::copy(u.begin(), u.end(), tn.row(i).begin());
    }
    for (std::size_t m = 0; m < 20; ++m) {
        double s = 0;
        for (std::size_t j = 0; j < 20; ++j) {
            if (j != m) {
                s += oracle::dist({tn.row(m).begin(), tn.row(m).end()}, {tn.row(j).begin(), tn.row(j).end()});
            }
        }
        const double sep = separation(tn, m);
        CHECK(sep == doctest::Approx(s / 19).epsilon(1e-9));
        CHECK(sep >= 0.0);
        CHECK(sep <= 2.0);
    }
}

TEST_CASE("summarize") {
    const std::vector<double> constant{0.4, 0.4, 0.4};
    CHECK(summarize(constant).mean == doctest::Approx(0.4));
    CHECK(summarize(constant).std == doctest::Approx(0.0));
    const std::vector<double> two{0, 2};
    CHECK(summarize(two).mean == 1.0);
    CHECK(summarize(two).std == 1.0);
    CHECK(summarize(two).variance == 1.0);
    CHECK_THROWS_AS(summarize(std::vector<double>{}), ParameterError);

    const auto s = summarize(frozen::summary_values);
    CHECK(s.mean == doctest::Approx(frozen::summary_mean).epsilon(1e-12));
    CHECK(s.std == doctest::Approx(frozen::summary_std).epsilon(1e-12));

    // two-pass oracle
    double mean = 0;
    for (double v : frozen::summary_values) {
        mean += v;
    }
    mean /= 20;
    double ss = 0;
    for (double v : frozen::summary_values) {
        ss += (v - mean) * (v - mean);
    }
    CHECK(s.std == doctest::Approx(std::sqrt(ss / 20)).epsilon(1e-12));

    std::vector<double> shifted(frozen::summary_values);
    for (auto& v : shifted) {
        v += 17.25;
    }
    CHECK(summarize(shifted).std == doctest::Approx(s.std).epsilon(1e-9));
}

TEST_CASE("compute quality") {
    const auto pts = random_points(60, 4, 5, 0.3);
    Clustering c;
    c.k = 3;
    c.means = Matrix(3, 4);
    for (std::size_t i = 0; i < 60; ++i) {
        c.assignments.push_back(static_cast<std::uint32_t>(i % 3));
    }
    const auto q = compute_quality(pts, c);
    REQUIRE(q.rows.size() == 3);
    for (const auto& row : q.rows) {
        CHECK(row.size == 20);
        CHECK(row.cohesion >= -1.0);
        CHECK(row.cohesion <= 1.0);
        CHECK(row.separation >= 0.0);
        CHECK(row.separation <= 2.0);
        CHECK(row.cohesion == doctest::Approx(1.0 - row.t));
    }
    CHECK(q.to_tsv().rfind("cluster_id\tsize\tcohesion\tseparation", 0) == 0);
    CHECK(q.to_json().contains("clusters"));

    // rotation invariance
    const auto r = rotate(pts, rotation(4, 77));
    const auto qr = compute_quality(r, c);
    for (std::size_t m = 0; m < 3; ++m) {
        CHECK(qr.rows[m].cohesion == doctest::Approx(q.rows[m].cohesion).epsilon(1e-9));
        CHECK(qr.rows[m].separation == doctest::Approx(q.rows[m].separation).epsilon(1e-9));
    }

    Clustering two;
    two.k = 2;
    two.means = Matrix(2, 4);
    for (std::size_t i = 0; i < 60; ++i) {
        two.assignments.push_back(i < 30 ? 0u : 1u);
    }
    const auto q2 = compute_quality(pts, two);
    CHECK(q2.rows[0].separation == doctest::Approx(q2.rows[1].separation).epsilon(1e-12));
}
