#include <catch2/catch_amalgamated.hpp>

#include "olab/geometry.hpp"

using namespace olab;
using geometry::BodySpec;
using geometry::RandomOperator;
using Catch::Approx;

namespace {

Mat gaussian_rows(int k, int n, std::uint64_t seed) {
    Mat m(k, n);
    RngStream rng(seed);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rng.gaussian();
    return m;
}

Mat cross_polytope_vertices(int n) {
    Mat v = Mat::Zero(2 * n, n);
    for (int i = 0; i < n; ++i) {
        v(2 * i, i) = 1.0;
        v(2 * i + 1, i) = -1.0;
    }
    return v;
}

}  // namespace

TEST_CASE("equality-form linear programs solve, detect infeasibility, and price duals") {
    using geometry::detail::LpResult;
    using geometry::detail::solve_equality_lp;

    SECTION("two-variable transport") {
        Mat a(1, 2);
        a << 1.0, 1.0;
        Vec b(1);
        b << 1.0;
        Vec c(2);
        c << 1.0, 2.0;
        auto r = solve_equality_lp(a, b, c);
        REQUIRE(r.status == LpResult::Status::optimal);
        CHECK(r.objective == Approx(1.0).margin(1e-12));
        CHECK(r.x[0] == Approx(1.0).margin(1e-12));
        CHECK(r.x[1] == Approx(0.0).margin(1e-12));
        // the equality multiplier prices the right-hand side
        CHECK(r.duals[0] == Approx(1.0).margin(1e-9));
    }

    SECTION("negative right-hand sides are handled by row flips") {
        Mat a(1, 2);
        a << -1.0, -1.0;
        Vec b(1);
        b << -3.0;
        auto r = solve_equality_lp(a, b, Vec::Ones(2));
        REQUIRE(r.status == LpResult::Status::optimal);
        CHECK(r.objective == Approx(3.0).margin(1e-9));
    }

    SECTION("infeasible system is reported") {
        Mat a(1, 2);
        a << -1.0, -1.0;
        Vec b(1);
        b << 1.0;
        auto r = solve_equality_lp(a, b, Vec::Ones(2));
        CHECK(r.status == LpResult::Status::infeasible);
    }

    SECTION("unbounded objective is reported") {
        Mat a(1, 2);
        a << 1.0, -1.0;
        Vec b(1);
        b << 1.0;
        Vec c(2);
        c << -1.0, 0.0;
        auto r = solve_equality_lp(a, b, c);
        CHECK(r.status == LpResult::Status::unbounded);
    }

    SECTION("zero right-hand side gives the zero solution") {
        Mat a(2, 3);
        a << 1.0, 0.5, -1.0, 0.0, 1.0, 2.0;
        auto r = solve_equality_lp(a, Vec::Zero(2), Vec::Ones(3));
        REQUIRE(r.status == LpResult::Status::optimal);
        CHECK(r.objective == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("cross-polytope gauge programs reproduce the l1 norm and its subgradients") {
    const int n = 4;
    BodySpec poly = BodySpec::finite_polytope(cross_polytope_vertices(n));
    BodySpec l1 = BodySpec::l1_ball(n);
    RngStream rng(0x706f6c79ULL);
    for (int rep = 0; rep < 20; ++rep) {
        Vec u(n);
        for (int i = 0; i < n; ++i) u[i] = rng.gaussian();
        double g = poly.gauge(u);
        CHECK(g == Approx(u.lpNorm<1>()).epsilon(1e-9));
        CHECK(g == Approx(l1.gauge(u)).epsilon(1e-9));

        Vec z = poly.gauge_subgradient(u);
        CHECK(z.dot(u) == Approx(g).epsilon(1e-8));
        for (int rep2 = 0; rep2 < 10; ++rep2) {
            Vec x(n);
            for (int i = 0; i < n; ++i) x[i] = rng.gaussian();
            CHECK(poly.gauge(x) >= z.dot(x) - 1e-8);
        }
    }

    SECTION("points outside the vertex span have infinite gauge") {
        Mat segment(2, 2);
        segment << 1.0, 0.0, -1.0, 0.0;
        BodySpec flat = BodySpec::finite_polytope(segment);
        Vec off(2);
        off << 0.0, 1.0;
        CHECK(flat.gauge(off) == kInf);
        Vec on(2);
        on << -2.5, 0.0;
        CHECK(flat.gauge(on) == Approx(2.5).epsilon(1e-9));
    }

    SECTION("asymmetric vertex lists are rejected") {
        Mat bad(2, 2);
        bad << 1.0, 0.0, 0.0, 1.0;
        CHECK_THROWS_AS(BodySpec::finite_polytope(bad), std::invalid_argument);
    }

    SECTION("scaling divides the gauge") {
        Vec u(n);
        u << 1.0, -2.0, 0.5, 0.0;
        CHECK(poly.scaled(4.0).gauge(u) == Approx(u.lpNorm<1>() / 4.0).epsilon(1e-9));
    }
}

TEST_CASE("kernels of sample operators are orthonormal and annihilated") {
    SECTION("coordinate rows leave the complementary coordinates") {
        const int n = 6, k = 3;
        Mat rows = Mat::Zero(k, n);
        for (int i = 0; i < k; ++i) rows(i, i) = 1.0;
        Mat v = geometry::kernel_basis(RandomOperator::from_rows(rows));
        REQUIRE(v.cols() == n - k);
        CHECK((v.transpose() * v - Mat::Identity(n - k, n - k)).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((rows * v).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(v.topRows(k).cwiseAbs().maxCoeff() <= 1e-12);
    }

    SECTION("square generic operators have trivial kernel") {
        Mat rows = gaussian_rows(5, 5, 11);
        CHECK(geometry::kernel_basis(RandomOperator::from_rows(rows)).cols() == 0);
    }

    SECTION("an empty operator has full kernel") {
        RandomOperator op;
        op.matrix = Mat(0, 4);
        Mat v = geometry::kernel_basis(op);
        CHECK(v.cols() == 4);
        CHECK((v - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
    }

    SECTION("repeated rows do not shrink the kernel") {
        Mat one = gaussian_rows(1, 4, 17);
        Mat rows(3, 4);
        rows.row(0) = one.row(0);
        rows.row(1) = one.row(0);
        rows.row(2) = 2.0 * one.row(0);
        Mat v = geometry::kernel_basis(RandomOperator::from_rows(rows));
        CHECK(v.cols() == 3);
        CHECK((rows * v).cwiseAbs().maxCoeff() <= 1e-10);
    }

    SECTION("normalization does not change the kernel") {
        Mat rows = gaussian_rows(3, 7, 23);
        Mat v1 = geometry::kernel_basis(RandomOperator::from_rows(rows, RandomOperator::Scaling::raw));
        Mat v2 = geometry::kernel_basis(
            RandomOperator::from_rows(rows, RandomOperator::Scaling::inv_sqrt_k));
        REQUIRE(v1.cols() == v2.cols());
        CHECK((rows * v2).cwiseAbs().maxCoeff() <= 1e-10);
    }

    SECTION("normalized application divides by sqrt(k)") {
        Mat rows = Mat::Ones(4, 2);
        auto op = RandomOperator::from_rows(rows, RandomOperator::Scaling::inv_sqrt_k);
        CHECK(op.factor() == Approx(0.5));
        Vec x(2);
        x << 1.0, 1.0;
        CHECK(op.apply(x)[0] == Approx(1.0));
    }
}

TEST_CASE("section diameters match closed forms on canonical bodies") {
    SECTION("the whole cross-polytope has diameter 2") {
        RandomOperator op;
        op.matrix = Mat(0, 4);
        auto res = geometry::section_diameter(op, BodySpec::l1_ball(4));
        CHECK(res.kernel_dim == 4);
        CHECK(res.value == Approx(2.0).margin(1e-12));
    }

    SECTION("a trivial kernel gives the zero section") {
        auto op = RandomOperator::from_rows(gaussian_rows(3, 3, 29));
        auto res = geometry::section_diameter(op, BodySpec::l1_ball(3));
        CHECK(res.kernel_dim == 0);
        CHECK(res.value == 0.0);
    }

    SECTION("the diagonal section of the planar cross-polytope") {
        Mat rows(1, 2);
        rows << 1.0, 1.0;
        auto res = geometry::section_diameter(RandomOperator::from_rows(rows), BodySpec::l1_ball(2));
        CHECK(res.kernel_dim == 1);
        CHECK(res.net_exact);
        CHECK(res.value == Approx(std::sqrt(2.0)).epsilon(1e-12));
    }

    SECTION("Euclidean balls always give twice the radius") {
        auto op = RandomOperator::from_rows(gaussian_rows(2, 5, 31));
        auto res = geometry::section_diameter(op, BodySpec::l2_ball(5));
        CHECK(res.kernel_dim == 3);
        CHECK(res.value == Approx(2.0).epsilon(1e-12));
        auto scaled = geometry::section_diameter(op, BodySpec::l2_ball(5).scaled(1.5));
        CHECK(scaled.value == Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("section certificates are boundary points of the kernel section") {
    auto op = RandomOperator::from_rows(gaussian_rows(3, 6, 37));
    BodySpec body = BodySpec::l1_ball(6);
    auto res = geometry::section_diameter(op, body);
    REQUIRE(res.kernel_dim == 3);
    REQUIRE(res.value > 0.0);
    CHECK(body.gauge(res.certificate) == Approx(1.0).epsilon(1e-9));
    CHECK(2.0 * res.certificate.norm() == Approx(res.value).epsilon(1e-12));
    double rel = (op.matrix * res.certificate).norm() /
                 (op.matrix.norm() * res.certificate.norm());
    CHECK(rel <= 1e-8);
}

TEST_CASE("section diameter never grows as rows are appended") {
    const int n = 8;
    Mat all = gaussian_rows(6, n, 41);
    BodySpec body = BodySpec::l1_ball(n);
    double prev = kInf;
    for (int k = 0; k <= 6; ++k) {
        auto op = RandomOperator::from_rows(all.topRows(k));
        auto res = geometry::section_diameter(op, body);
        CHECK(res.kernel_dim == n - k);
        CHECK(res.value <= prev * (1.0 + 1e-6) + 1e-12);
        prev = res.value;
    }
}

TEST_CASE("polytope and l1 descriptions of the cross-polytope agree on sections") {
    const int n = 3;
    auto op = RandomOperator::from_rows(gaussian_rows(1, n, 43));
    geometry::SectionOptions opts;
    opts.restarts = 24;
    opts.iterations = 150;
    auto via_l1 = geometry::section_diameter(op, BodySpec::l1_ball(n), opts);
    auto via_poly =
        geometry::section_diameter(op, BodySpec::finite_polytope(cross_polytope_vertices(n)), opts);
    REQUIRE(via_l1.kernel_dim == 2);
    REQUIRE(via_poly.kernel_dim == 2);
    CHECK(via_poly.value == Approx(via_l1.value).epsilon(1e-6));
}

TEST_CASE("q_star fixed points match closed forms") {
    bounds::ConstantSet cs;

    SECTION("constant profiles solve in closed form") {
        auto profile = [](double) { return 50.0; };
        auto r100 = geometry::q_star(profile, 100, cs, geometry::QStarVariant::log_weight);
        REQUIRE(r100.satisfied);
        double expect = 50.0 * std::sqrt(std::log(50.0)) / 10.0;
        CHECK(r100.value == Approx(expect).epsilon(1e-9));

        auto r400 = geometry::q_star(profile, 400, cs, geometry::QStarVariant::log_weight);
        CHECK(r400.value == Approx(r100.value / 2.0).epsilon(1e-9));
    }

    SECTION("a hyperbolic profile balances at the 2/5 power") {
        double a = 2.0;
        long long k = 50;
        auto profile = [a](double rho) { return a / rho; };
        auto res = geometry::q_star(profile, k, cs, geometry::QStarVariant::power_weight);
        REQUIRE(res.satisfied);
        double expect = std::pow(std::pow(a, 1.5) / std::sqrt(static_cast<double>(k)), 0.4);
        CHECK(res.value == Approx(expect).epsilon(1e-6));
        CHECK(res.variant == "power_weight");
        CHECK(res.grid.size() == 24);
        CHECK(res.residuals.size() == res.grid.size());
    }

    SECTION("profiles below one are free of the logarithmic penalty") {
        auto res = geometry::q_star([](double) { return 0.5; }, 10, cs,
                                    geometry::QStarVariant::log_weight);
        REQUIRE(res.satisfied);
        CHECK(res.value <= 1e-10);
    }

    SECTION("an unreachable level reports infinity") {
        auto res = geometry::q_star([](double) { return 1e12; }, 1, cs,
                                    geometry::QStarVariant::log_weight);
        CHECK_FALSE(res.satisfied);
        CHECK(res.value == kInf);
        for (double r : res.residuals) CHECK(r < 0.0);
        auto j = res.to_json();
        CHECK(j["value"] == "inf");
        CHECK(j["satisfied"] == false);
        CHECK(j["grid"].size() == res.grid.size());
    }

    SECTION("increasing profiles are rejected") {
        CHECK_THROWS_AS(geometry::q_star([](double rho) { return rho; }, 4, cs),
                        std::invalid_argument);
        CHECK_THROWS_AS(geometry::q_star([](double) { return 1.0; }, 0, cs),
                        std::invalid_argument);
    }

    SECTION("the leading constant scales the fixed point") {
        bounds::ConstantSet big;
        big.set(5, 3.0);
        auto small = geometry::q_star([](double) { return 50.0; }, 100, cs);
        auto scaled = geometry::q_star([](double) { return 50.0; }, 100, big);
        CHECK(scaled.value == Approx(3.0 * small.value).epsilon(1e-9));
    }
}

TEST_CASE("r_star fixed points match closed forms") {
    bounds::ConstantSet cs;

    SECTION("constant width profiles") {
        auto res = geometry::r_star([](double) { return 10.0; }, 64, 2.0, cs);
        REQUIRE(res.satisfied);
        CHECK(res.value == Approx(4.0 * 10.0 / 8.0).epsilon(1e-9));
        CHECK(res.variant == "r_star");
    }

    SECTION("hyperbolic width profiles balance at the square root") {
        auto res = geometry::r_star([](double rho) { return 3.0 / rho; }, 16, 1.0, cs);
        REQUIRE(res.satisfied);
        CHECK(res.value == Approx(std::sqrt(3.0 / 4.0)).epsilon(1e-6));
    }

    SECTION("more rows shrink the radius, bigger constants grow it") {
        auto base = geometry::r_star([](double) { return 5.0; }, 16, 1.5, cs);
        auto more = geometry::r_star([](double) { return 5.0; }, 64, 1.5, cs);
        CHECK(more.value == Approx(base.value / 2.0).epsilon(1e-9));
        bounds::ConstantSet big;
        big.set(1, 2.0);
        auto scaled = geometry::r_star([](double) { return 5.0; }, 16, 1.5, big);
        CHECK(scaled.value == Approx(2.0 * base.value).epsilon(1e-9));
    }

    SECTION("argument validation") {
        CHECK_THROWS_AS(geometry::r_star([](double) { return 1.0; }, 0, 1.0, cs),
                        std::invalid_argument);
        CHECK_THROWS_AS(geometry::r_star([](double) { return 1.0; }, 4, 0.0, cs),
                        std::invalid_argument);
    }
}

TEST_CASE("Gaussian mean width estimates match the two-point oracle") {
    SECTION("symmetric two-point mass at the truncation radius") {
        auto spec = measures::MeasureSpec::cube(1);
        spec.scale = 2.0;
        spec = spec.truncated(2.0);
        auto res = geometry::ell_E_estimate(spec, 1500, 0x656c6c31ULL, 512);
        double expect = 2.0 * std::sqrt(2.0 / M_PI) / std::sqrt(std::log(2.0));
        CHECK(res.value == Approx(expect).epsilon(0.05));
        CHECK(res.stderr_ > 0.0);
        CHECK(res.ratio_to_radius == Approx(res.value / 2.0));
    }

    SECTION("radius zero collapses everything to zero") {
        auto res = geometry::ell_E_estimate(measures::MeasureSpec::gaussian(3).truncated(0.0), 8,
                                            7, 64);
        CHECK(res.value == 0.0);
        CHECK(res.ratio_to_radius == 0.0);
    }

    SECTION("a finite truncation radius is required") {
        CHECK_THROWS_AS(geometry::ell_E_estimate(measures::MeasureSpec::gaussian(3), 4, 7),
                        std::invalid_argument);
    }

    SECTION("the ratio to the radius is stable across dimensions") {
        std::vector<double> ratios;
        for (int n : {4, 8, 16}) {
            auto spec = measures::MeasureSpec::gaussian(n).truncated(4.0 * std::sqrt(n));
            ratios.push_back(
                geometry::ell_E_estimate(spec, 120, 0x72617469ULL + n, 2048).ratio_to_radius);
        }
        double lo = *std::min_element(ratios.begin(), ratios.end());
        double hi = *std::max_element(ratios.begin(), ratios.end());
        CHECK(lo > 0.2);
        CHECK(hi < 0.7);
        CHECK(hi / lo < 1.2);
    }
}
