#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "olab/chaining.hpp"

using namespace olab;
using chaining::PointCloud;

namespace {

Mat random_points(int m, int n, std::uint64_t seed) {
    Mat pts(m, n);
    RngStream rng(seed);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) pts(i, j) = rng.gaussian();
    return pts;
}

Mat two_points(const Vec& a) {
    Mat pts(2, a.size());
    pts.row(0).setZero();
    pts.row(1) = a.transpose();
    return pts;
}

// Exhaustive minimum cover with centers from the cloud (closed balls).
int min_cover_oracle(const PointCloud& cloud, double eps) {
    const int m = cloud.size();
    std::vector<std::uint64_t> ball(static_cast<std::size_t>(m), 0);
    for (int c = 0; c < m; ++c)
        for (int t = 0; t < m; ++t)
            if (cloud.dist(t, c) <= eps) ball[static_cast<std::size_t>(c)] |= 1ULL << t;
    std::uint64_t all = (m == 64) ? ~0ULL : ((1ULL << m) - 1);
    for (int size = 1; size <= m; ++size) {
        std::vector<int> idx(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) idx[static_cast<std::size_t>(i)] = i;
        for (;;) {
            std::uint64_t covered = 0;
            for (int i : idx) covered |= ball[static_cast<std::size_t>(i)];
            if (covered == all) return size;
            int i = size - 1;
            while (i >= 0 && idx[static_cast<std::size_t>(i)] == m - size + i) --i;
            if (i < 0) break;
            ++idx[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < size; ++j)
                idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("covering numbers on pinned instances") {
    SECTION("unit grid at half spacing needs every point") {
        Mat pts(25, 2);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) {
                pts(5 * i + j, 0) = i;
                pts(5 * i + j, 1) = j;
            }
        auto cloud = PointCloud::euclidean(pts);
        REQUIRE(chaining::covering_numbers(cloud, {0.5}) == std::vector<int>{25});
        REQUIRE(min_cover_oracle(cloud, 0.5) == 25);
    }
    SECTION("scale at or above the diameter needs one ball") {
        auto cloud = PointCloud::euclidean(random_points(12, 3, 5));
        double diam = cloud.diameter();
        REQUIRE(chaining::covering_numbers(cloud, {diam})[0] == 1);
        REQUIRE(chaining::covering_numbers(cloud, {2.0 * diam})[0] == 1);
    }
    SECTION("two points at unit distance split below it") {
        Vec a = Vec::Zero(2);
        a[0] = 1.0;
        auto cloud = PointCloud::euclidean(two_points(a));
        REQUIRE(chaining::covering_numbers(cloud, {0.4})[0] == 2);
    }
}

TEST_CASE("greedy covers sandwich between exact covers") {
    for (std::uint64_t seed : {3ULL, 4ULL, 5ULL}) {
        auto cloud = PointCloud::euclidean(random_points(9, 2, seed));
        std::vector<double> all;
        for (int i = 0; i < 9; ++i)
            for (int j = i + 1; j < 9; ++j) all.push_back(cloud.dist(i, j));
        std::sort(all.begin(), all.end());
        double eps = all[all.size() / 2];
        int exact = min_cover_oracle(cloud, eps);
        int exact_half = min_cover_oracle(cloud, eps / 2.0);
        int greedy = chaining::covering_numbers(cloud, {eps})[0];
        int pack = chaining::packing_numbers(cloud, {eps})[0];
        REQUIRE(exact <= greedy);
        REQUIRE(greedy <= exact_half);
        REQUIRE(pack <= exact);
    }
}

TEST_CASE("entropy integrals on a two-point cloud are exact") {
    Vec a(3);
    a << 0.7, -0.2, 0.4;
    auto cloud = PointCloud::euclidean(two_points(a));
    double d = a.norm();
    auto dud = chaining::dudley_gamma2_upper(cloud);
    REQUIRE(dud.value == Catch::Approx(d * std::sqrt(std::log(2.0))).epsilon(1e-12));
    auto tc = chaining::two_convex_gamma2_upper(cloud);
    REQUIRE(tc.value == Catch::Approx(std::sqrt(d * d * std::log(2.0) / 2.0)).epsilon(1e-12));
}

TEST_CASE("entropy integrals scale linearly with the cloud") {
    auto pts = random_points(20, 4, 9);
    auto base = PointCloud::euclidean(pts);
    auto scaled = PointCloud::euclidean(3.0 * pts);
    REQUIRE(chaining::dudley_gamma2_upper(scaled).value ==
            Catch::Approx(3.0 * chaining::dudley_gamma2_upper(base).value).epsilon(1e-12));
    REQUIRE(chaining::two_convex_gamma2_upper(scaled).value ==
            Catch::Approx(3.0 * chaining::two_convex_gamma2_upper(base).value).epsilon(1e-12));
    REQUIRE(chaining::admissible_gamma2(scaled).value ==
            Catch::Approx(3.0 * chaining::admissible_gamma2(base).value).epsilon(1e-12));
}

TEST_CASE("admissible sequences") {
    SECTION("two points give the gap itself") {
        Vec a(2);
        a << 3.0, 4.0;
        auto res = chaining::admissible_gamma2(PointCloud::euclidean(two_points(a)));
        REQUIRE(res.value == Catch::Approx(5.0).epsilon(1e-12));
        REQUIRE(res.level_sizes.front() == 1);
        REQUIRE(res.level_sizes.back() == 2);
    }
    SECTION("level sizes follow the doubling-exponent schedule") {
        auto res = chaining::admissible_gamma2(PointCloud::euclidean(random_points(40, 3, 2)));
        REQUIRE(res.level_sizes == std::vector<int>{1, 4, 16, 40});
        for (std::size_t s = 0; s + 1 < res.levels.size(); ++s) {
            // nested: each level is a prefix of the next
            for (std::size_t i = 0; i < res.levels[s].size(); ++i)
                REQUIRE(res.levels[s][i] == res.levels[s + 1][i]);
        }
    }
    SECTION("value dominates the distance to the first center") {
        auto pts = random_points(30, 3, 21);
        auto cloud = PointCloud::euclidean(pts);
        auto res = chaining::admissible_gamma2(cloud);
        double far0 = 0.0;
        for (int t = 0; t < 30; ++t) far0 = std::max(far0, cloud.dist(t, 0));
        REQUIRE(res.value >= far0 - 1e-12);
    }
    SECTION("admissible value stays within a fixed multiple of the entropy integral") {
        for (std::uint64_t seed : {1ULL, 7ULL}) {
            auto cloud = PointCloud::euclidean(random_points(50, 3, seed));
            REQUIRE(chaining::admissible_gamma2(cloud).value <=
                    40.0 * chaining::dudley_gamma2_upper(cloud).value);
        }
    }
}

TEST_CASE("sudakov minoration estimates") {
    SECTION("two points under the half-separation convention") {
        Vec a(2);
        a << 0.6, 0.8;
        auto res = chaining::sudakov_lower(PointCloud::euclidean(two_points(a)));
        REQUIRE(res.value == Catch::Approx(0.5 * std::sqrt(std::log(2.0))).epsilon(1e-12));
    }
    SECTION("reported packings are valid and the hypercube value is substantial") {
        const int d = 6;
        Mat pts(64, d);
        for (int v = 0; v < 64; ++v)
            for (int b = 0; b < d; ++b) pts(v, b) = (v >> b) & 1;
        auto cloud = PointCloud::euclidean(pts);
        auto res = chaining::sudakov_lower(cloud);
        auto tr = chaining::greedy_traversal(cloud);
        for (std::size_t s = 0; s < res.scales.size(); ++s) {
            int p = res.packs[s];
            for (int i = 0; i < p; ++i)
                for (int j = i + 1; j < p; ++j)
                    REQUIRE(cloud.dist(tr.order[static_cast<std::size_t>(i)],
                                       tr.order[static_cast<std::size_t>(j)]) >=
                            2.0 * res.scales[s] - 1e-12);
        }
        INFO("hypercube sudakov value " << res.value);
        // Frozen greedy-packing oracle value; about 0.17 * d under the
        // half-separation convention used throughout.
        REQUIRE(res.value == Catch::Approx(1.01966699016880868).epsilon(1e-12));
        REQUIRE(res.value >= 0.15 * d);
        REQUIRE(chaining::dudley_gamma2_upper(cloud).value >= res.value);
    }
    SECTION("dudley dominates sudakov up to a recorded constant") {
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto cloud = PointCloud::euclidean(random_points(10, 3, seed));
            double s = chaining::sudakov_lower(cloud).value;
            double du = chaining::dudley_gamma2_upper(cloud).value;
            REQUIRE(du > 0.0);
            worst = std::max(worst, s / du);
        }
        INFO("largest sudakov/dudley ratio " << worst);
        REQUIRE(worst < 5.0);
    }
}

TEST_CASE("subset packings") {
    SECTION("weak separation keeps every pair") {
        auto p = chaining::subset_packing(4, 2, 0.5);
        REQUIRE(p.exhaustive);
        REQUIRE(p.sets.size() == 6);
    }
    SECTION("full separation forces disjoint supports") {
        auto p = chaining::subset_packing(4, 2, 2.0);
        REQUIRE(p.sets.size() == 2);
        // exhaustive max-packing oracle over all 6 candidate sets
        std::vector<std::vector<int>> all{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
        int best = 0;
        for (int mask = 0; mask < 64; ++mask) {
            std::vector<int> chosen;
            for (int i = 0; i < 6; ++i)
                if (mask & (1 << i)) chosen.push_back(i);
            bool ok = true;
            for (std::size_t i = 0; i < chosen.size() && ok; ++i)
                for (std::size_t j = i + 1; j < chosen.size() && ok; ++j) {
                    int common = 0;
                    for (int x : all[static_cast<std::size_t>(chosen[i])])
                        for (int y : all[static_cast<std::size_t>(chosen[j])])
                            if (x == y) ++common;
                    if (4 - 2 * common < 4) ok = false;
                }
            if (ok) best = std::max(best, static_cast<int>(chosen.size()));
        }
        REQUIRE(best == 2);
    }
    SECTION("the full support is a singleton packing") {
        auto p = chaining::subset_packing(5, 5, 1.0);
        REQUIRE(p.sets.size() == 1);
    }
    SECTION("log size approaches the combinatorial target on larger instances") {
        auto p = chaining::subset_packing(24, 4, 0.5, 7);
        INFO("log size " << p.log_size << " target " << p.target);
        REQUIRE(p.log_size >= p.target - std::log(4.0));
    }
}

TEST_CASE("gaussian width estimates") {
    SECTION("singleton") {
        Mat one(1, 3);
        one << 1.0, 2.0, 2.0;
        auto w = chaining::gaussian_width(IndexClass::finite_list(one), 40000, 3);
        REQUIRE(w.value == Catch::Approx(3.0 * std::sqrt(2.0 / M_PI)).epsilon(0.03));
    }
    SECTION("sphere") {
        auto w = chaining::gaussian_width(IndexClass::sphere(100), 400, 3);
        REQUIRE(w.value == Catch::Approx(10.0).epsilon(0.02));
    }
    SECTION("l1 ball") {
        auto w = chaining::gaussian_width(IndexClass::l1_ball(1024), 300, 3);
        REQUIRE(w.value == Catch::Approx(std::sqrt(2.0 * std::log(1024.0))).epsilon(0.15));
    }
}

TEST_CASE("metric plumbing") {
    SECTION("weighted metric rescales coordinates") {
        Mat pts(2, 2);
        pts << 0.0, 0.0, 1.0, 1.0;
        Vec w(2);
        w << 2.0, 3.0;
        auto cloud = PointCloud::weighted(pts, w);
        REQUIRE(cloud.dist(0, 1) == Catch::Approx(std::sqrt(13.0)).epsilon(1e-12));
    }
    SECTION("metric axioms hold on sampled triples") {
        REQUIRE(PointCloud::euclidean(random_points(15, 3, 1)).verify_metric(300, 2));
        Vec w = Vec::Ones(3) * 0.5;
        REQUIRE(PointCloud::weighted(random_points(15, 3, 1), w).verify_metric(300, 2));
    }
    SECTION("empirical psi_2 metric matches the gaussian closed form") {
        Mat pts(2, 3);
        pts.setZero();
        pts(1, 0) = 1.0;
        auto cloud =
            PointCloud::empirical_psi2(pts, measures::MeasureSpec::gaussian(3), 20000, 11);
        REQUIRE(cloud.dist(0, 0) == 0.0);
        REQUIRE(cloud.dist(0, 1) == cloud.dist(1, 0));
        REQUIRE(cloud.dist(0, 1) == Catch::Approx(std::sqrt(8.0 / 3.0)).epsilon(0.05));
        REQUIRE(cloud.verify_metric(10, 3));
    }
}

TEST_CASE("chaining report serialization") {
    auto cloud = PointCloud::euclidean(random_points(16, 3, 13));
    auto report = chaining::build_report(cloud, IndexClass::sphere(3), 100, 5);
    auto j = report.to_json();
    REQUIRE(j.contains("dudley_upper"));
    REQUIRE(j.contains("two_convex_upper"));
    REQUIRE(j.contains("admissible_upper"));
    REQUIRE(j.contains("sudakov_lower"));
    REQUIRE(j.contains("gaussian_width"));
    REQUIRE(j.contains("fitted_sudakov_ratio"));
    REQUIRE(j["semantics"]["sudakov_lower"] == "lower bound");
    REQUIRE(report.sudakov.value <= report.admissible.value * report.fitted_sudakov_ratio + 1e-12);

    std::ostringstream os;
    report.covering_curve_csv(os);
    std::istringstream is(os.str());
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) ++lines;
    REQUIRE(lines == 16);  // header + 15 grid scales
}
