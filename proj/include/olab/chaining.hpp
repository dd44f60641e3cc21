#pragma once

#include <json.hpp>

#include "olab/common.hpp"
#include "olab/index_class.hpp"
#include "olab/orlicz.hpp"

namespace olab::chaining {

// Finite point clouds with a pluggable metric.  Monte Carlo metrics are
// baked into a cached distance matrix at construction time (one shared
// sample budget for the whole cloud), because metric evaluations dominate
// the cost of everything downstream.

struct PointCloud {
    enum class Metric { euclidean, weighted_euclidean, precomputed };

    Mat points;   // m x n (may be empty for precomputed clouds)
    Metric metric = Metric::euclidean;
    Vec weights;  // weighted_euclidean: coordinate multipliers
    Mat dmat;     // precomputed distances

    int size() const {
        return metric == Metric::precomputed ? static_cast<int>(dmat.rows())
                                             : static_cast<int>(points.rows());
    }

    double dist(int i, int j) const {
        switch (metric) {
            case Metric::euclidean:
                return (points.row(i) - points.row(j)).norm();
            case Metric::weighted_euclidean:
                return ((points.row(i) - points.row(j)).transpose().cwiseProduct(weights)).norm();
            case Metric::precomputed:
                return dmat(i, j);
        }
        throw std::logic_error("PointCloud::dist: bad metric");
    }

    static PointCloud euclidean(Mat pts) {
        PointCloud c;
        c.points = std::move(pts);
        return c;
    }

    static PointCloud weighted(Mat pts, Vec w) {
        if (w.size() != pts.cols()) throw std::invalid_argument("PointCloud: weight size mismatch");
        PointCloud c;
        c.points = std::move(pts);
        c.metric = Metric::weighted_euclidean;
        c.weights = std::move(w);
        return c;
    }

    static PointCloud precomputed(Mat distances, Mat pts = Mat()) {
        if (distances.rows() != distances.cols())
            throw std::invalid_argument("PointCloud: distance matrix must be square");
        PointCloud c;
        c.metric = Metric::precomputed;
        c.dmat = std::move(distances);
        c.points = std::move(pts);
        return c;
    }

    // Distances d(i,j) = empirical psi_2 norm of <t_i - t_j, X>, estimated
    // once for every pair from a shared sample of the measure.
    static PointCloud empirical_psi2(Mat pts, const measures::MeasureSpec& spec, int budget,
                                     std::uint64_t seed, int threads = 1) {
        const int m = static_cast<int>(pts.rows());
        measures::SampleMatrix sm = measures::sample(spec, budget, mix_seed(seed, 0x7073696dULL));
        Mat d = Mat::Zero(m, m);
        std::vector<std::pair<int, int>> pairs;
        pairs.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) pairs.emplace_back(i, j);
        parallel_for(pairs.size(), threads, [&](std::size_t p) {
            auto [i, j] = pairs[p];
            Vec diff = (pts.row(i) - pts.row(j)).transpose();
            if (diff.norm() == 0.0) return;
            Vec z = sm.rows * diff;
            std::vector<double> v(static_cast<std::size_t>(z.size()));
            for (int r = 0; r < z.size(); ++r) v[static_cast<std::size_t>(r)] = z[r];
            d(i, j) = d(j, i) = orlicz::psi_norm_empirical(v, 2.0).value;
        });
        PointCloud c = precomputed(std::move(d), std::move(pts));
        return c;
    }

    double diameter() const {
        const int m = size();
        double best = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) best = std::max(best, dist(i, j));
        return best;
    }

    // Spot-check of metric axioms on sampled triples (tests call this).
    bool verify_metric(int samples, std::uint64_t seed, double tol = 1e-9) const {
        const int m = size();
        if (m < 2) return true;
        RngStream rng(mix_seed(seed, 0x6d657472ULL));
        for (int s = 0; s < samples; ++s) {
            int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
            int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
            int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
            if (dist(i, i) > tol) return false;
            if (std::abs(dist(i, j) - dist(j, i)) > tol) return false;
            if (dist(i, j) > dist(i, k) + dist(k, j) + tol) return false;
            if (dist(i, j) < -tol) return false;
        }
        return true;
    }
};

// ---------------------------------------------------------------------
// Greedy farthest-point traversal.  One pass yields, for every prefix of
// centers: the covering radius (-> covering numbers at all scales), the
// insertion separations (-> packing numbers), and snapshots of the
// point-to-prefix distances at prescribed sizes (-> admissible sequences).
// Ties break toward the lowest index; the first center is point 0.
// ---------------------------------------------------------------------

struct Traversal {
    std::vector<int> order;             // greedy center order
    std::vector<double> radius_after;   // radius_after[m-1] = sup_t d(t, first m centers)
    std::vector<double> insertion;      // insertion[j] = d(order[j], first j centers); [0] = inf
    std::vector<std::vector<double>> snapshot_dmin;  // per requested size
    std::vector<int> snapshot_sizes;
};

inline Traversal greedy_traversal(const PointCloud& cloud, std::vector<int> snapshot_sizes = {}) {
    const int m = cloud.size();
    if (m < 1) throw std::invalid_argument("greedy_traversal: empty cloud");
    std::sort(snapshot_sizes.begin(), snapshot_sizes.end());

    Traversal tr;
    tr.order.reserve(static_cast<std::size_t>(m));
    tr.radius_after.resize(static_cast<std::size_t>(m));
    tr.insertion.resize(static_cast<std::size_t>(m));
    tr.order.push_back(0);
    tr.insertion[0] = kInf;

    std::vector<double> dmin(static_cast<std::size_t>(m));
    for (int t = 0; t < m; ++t) dmin[static_cast<std::size_t>(t)] = cloud.dist(t, 0);

    std::size_t snap_idx = 0;
    auto maybe_snapshot = [&](int centers) {
        while (snap_idx < snapshot_sizes.size() && snapshot_sizes[snap_idx] == centers) {
            tr.snapshot_dmin.push_back(dmin);
            tr.snapshot_sizes.push_back(centers);
            ++snap_idx;
        }
    };

    for (int c = 1;; ++c) {
        int far = 0;
        double far_d = dmin[0];
        for (int t = 1; t < m; ++t)
            if (dmin[static_cast<std::size_t>(t)] > far_d) {  // strict: ties keep lowest index
                far_d = dmin[static_cast<std::size_t>(t)];
                far = t;
            }
        tr.radius_after[static_cast<std::size_t>(c - 1)] = far_d;
        maybe_snapshot(c);
        if (c == m) break;
        tr.order.push_back(far);
        tr.insertion[static_cast<std::size_t>(c)] = far_d;
        for (int t = 0; t < m; ++t) {
            double d = cloud.dist(t, far);
            if (d < dmin[static_cast<std::size_t>(t)]) dmin[static_cast<std::size_t>(t)] = d;
        }
    }
    return tr;
}

// Geometric scale grid: diameter down to diameter / 2^14.
inline std::vector<double> scale_grid(double diameter, int scales = 14) {
    std::vector<double> eps;
    if (!(diameter > 0.0)) return eps;
    eps.reserve(static_cast<std::size_t>(scales + 1));
    double e = diameter;
    for (int j = 0; j <= scales; ++j) {
        eps.push_back(e);
        e *= 0.5;
    }
    return eps;
}

// Greedy covering numbers with closed balls: N(eps) = smallest prefix of the
// traversal whose covering radius is <= eps.  Upper-bounds the true covering
// number; exact whenever greedy is (singletons, eps >= diameter, ...).
inline std::vector<int> covering_numbers(const PointCloud& cloud, const std::vector<double>& epsilons) {
    Traversal tr = greedy_traversal(cloud);
    std::vector<int> out;
    out.reserve(epsilons.size());
    for (double eps : epsilons) {
        if (eps < 0.0) throw std::invalid_argument("covering_numbers: negative scale");
        int n = cloud.size();
        for (int m2 = 1; m2 <= cloud.size(); ++m2)
            if (tr.radius_after[static_cast<std::size_t>(m2 - 1)] <= eps) {
                n = m2;
                break;
            }
        out.push_back(n);
    }
    return out;
}

// Greedy packing counts under the half-separation convention: the largest
// greedy-traversal prefix whose points are pairwise >= 2 eps apart.
inline std::vector<int> packing_numbers(const PointCloud& cloud, const std::vector<double>& epsilons) {
    Traversal tr = greedy_traversal(cloud);
    std::vector<int> out;
    out.reserve(epsilons.size());
    for (double eps : epsilons) {
        int p = 0;
        for (std::size_t j = 0; j < tr.insertion.size(); ++j)
            if (tr.insertion[j] >= 2.0 * eps) ++p;
        out.push_back(std::max(p, 1));
    }
    return out;
}

struct EntropyIntegral {
    double value = 0.0;
    std::vector<double> scales;  // descending
    std::vector<int> covers;
};

namespace detail {

inline EntropyIntegral entropy_curve(const PointCloud& cloud, const Traversal& tr) {
    EntropyIntegral out;
    out.scales = scale_grid(cloud.diameter());
    if (out.scales.empty()) return out;
    out.covers.reserve(out.scales.size());
    for (double eps : out.scales) {
        int n = cloud.size();
        for (int m2 = 1; m2 <= cloud.size(); ++m2)
            if (tr.radius_after[static_cast<std::size_t>(m2 - 1)] <= eps) {
                n = m2;
                break;
            }
        out.covers.push_back(n);
    }
    return out;
}

}  // namespace detail

// Entropy integral of sqrt(log N(eps)).  The covering-number curve is a
// nonincreasing step function, so each grid segment is integrated with the
// value at its lower endpoint (exact for steps aligned with the grid) and
// the sub-grid tail enters as a rectangle at the finest resolved count.
inline EntropyIntegral dudley_gamma2_upper(const PointCloud& cloud) {
    Traversal tr = greedy_traversal(cloud);
    EntropyIntegral out = detail::entropy_curve(cloud, tr);
    if (out.scales.empty()) return out;
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < out.scales.size(); ++j) {
        double width = out.scales[j] - out.scales[j + 1];
        acc += std::sqrt(std::log(static_cast<double>(out.covers[j + 1]))) * width;
    }
    double eps_min = out.scales.back();
    acc += eps_min * std::sqrt(std::log(static_cast<double>(out.covers.back())));
    out.value = acc;
    return out;
}

// Entropy integral of eps * log N(eps) followed by a square root, the shape
// that controls gamma_2 for 2-convex bodies.  Segments are integrated
// exactly against the step curve.
inline EntropyIntegral two_convex_gamma2_upper(const PointCloud& cloud) {
    Traversal tr = greedy_traversal(cloud);
    EntropyIntegral out = detail::entropy_curve(cloud, tr);
    if (out.scales.empty()) return out;
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < out.scales.size(); ++j) {
        double hi = out.scales[j], lo = out.scales[j + 1];
        acc += std::log(static_cast<double>(out.covers[j + 1])) * 0.5 * (hi * hi - lo * lo);
    }
    double eps_min = out.scales.back();
    acc += std::log(static_cast<double>(out.covers.back())) * 0.5 * eps_min * eps_min;
    out.value = std::sqrt(acc);
    return out;
}

// ---------------------------------------------------------------------
// Admissible sequences built from greedy prefixes: |T_s| = min(2^(2^s), m),
// automatically nested.  Value: sup_t sum_s 2^(s/2) d(t, T_s).
// ---------------------------------------------------------------------

struct AdmissibleResult {
    double value = 0.0;
    std::vector<int> level_sizes;
    std::vector<std::vector<int>> levels;  // center indices per level
    int argmax_point = 0;
};

inline AdmissibleResult admissible_gamma2(const PointCloud& cloud) {
    const int m = cloud.size();
    std::vector<int> sizes{1};  // |T_0| = 1, |T_s| = 2^(2^s) capped at m
    for (int s = 1; sizes.back() < m; ++s) {
        double want = std::pow(2.0, std::pow(2.0, static_cast<double>(s)));
        sizes.push_back(want >= static_cast<double>(m) ? m : static_cast<int>(want));
    }
    Traversal tr = greedy_traversal(cloud, sizes);

    AdmissibleResult out;
    out.level_sizes = sizes;
    for (std::size_t s = 0; s < sizes.size(); ++s)
        out.levels.emplace_back(tr.order.begin(), tr.order.begin() + sizes[s]);

    for (int t = 0; t < m; ++t) {
        double total = 0.0;
        for (std::size_t s = 0; s < sizes.size(); ++s)
            total += std::pow(2.0, 0.5 * static_cast<double>(s)) *
                     tr.snapshot_dmin[s][static_cast<std::size_t>(t)];
        if (total > out.value) {
            out.value = total;
            out.argmax_point = t;
        }
    }
    return out;
}

// ---------------------------------------------------------------------
// Sudakov-type lower estimate: max over the scale grid of
// eps * sqrt(log P(eps)) where P(eps) is the greedy packing count under the
// half-separation convention (points pairwise >= 2 eps apart).
// ---------------------------------------------------------------------

struct SudakovResult {
    double value = 0.0;
    double best_scale = 0.0;
    std::vector<double> scales;
    std::vector<int> packs;
};

inline SudakovResult sudakov_lower(const PointCloud& cloud) {
    Traversal tr = greedy_traversal(cloud);
    SudakovResult out;
    out.scales = scale_grid(cloud.diameter());
    for (double eps : out.scales) {
        int p = 0;
        for (std::size_t j = 0; j < tr.insertion.size(); ++j)
            if (tr.insertion[j] >= 2.0 * eps) ++p;
        p = std::max(p, 1);
        out.packs.push_back(p);
        double v = eps * std::sqrt(std::log(static_cast<double>(p)));
        if (v > out.value) {
            out.value = v;
            out.best_scale = eps;
        }
    }
    return out;
}

// ---------------------------------------------------------------------
// Combinatorial packing of ell-subsets of {0,...,k-1} under the symmetric
// difference: pairwise |I xor J| >= lambda * ell.  Lexicographic greedy is
// exhaustive for small instance counts; otherwise randomized greedy.
// ---------------------------------------------------------------------

struct SubsetPacking {
    std::vector<std::vector<int>> sets;
    double log_size = 0.0;
    double target = 0.0;  // (1 - lambda) * ell * log(c * k / ell)
    bool exhaustive = false;
};

namespace detail {

inline int sym_diff_size(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t i = 0, j = 0;
    int common = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) { ++common; ++i; ++j; }
        else if (a[i] < b[j]) ++i;
        else ++j;
    }
    return static_cast<int>(a.size() + b.size()) - 2 * common;
}

inline double log_binom(int k, int ell) {
    return std::lgamma(k + 1.0) - std::lgamma(ell + 1.0) - std::lgamma(k - ell + 1.0);
}

}  // namespace detail

inline SubsetPacking subset_packing(int k, int ell, double lambda, std::uint64_t seed = 0,
                                    double c = 1.0, int random_budget = 20000) {
    if (ell < 1 || ell > k) throw std::invalid_argument("subset_packing: need 1 <= ell <= k");
    // |I xor J| <= 2 ell, so separations up to lambda = 2 are meaningful.
    if (!(lambda > 0.0) || lambda > 2.0) throw std::invalid_argument("subset_packing: lambda in (0,2]");
    SubsetPacking out;
    out.target = (1.0 - lambda) * static_cast<double>(ell) *
                 std::log(c * static_cast<double>(k) / static_cast<double>(ell));
    const double threshold = lambda * static_cast<double>(ell);

    auto compatible = [&](const std::vector<int>& cand) {
        for (const auto& s : out.sets)
            if (detail::sym_diff_size(s, cand) < threshold) return false;
        return true;
    };

    if (detail::log_binom(k, ell) <= std::log(2e5)) {
        out.exhaustive = true;
        std::vector<int> cand(static_cast<std::size_t>(ell));
        for (int i = 0; i < ell; ++i) cand[static_cast<std::size_t>(i)] = i;
        for (;;) {
            if (compatible(cand)) out.sets.push_back(cand);
            int i = ell - 1;
            while (i >= 0 && cand[static_cast<std::size_t>(i)] == k - ell + i) --i;
            if (i < 0) break;
            ++cand[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < ell; ++j)
                cand[static_cast<std::size_t>(j)] = cand[static_cast<std::size_t>(j - 1)] + 1;
        }
    } else {
        RngStream rng(mix_seed(seed, 0x7061636bULL));
        std::vector<int> pool(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) pool[static_cast<std::size_t>(i)] = i;
        for (int tries = 0; tries < random_budget; ++tries) {
            for (int i = 0; i < ell; ++i) {  // partial Fisher-Yates
                std::size_t j = static_cast<std::size_t>(i) +
                                static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(k - i)));
                std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
            }
            std::vector<int> cand(pool.begin(), pool.begin() + ell);
            std::sort(cand.begin(), cand.end());
            if (compatible(cand)) out.sets.push_back(std::move(cand));
        }
    }
    out.log_size = out.sets.empty() ? -kInf : std::log(static_cast<double>(out.sets.size()));
    return out;
}

// ---------------------------------------------------------------------
// Monte Carlo gaussian mean width of an index class.
// ---------------------------------------------------------------------

struct WidthEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    int trials = 0;
};

inline WidthEstimate gaussian_width(const IndexClass& cls, int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("gaussian_width: trials must be >= 1");
    std::vector<double> sups(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        RngStream rng(mix_seed(seed, 0x7769647468ULL, static_cast<std::uint64_t>(t)));
        Vec g(cls.n);
        for (int i = 0; i < cls.n; ++i) g[i] = rng.gaussian();
        sups[static_cast<std::size_t>(t)] = cls.support(g);
    }
    WidthEstimate w;
    w.value = mean_of(sups);
    w.stderr_ = stderr_of_mean(sups);
    w.trials = trials;
    return w;
}

// ---------------------------------------------------------------------
// Bundled report
// ---------------------------------------------------------------------

struct ChainingReport {
    EntropyIntegral dudley;
    EntropyIntegral two_convex;
    AdmissibleResult admissible;
    SudakovResult sudakov;
    WidthEstimate width;          // only when an index class is supplied
    bool has_width = false;
    double fitted_sudakov_ratio = 0.0;  // sudakov / admissible, recorded

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["dudley_upper"] = dudley.value;
        j["two_convex_upper"] = two_convex.value;
        j["admissible_upper"] = admissible.value;
        j["admissible_level_sizes"] = admissible.level_sizes;
        j["sudakov_lower"] = sudakov.value;
        j["sudakov_best_scale"] = sudakov.best_scale;
        j["fitted_sudakov_ratio"] = fitted_sudakov_ratio;
        j["scales"] = dudley.scales;
        j["covering_numbers"] = dudley.covers;
        j["packing_numbers"] = sudakov.packs;
        if (has_width) {
            j["gaussian_width"] = width.value;
            j["gaussian_width_stderr"] = width.stderr_;
        }
        j["semantics"] = {{"dudley_upper", "upper bound"},
                          {"two_convex_upper", "upper bound"},
                          {"admissible_upper", "upper bound"},
                          {"sudakov_lower", "lower bound"}};
        return j;
    }

    void covering_curve_csv(std::ostream& os) const {
        os << "epsilon,cover,log_cover,pack,log_pack\n";
        os.precision(17);
        for (std::size_t i = 0; i < dudley.scales.size(); ++i) {
            int pack = i < sudakov.packs.size() ? sudakov.packs[i] : 1;
            os << dudley.scales[i] << "," << dudley.covers[i] << ","
               << std::log(static_cast<double>(dudley.covers[i])) << "," << pack << ","
               << std::log(static_cast<double>(pack)) << "\n";
        }
    }
};

inline ChainingReport build_report(const PointCloud& cloud) {
    ChainingReport r;
    r.dudley = dudley_gamma2_upper(cloud);
    r.two_convex = two_convex_gamma2_upper(cloud);
    r.admissible = admissible_gamma2(cloud);
    r.sudakov = sudakov_lower(cloud);
    if (r.admissible.value > 0.0) r.fitted_sudakov_ratio = r.sudakov.value / r.admissible.value;
    return r;
}

inline ChainingReport build_report(const PointCloud& cloud, const IndexClass& cls, int width_trials,
                                   std::uint64_t seed) {
    ChainingReport r = build_report(cloud);
    r.width = gaussian_width(cls, width_trials, seed);
    r.has_width = true;
    return r;
}

}  // namespace olab::chaining
