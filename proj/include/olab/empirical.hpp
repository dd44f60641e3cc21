#pragma once

#include <bit>

#include "olab/common.hpp"
#include "olab/index_class.hpp"
#include "olab/measures.hpp"

namespace olab::empirical {

// Empirical-process functionals of a sample matrix over an index class:
// p-th moment deviations, tail counts of |<X_i, t>|, and sums over the
// ell largest inner products.  Exact routes exist at desk scale (matrix
// eigenvalues, subset enumeration); heuristics are certified lower bounds.

enum class Method { auto_pick, eigen_exact, net_lower, gradient_heuristic, enumeration_exact, heuristic };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::auto_pick: return "auto";
        case Method::eigen_exact: return "eigen_exact";
        case Method::net_lower: return "net_lower";
        case Method::gradient_heuristic: return "gradient_heuristic";
        case Method::enumeration_exact: return "enumeration_exact";
        case Method::heuristic: return "heuristic";
    }
    throw std::logic_error("method_name: bad enum");
}

// ---------------------------------------------------------------------
// Population moments m_p(t) = E |<X, t>|^p.
// ---------------------------------------------------------------------

struct MomentOptions {
    int mc_budget = 200000;  // draws for the Monte Carlo fallback
    std::uint64_t seed = 0;
};

struct MomentEstimate {
    double value = 0.0;
    double stderr_ = 0.0;  // 0 for closed forms
    bool closed_form = false;
};

// E |g|^p for a standard gaussian.
inline double gaussian_abs_moment(double p) {
    return std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * (p + 1.0)) / std::sqrt(M_PI);
}

inline MomentEstimate population_moment(const measures::MeasureSpec& spec, const Vec& t, double p,
                                        const MomentOptions& opts = {}) {
    if (t.size() != spec.n) throw std::invalid_argument("population_moment: dimension mismatch");
    if (!(p > 0.0)) throw std::invalid_argument("population_moment: p must be > 0");
    MomentEstimate est;
    if (spec.family == measures::Family::gaussian && spec.truncation_radius == kInf) {
        // <X, t> ~ N(0, scale^2 ||t||^2)
        est.value = std::pow(spec.scale * t.norm(), p) * gaussian_abs_moment(p);
        est.closed_form = true;
        return est;
    }
    if (p == 2.0 && spec.flag_isotropic && spec.truncation_radius == kInf) {
        est.value = t.squaredNorm();
        est.closed_form = true;
        return est;
    }
    measures::SampleMatrix sm =
        measures::sample(spec, opts.mc_budget, mix_seed(opts.seed, 0x6d6f6dULL));
    Vec z = sm.rows * t;
    std::vector<double> powers(static_cast<std::size_t>(z.size()));
    for (int i = 0; i < z.size(); ++i)
        powers[static_cast<std::size_t>(i)] = std::pow(std::abs(z[i]), p);
    est.value = mean_of(powers);
    est.stderr_ = stderr_of_mean(powers);
    return est;
}

// Shared-sample moment functional: smooth in t, cheap to re-evaluate, and
// deterministic, which is what the direction optimizers need.
class MomentFunctional {
  public:
    MomentFunctional(const measures::MeasureSpec& spec, double p, const MomentOptions& opts = {})
        : p_(p) {
        if (spec.family == measures::Family::gaussian && spec.truncation_radius == kInf) {
            closed_form_ = true;
            scale_ = spec.scale;
        } else if (p == 2.0 && spec.flag_isotropic && spec.truncation_radius == kInf) {
            closed_form_ = true;
            isotropic_p2_ = true;
        } else {
            rows_ = measures::sample(spec, opts.mc_budget, mix_seed(opts.seed, 0x6d667375ULL)).rows;
        }
    }

    double operator()(const Vec& t) const {
        if (isotropic_p2_) return t.squaredNorm();
        if (closed_form_) return std::pow(scale_ * t.norm(), p_) * gaussian_abs_moment(p_);
        Vec z = rows_ * t;
        double s = 0.0;
        for (int i = 0; i < z.size(); ++i) s += std::pow(std::abs(z[i]), p_);
        return s / static_cast<double>(z.size());
    }

  private:
    double p_;
    bool closed_form_ = false;
    bool isotropic_p2_ = false;
    double scale_ = 1.0;
    Mat rows_;
};

// ---------------------------------------------------------------------
// Deviation of empirical p-th moments from population ones:
//   sup_{t in class} | (1/k) sum_i |<X_i,t>|^p  -  m_p(t) |.
// ---------------------------------------------------------------------

struct DeviationOptions {
    int net_budget = 0;  // 0: min(1e5, 20^n)
    int restarts = 32;
    int iterations = 500;
    int polish_iterations = 200;
    int final_polish_iterations = 20000;  // single long run from the incumbent
    std::uint64_t seed = 0;
    MomentOptions moment;
};

struct DeviationResult {
    double value = 0.0;
    Vec argmax;
    Method method = Method::auto_pick;
    double p = 2.0;
};

namespace detail {

inline double empirical_moment(const Mat& rows, const Vec& t, double p) {
    Vec z = rows * t;
    double s = 0.0;
    for (int i = 0; i < z.size(); ++i) s += std::pow(std::abs(z[i]), p);
    return s / static_cast<double>(rows.rows());
}

inline Vec empirical_moment_grad(const Mat& rows, const Vec& t, double p) {
    Vec z = rows * t;
    Vec g = Vec::Zero(t.size());
    for (int i = 0; i < z.size(); ++i) {
        double a = std::abs(z[i]);
        if (a > 0.0)
            g += p * std::pow(a, p - 1.0) * (z[i] > 0 ? 1.0 : -1.0) * rows.row(i).transpose();
    }
    return g / static_cast<double>(rows.rows());
}

}  // namespace detail

inline DeviationResult deviation_sup(const measures::SampleMatrix& sample, const IndexClass& cls,
                                     double p, Method method = Method::auto_pick,
                                     const DeviationOptions& opts = {}) {
    if (cls.n != sample.n()) throw std::invalid_argument("deviation_sup: dimension mismatch");
    if (!(p > 0.0)) throw std::invalid_argument("deviation_sup: p must be > 0");
    const Mat& rows = sample.rows;
    const double k = static_cast<double>(sample.k());

    DeviationResult res;
    res.p = p;

    const bool isotropic_p2 = p == 2.0 && sample.spec.flag_isotropic &&
                              sample.spec.truncation_radius == kInf &&
                              cls.kind == IndexClass::Kind::sphere;

    if (method == Method::auto_pick)
        method = isotropic_p2 ? Method::eigen_exact
                              : (cls.is_finite() ? Method::net_lower : Method::gradient_heuristic);

    if (method == Method::eigen_exact) {
        // sup_{|t|=1} |t' M t - 1| for M the empirical second moment matrix.
        if (!isotropic_p2)
            throw std::invalid_argument(
                "deviation_sup: eigen_exact needs p=2, a sphere class and isotropic population moments");
        Mat m = rows.transpose() * rows / k;
        Eigen::SelfAdjointEigenSolver<Mat> es(m);
        double lo = es.eigenvalues().minCoeff();
        double hi = es.eigenvalues().maxCoeff();
        res.method = Method::eigen_exact;
        if (hi - 1.0 >= 1.0 - lo) {
            res.value = hi - 1.0;
            res.argmax = es.eigenvectors().col(cls.n - 1);
        } else {
            res.value = 1.0 - lo;
            res.argmax = es.eigenvectors().col(0);
        }
        return res;
    }

    MomentFunctional moment(sample.spec, p, opts.moment);
    auto objective = [&](const Vec& t) {
        return std::abs(detail::empirical_moment(rows, t, p) - moment(t));
    };

    auto eval_candidates = [&](const Mat& dirs) {
        for (int i = 0; i < dirs.rows(); ++i) {
            Vec t = dirs.row(i).transpose();
            double v = objective(t);
            if (v > res.value) {
                res.value = v;
                res.argmax = t;
            }
        }
    };

    if (cls.is_finite()) {
        eval_candidates(cls.vectors);
        res.method = Method::net_lower;
        return res;
    }
    if (cls.kind == IndexClass::Kind::l1_ball) {
        // The deviation is a maximum of two convex functions of t, so over the
        // cross-polytope it is not attained at a vertex in general; the signed
        // vertices still give a certified lower bound.
        Mat verts = Mat::Zero(2 * cls.n, cls.n);
        for (int i = 0; i < cls.n; ++i) {
            verts(2 * i, i) = 1.0;
            verts(2 * i + 1, i) = -1.0;
        }
        eval_candidates(verts);
        res.method = Method::net_lower;
        return res;
    }
    if (cls.kind != IndexClass::Kind::sphere)
        throw std::invalid_argument("deviation_sup: continuous classes other than the sphere are not supported");

    Mat net = sphere_net(cls.n, opts.net_budget > 0 ? opts.net_budget : default_net_budget(cls.n),
                         mix_seed(opts.seed, 0x64657636ULL));
    eval_candidates(net);
    if (method == Method::net_lower) {
        res.method = Method::net_lower;
        return res;
    }

    // Projected gradient ascent on both branches (empirical minus population
    // and its negation), then a generalized power-method polish.  phi is
    // convex on R^n, so normalized-gradient steps maximize it over the
    // sphere; the shifted iteration t <- normalize(2Ct - grad phi) with C
    // beyond the curvature bound handles the minimizing branch.
    double curvature = 0.0;
    for (int i = 0; i < rows.rows(); ++i) curvature += std::pow(rows.row(i).norm(), p);
    curvature = 1.0 + 0.5 * p * std::max(p - 1.0, 1.0) * curvature / k;

    Vec best_net = res.argmax.size() ? res.argmax : Vec::Unit(cls.n, 0);
    for (int branch = 0; branch < 2; ++branch) {
        double sgn = branch == 0 ? 1.0 : -1.0;  // maximize sgn * (phi - m)
        for (int r = 0; r < opts.restarts; ++r) {
            Vec t(cls.n);
            if (r == 0) {
                t = best_net;
            } else {
                RngStream rng(mix_seed(opts.seed, 0x64657672ULL, static_cast<std::uint64_t>(branch),
                                       static_cast<std::uint64_t>(r)));
                for (int j = 0; j < cls.n; ++j) t[j] = rng.gaussian();
            }
            t.normalize();
            for (int it = 1; it <= opts.iterations; ++it) {
                Vec g = sgn * detail::empirical_moment_grad(rows, t, p);
                double gn = g.norm();
                if (gn == 0.0) break;
                t = (t + (1.0 / std::sqrt(static_cast<double>(it))) * g / gn).normalized();
            }
            for (int it = 0; it < opts.polish_iterations; ++it) {
                Vec g = detail::empirical_moment_grad(rows, t, p);
                Vec next = branch == 0 ? g : Vec(2.0 * curvature * t - g);
                double nn = next.norm();
                if (nn == 0.0) break;
                next /= nn;
                if ((next - t).norm() < 1e-15) { t = next; break; }
                t = next;
            }
            double v = objective(t);
            if (v > res.value) {
                res.value = v;
                res.argmax = t;
            }
        }
    }

    // One long polish from the incumbent on each branch.  The shifted power
    // iterations converge linearly, so a deep run closes the last digits when
    // the spectral gap is small without paying for it on every restart.
    Vec incumbent = res.argmax;
    for (int branch = 0; branch < 2; ++branch) {
        Vec t = incumbent;
        for (int it = 0; it < opts.final_polish_iterations; ++it) {
            Vec g = detail::empirical_moment_grad(rows, t, p);
            Vec next = branch == 0 ? g : Vec(2.0 * curvature * t - g);
            double nn = next.norm();
            if (nn == 0.0) break;
            next /= nn;
            if ((next - t).norm() < 1e-15) { t = next; break; }
            t = next;
        }
        double v = objective(t);
        if (v > res.value) {
            res.value = v;
            res.argmax = t;
        }
    }
    res.method = Method::gradient_heuristic;
    return res;
}

// ---------------------------------------------------------------------
// Tail counts: sup over the class of #{ i : |<X_i, t>| >= u }.
// Candidate directions are least-squares margin directions of signed row
// subsets; enumerating every signed subset is exact on the sphere because
// the max-min direction of the optimal support is such a solution.
// ---------------------------------------------------------------------

struct TailCountOptions {
    int net_budget = 4096;
    int greedy_cap = 24;     // largest greedy subset size tried
    int exact_max_k = 12;    // enumeration threshold for auto_pick
    std::uint64_t seed = 0;
};

struct TailCountResult {
    std::vector<double> levels;
    std::vector<int> counts;
    Method method = Method::heuristic;
};

namespace detail {

// Minimum-norm solution of <eps_i x_i, t> = 1 over the given subset.
inline Vec least_squares_direction(const Mat& rows, const std::vector<int>& subset,
                                   const std::vector<int>& signs) {
    const int m = static_cast<int>(subset.size());
    Mat a(m, rows.cols());
    for (int i = 0; i < m; ++i)
        a.row(i) = rows.row(subset[static_cast<std::size_t>(i)]) *
                   static_cast<double>(signs[static_cast<std::size_t>(i)]);
    Vec rhs = Vec::Ones(m);
    Vec t = a.completeOrthogonalDecomposition().solve(rhs);
    double n = t.norm();
    if (n > 0.0) t /= n;
    return t;
}

inline void count_at_levels(const Mat& rows, const Vec& t, const std::vector<double>& levels,
                            std::vector<int>& counts) {
    Vec z = (rows * t).cwiseAbs();
    for (std::size_t l = 0; l < levels.size(); ++l) {
        int c = 0;
        for (int i = 0; i < z.size(); ++i)
            if (z[i] >= levels[l]) ++c;
        counts[l] = std::max(counts[l], c);
    }
}

}  // namespace detail

inline TailCountResult tail_count_sup(const measures::SampleMatrix& sample, const IndexClass& cls,
                                      const std::vector<double>& levels, Method method = Method::auto_pick,
                                      const TailCountOptions& opts = {}) {
    for (std::size_t l = 0; l + 1 < levels.size(); ++l)
        if (!(levels[l] < levels[l + 1]))
            throw std::invalid_argument("tail_count_sup: levels must be strictly increasing");
    for (double u : levels)
        if (!(u > 0.0)) throw std::invalid_argument("tail_count_sup: levels must be positive");
    if (cls.n != sample.n()) throw std::invalid_argument("tail_count_sup: dimension mismatch");

    const Mat& rows = sample.rows;
    const int k = sample.k();

    TailCountResult res;
    res.levels = levels;
    res.counts.assign(levels.size(), 0);

    if (method == Method::auto_pick)
        method = (cls.kind == IndexClass::Kind::sphere && k <= opts.exact_max_k)
                     ? Method::enumeration_exact
                     : Method::heuristic;

    if (cls.is_finite()) {
        for (int i = 0; i < cls.vectors.rows(); ++i)
            detail::count_at_levels(rows, cls.vectors.row(i).transpose(), levels, res.counts);
        res.method = Method::net_lower;
        return res;
    }

    if (method == Method::enumeration_exact) {
        if (cls.kind != IndexClass::Kind::sphere)
            throw std::invalid_argument("tail_count_sup: enumeration is exact only on the sphere");
        if (k > 20) throw std::invalid_argument("tail_count_sup: enumeration supports k <= 20");
        // All subsets with all sign patterns (first member positive, by the
        // symmetry counts(t) = counts(-t)).
        std::vector<int> subset, signs;
        auto recurse = [&](auto&& self, int next) -> void {
            if (!subset.empty())
                detail::count_at_levels(rows, detail::least_squares_direction(rows, subset, signs),
                                        levels, res.counts);
            for (int i = next; i < k; ++i) {
                subset.push_back(i);
                signs.push_back(1);
                self(self, i + 1);
                if (!subset.empty() && subset.size() > 1) {
                    signs.back() = -1;
                    self(self, i + 1);
                }
                subset.pop_back();
                signs.pop_back();
            }
        };
        recurse(recurse, 0);
        res.method = Method::enumeration_exact;
        return res;
    }

    // Heuristic: random net, normalized rows, and least-squares directions
    // of greedily grown subsets (seeded by row norms, signs refreshed from
    // the current direction).
    if (cls.kind == IndexClass::Kind::sphere) {
        Mat net = sphere_net(cls.n, opts.net_budget, mix_seed(opts.seed, 0x74636e74ULL));
        for (int i = 0; i < net.rows(); ++i)
            detail::count_at_levels(rows, net.row(i).transpose(), levels, res.counts);
    }
    for (int i = 0; i < k; ++i) {
        double n = rows.row(i).norm();
        if (n == 0.0) continue;
        Vec t = rows.row(i).transpose() / n;
        if (cls.kind == IndexClass::Kind::l1_ball) {
            double l1 = t.lpNorm<1>();
            if (l1 > 0.0) t /= l1;
        }
        detail::count_at_levels(rows, t, levels, res.counts);
    }

    std::vector<int> by_norm(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) by_norm[static_cast<std::size_t>(i)] = i;
    std::sort(by_norm.begin(), by_norm.end(), [&](int a, int b) {
        double na = rows.row(a).norm(), nb = rows.row(b).norm();
        return na != nb ? na > nb : a < b;
    });
    std::vector<int> subset, signs;
    Vec current = rows.row(by_norm[0]).transpose();
    if (current.norm() > 0.0) current.normalize();
    int cap = std::min(k, opts.greedy_cap);
    for (int m = 0; m < cap; ++m) {
        subset.push_back(by_norm[static_cast<std::size_t>(m)]);
        signs.push_back(1);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < subset.size(); ++j) {
                double dot = rows.row(subset[j]).dot(current.transpose());
                signs[j] = dot >= 0.0 ? 1 : -1;
            }
            Vec t = detail::least_squares_direction(rows, subset, signs);
            if (t.norm() == 0.0) break;
            if (cls.kind == IndexClass::Kind::l1_ball) {
                double l1 = t.lpNorm<1>();
                if (l1 > 0.0) t /= l1;
            }
            detail::count_at_levels(rows, t, levels, res.counts);
            current = t;
        }
    }
    res.method = Method::heuristic;
    return res;
}

// ---------------------------------------------------------------------
// Top-ell sums: sup over unit t and |I| = ell of sum_{i in I} |<X_i, t>|,
// equal to the largest euclidean norm of a signed sum of ell rows.
// ---------------------------------------------------------------------

struct TopEllOptions {
    int local_search_passes = 6;
    std::uint64_t seed = 0;
};

struct TopEllResult {
    double value = 0.0;
    std::vector<int> subset;
    std::vector<int> signs;
    Method method = Method::heuristic;
};

inline TopEllResult top_ell_sum_sup(const measures::SampleMatrix& sample, int ell,
                                    Method method = Method::auto_pick, const TopEllOptions& opts = {}) {
    const Mat& rows = sample.rows;
    const int k = sample.k();
    if (ell < 1 || ell > k) throw std::invalid_argument("top_ell_sum_sup: need 1 <= ell <= k");

    if (method == Method::auto_pick)
        method = k <= 12 ? Method::enumeration_exact : Method::heuristic;

    TopEllResult res;

    if (method == Method::enumeration_exact) {
        if (k > 20) throw std::invalid_argument("top_ell_sum_sup: enumeration supports k <= 20");
        std::vector<int> subset(static_cast<std::size_t>(ell));
        for (int i = 0; i < ell; ++i) subset[static_cast<std::size_t>(i)] = i;
        for (;;) {
            // Gray-code walk over sign patterns with the first sign fixed.
            Vec sum = Vec::Zero(rows.cols());
            std::vector<int> signs(static_cast<std::size_t>(ell), 1);
            for (int i : subset) sum += rows.row(i).transpose();
            auto consider = [&]() {
                double v = sum.norm();
                if (v > res.value) {
                    res.value = v;
                    res.subset = subset;
                    res.signs = signs;
                }
            };
            consider();
            std::uint64_t patterns = ell > 1 ? (1ULL << (ell - 1)) : 1;
            std::uint64_t gray_prev = 0;
            for (std::uint64_t code = 1; code < patterns; ++code) {
                std::uint64_t gray = code ^ (code >> 1);
                std::uint64_t changed = gray ^ gray_prev;
                int bit = std::countr_zero(changed);
                gray_prev = gray;
                int pos = bit + 1;  // sign of subset[0] stays fixed
                signs[static_cast<std::size_t>(pos)] *= -1;
                sum += 2.0 * signs[static_cast<std::size_t>(pos)] *
                       rows.row(subset[static_cast<std::size_t>(pos)]).transpose();
                consider();
            }
            int i = ell - 1;
            while (i >= 0 && subset[static_cast<std::size_t>(i)] == k - ell + i) --i;
            if (i < 0) break;
            ++subset[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < ell; ++j)
                subset[static_cast<std::size_t>(j)] = subset[static_cast<std::size_t>(j - 1)] + 1;
        }
        res.method = Method::enumeration_exact;
        return res;
    }

    // Incremental greedy with local search at every level.  Growing the
    // locally improved ell-solution by the best signed row never decreases
    // the norm, so values are nondecreasing in ell across separate calls.
    std::vector<char> in_set(static_cast<std::size_t>(k), 0);
    std::vector<int> subset, signs;
    Vec sum = Vec::Zero(rows.cols());

    auto best_extension = [&]() {
        int best_i = -1, best_s = 1;
        double best_v = -1.0;
        for (int i = 0; i < k; ++i) {
            if (in_set[static_cast<std::size_t>(i)]) continue;
            for (int s : {1, -1}) {
                double v = (sum + s * rows.row(i).transpose()).norm();
                if (v > best_v) {
                    best_v = v;
                    best_i = i;
                    best_s = s;
                }
            }
        }
        return std::tuple<int, int>(best_i, best_s);
    };

    for (int level = 1; level <= ell; ++level) {
        auto [i, s] = best_extension();
        subset.push_back(i);
        signs.push_back(s);
        in_set[static_cast<std::size_t>(i)] = 1;
        sum += s * rows.row(i).transpose();

        for (int pass = 0; pass < opts.local_search_passes; ++pass) {
            bool improved = false;
            // sign flips
            for (std::size_t j = 0; j < subset.size(); ++j) {
                Vec alt = sum - 2.0 * signs[j] * rows.row(subset[j]).transpose();
                if (alt.norm() > sum.norm() + 1e-15) {
                    sum = alt;
                    signs[j] *= -1;
                    improved = true;
                }
            }
            // swaps
            for (std::size_t j = 0; j < subset.size(); ++j) {
                Vec without = sum - signs[j] * rows.row(subset[j]).transpose();
                double base = sum.norm();
                int best_i = -1, best_s = 1;
                double best_v = base;
                for (int i2 = 0; i2 < k; ++i2) {
                    if (in_set[static_cast<std::size_t>(i2)] && i2 != subset[j]) continue;
                    for (int s2 : {1, -1}) {
                        double v = (without + s2 * rows.row(i2).transpose()).norm();
                        if (v > best_v + 1e-15) {
                            best_v = v;
                            best_i = i2;
                            best_s = s2;
                        }
                    }
                }
                if (best_i >= 0 && (best_i != subset[j] || best_s != signs[j])) {
                    in_set[static_cast<std::size_t>(subset[j])] = 0;
                    in_set[static_cast<std::size_t>(best_i)] = 1;
                    sum = without + best_s * rows.row(best_i).transpose();
                    subset[j] = best_i;
                    signs[j] = best_s;
                    improved = true;
                }
            }
            if (!improved) break;
        }
    }
    res.value = sum.norm();
    res.subset = subset;
    res.signs = signs;
    res.method = Method::heuristic;
    return res;
}

}  // namespace olab::empirical
