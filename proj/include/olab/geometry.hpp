#pragma once

#include <functional>

#include <json.hpp>

#include "olab/bounds.hpp"
#include "olab/common.hpp"
#include "olab/detail/simplex_lp.hpp"
#include "olab/index_class.hpp"
#include "olab/measures.hpp"
#include "olab/orlicz.hpp"

namespace olab::geometry {

// Random operators built from sample rows, their kernels, diameters of
// kernel sections of symmetric convex bodies, and the fixed-point radii
// that bound those diameters.

// ---------------------------------------------------------------------
// Random operator and kernel
// ---------------------------------------------------------------------

struct RandomOperator {
    enum class Scaling { raw, inv_sqrt_k };

    Mat matrix;  // k x n, row i is the i-th sample
    Scaling scaling = Scaling::raw;

    static RandomOperator from_rows(Mat rows, Scaling s = Scaling::raw) {
        RandomOperator op;
        op.matrix = std::move(rows);
        op.scaling = s;
        return op;
    }
    static RandomOperator from_sample(const measures::SampleMatrix& sm,
                                      Scaling s = Scaling::raw) {
        return from_rows(sm.rows, s);
    }

    int k() const { return static_cast<int>(matrix.rows()); }
    int n() const { return static_cast<int>(matrix.cols()); }
    double factor() const {
        return scaling == Scaling::inv_sqrt_k && k() > 0
                   ? 1.0 / std::sqrt(static_cast<double>(k()))
                   : 1.0;
    }
    Vec apply(const Vec& x) const { return factor() * (matrix * x); }
};

// Orthonormal basis of the numerical kernel (columns).  The scaling flag
// never changes the kernel, so the raw matrix is decomposed.
inline Mat kernel_basis(const RandomOperator& op, double tolerance = 1e-10) {
    const int n = op.n();
    if (op.k() == 0) return Mat::Identity(n, n);
    if (!op.matrix.allFinite()) throw std::invalid_argument("kernel_basis: matrix must be finite");
    Eigen::JacobiSVD<Mat> svd(op.matrix, Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    double smax = sigma.size() > 0 ? sigma[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sigma.size(); ++i)
        if (sigma[i] > tolerance * smax) ++rank;
    return svd.matrixV().rightCols(n - rank);
}

// ---------------------------------------------------------------------
// Symmetric convex bodies and their gauges
// ---------------------------------------------------------------------

struct BodySpec {
    enum class Kind { l1_ball, l2_ball, finite_polytope };

    Kind kind = Kind::l2_ball;
    int n = 1;
    double scale = 1.0;
    Mat vertices;  // finite_polytope only; rows, must be sign-symmetric

    static BodySpec l1_ball(int n) {
        BodySpec b;
        b.kind = Kind::l1_ball;
        b.n = n;
        return b;
    }
    static BodySpec l2_ball(int n) {
        BodySpec b;
        b.kind = Kind::l2_ball;
        b.n = n;
        return b;
    }
    static BodySpec finite_polytope(Mat verts) {
        if (verts.rows() < 2) throw std::invalid_argument("BodySpec: need at least one vertex pair");
        BodySpec b;
        b.kind = Kind::finite_polytope;
        b.n = static_cast<int>(verts.cols());
        b.vertices = std::move(verts);
        b.validate();
        return b;
    }
    BodySpec scaled(double rho) const {
        if (!(rho > 0.0)) throw std::invalid_argument("BodySpec: scale must be positive");
        BodySpec b = *this;
        b.scale *= rho;
        return b;
    }

    void validate() const {
        if (n < 1) throw std::invalid_argument("BodySpec: n must be >= 1");
        if (!(scale > 0.0)) throw std::invalid_argument("BodySpec: scale must be positive");
        if (kind == Kind::finite_polytope) {
            // symmetry: every vertex needs its negation in the list
            for (int i = 0; i < vertices.rows(); ++i) {
                bool found = false;
                for (int j = 0; j < vertices.rows() && !found; ++j)
                    found = (vertices.row(i) + vertices.row(j)).cwiseAbs().maxCoeff() <= 1e-12;
                if (!found)
                    throw std::invalid_argument("BodySpec: polytope vertex list must be sign-symmetric");
            }
        }
    }

    // Minkowski functional: the smallest r with u in r*K.  Infinite when u
    // lies outside the span of a polytope's vertices.
    double gauge(const Vec& u) const {
        if (u.size() != n) throw std::invalid_argument("BodySpec::gauge: dimension mismatch");
        switch (kind) {
            case Kind::l1_ball: return u.lpNorm<1>() / scale;
            case Kind::l2_ball: return u.norm() / scale;
            case Kind::finite_polytope: {
                auto lp = detail::solve_equality_lp(vertices.transpose(), u,
                                                    Vec::Ones(vertices.rows()));
                if (lp.status != detail::LpResult::Status::optimal) return kInf;
                return lp.objective / scale;
            }
        }
        throw std::logic_error("BodySpec::gauge: bad kind");
    }

    // A subgradient of the gauge at u: a vector z with gauge(x) >= <z, x>
    // everywhere and equality at u.  For polytopes the equality multipliers
    // of the gauge program provide it.
    Vec gauge_subgradient(const Vec& u) const {
        if (u.size() != n) throw std::invalid_argument("BodySpec::gauge_subgradient: dimension mismatch");
        switch (kind) {
            case Kind::l1_ball: {
                Vec z(n);
                for (int i = 0; i < n; ++i) z[i] = u[i] > 0.0 ? 1.0 : (u[i] < 0.0 ? -1.0 : 0.0);
                return z / scale;
            }
            case Kind::l2_ball: {
                double r = u.norm();
                return r > 0.0 ? Vec(u / (r * scale)) : Vec(Vec::Zero(n));
            }
            case Kind::finite_polytope: {
                auto lp = detail::solve_equality_lp(vertices.transpose(), u,
                                                    Vec::Ones(vertices.rows()));
                if (lp.status != detail::LpResult::Status::optimal) return Vec::Zero(n);
                return lp.duals / scale;
            }
        }
        throw std::logic_error("BodySpec::gauge_subgradient: bad kind");
    }
};

// ---------------------------------------------------------------------
// Diameter of a kernel section
// ---------------------------------------------------------------------

struct SectionOptions {
    int restarts = 64;
    int iterations = 300;
    int net_budget = 100000;  // dense direction net when the kernel dim is <= 3
    double step = 0.5;
    double rank_tolerance = 1e-10;
    std::uint64_t seed = 0;
};

struct SectionResult {
    double value = 0.0;   // diameter estimate; a certified lower bound
    Vec certificate;      // boundary point of the section, norm = value / 2
    double min_gauge = kInf;
    int kernel_dim = 0;
    bool net_exact = false;  // dense-net regime (kernel dim <= 3)
};

// Largest Euclidean diameter of body ∩ ker(op), via the reduction
// diameter = 2 / min_{|y|=1} gauge(V y) over kernel coordinates y.  The
// minimum of a gauge over a sphere is found by a dense net in low kernel
// dimension plus multi-start projected subgradient descent.
inline SectionResult section_diameter(const RandomOperator& op, const BodySpec& body,
                                      const SectionOptions& opts = {}) {
    if (body.n != op.n()) throw std::invalid_argument("section_diameter: dimension mismatch");
    body.validate();
    SectionResult res;
    Mat v = kernel_basis(op, opts.rank_tolerance);
    const int d = static_cast<int>(v.cols());
    res.kernel_dim = d;
    if (d == 0) return res;  // trivial kernel: the section is {0}

    Vec best_y;
    auto consider = [&](const Vec& y) {
        double g = body.gauge(v * y);
        if (g < res.min_gauge) {
            res.min_gauge = g;
            best_y = y;
        }
    };

    for (int i = 0; i < d; ++i) consider(Vec::Unit(d, i));

    // Dense nets make low-dimensional kernels effectively exact; polytope
    // gauges pay an LP per point, so their nets stay small.
    res.net_exact = d <= 3;
    int budget = opts.net_budget;
    if (body.kind == BodySpec::Kind::finite_polytope) budget = std::min(budget, 512);
    if (d == 2) {
        int m = std::min(budget, 65536);
        for (int j = 0; j < m; ++j) {
            double a = M_PI * static_cast<double>(j) / static_cast<double>(m);
            Vec y(2);
            y << std::cos(a), std::sin(a);
            consider(y);
        }
    } else if (d == 3) {
        Mat net = sphere_net(3, budget, mix_seed(opts.seed, 0x73656374ULL));
        for (int j = 0; j < net.rows(); ++j) consider(net.row(j).transpose());
    }

    if (d > 1) {
        // subgradient descent restarts: incumbent, then seeded directions
        for (int r = 0; r < opts.restarts; ++r) {
            Vec y;
            if (r == 0 && best_y.size() > 0) {
                y = best_y;
            } else {
                RngStream rng(mix_seed(opts.seed, 0x73646573ULL, static_cast<std::uint64_t>(r)));
                y = Vec(d);
                for (int i = 0; i < d; ++i) y[i] = rng.gaussian();
                if (y.norm() == 0.0) continue;
                y.normalize();
            }
            for (int it = 1; it <= opts.iterations; ++it) {
                Vec grad = v.transpose() * body.gauge_subgradient(v * y);
                double gn = grad.norm();
                if (gn == 0.0) break;
                y = (y - (opts.step / std::sqrt(static_cast<double>(it))) * grad / gn).normalized();
                consider(y);
            }
        }
    }

    if (res.min_gauge == kInf || !(res.min_gauge > 0.0)) {
        // the body never meets the kernel sphere directionally: section {0}
        res.min_gauge = kInf;
        return res;
    }
    res.value = 2.0 / res.min_gauge;
    res.certificate = v * best_y / res.min_gauge;
    return res;
}

// ---------------------------------------------------------------------
// Fixed-point radii
// ---------------------------------------------------------------------

struct FixedPointOptions {
    double rho_min = 1e-4;
    double rho_max = 1e4;
    int grid = 24;
    int bisect_iterations = 200;
};

struct FixedPointResult {
    double value = kInf;
    bool satisfied = false;
    std::string variant;
    std::vector<double> grid;
    std::vector<double> residuals;  // rho - required level, per grid point

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["value"] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json("inf");
        j["satisfied"] = satisfied;
        j["variant"] = variant;
        j["grid"] = grid;
        j["residuals"] = residuals;
        return j;
    }
};

enum class QStarVariant { log_weight, power_weight };

inline const char* q_star_variant_name(QStarVariant v) {
    return v == QStarVariant::log_weight ? "log_weight" : "power_weight";
}

namespace detail {

// Smallest rho with rho >= required(rho), where required is nonincreasing:
// scan a geometric grid, then bisect the bracketing interval.
inline FixedPointResult solve_fixed_point(const std::function<double(double)>& required,
                                          const std::function<double(double)>& profile,
                                          const FixedPointOptions& opts, std::string variant) {
    if (opts.grid < 2 || !(opts.rho_min > 0.0) || !(opts.rho_max > opts.rho_min))
        throw std::invalid_argument("solve_fixed_point: bad grid options");
    FixedPointResult res;
    res.variant = std::move(variant);
    double log_lo = std::log(opts.rho_min), log_hi = std::log(opts.rho_max);
    double prev_profile = kInf;
    int first_ok = -1;
    for (int i = 0; i < opts.grid; ++i) {
        double rho = std::exp(log_lo + (log_hi - log_lo) * i / (opts.grid - 1));
        double p = profile(rho);
        if (p > prev_profile * (1.0 + 1e-9) + 1e-12)
            throw std::invalid_argument("solve_fixed_point: profile must be nonincreasing");
        prev_profile = p;
        res.grid.push_back(rho);
        res.residuals.push_back(rho - required(rho));
        if (first_ok < 0 && res.residuals.back() >= 0.0) first_ok = i;
    }
    if (first_ok < 0) return res;  // infinity sentinel: never satisfied on the grid

    double hi = res.grid[static_cast<std::size_t>(first_ok)];
    double lo;
    if (first_ok > 0) {
        lo = res.grid[static_cast<std::size_t>(first_ok - 1)];
    } else {
        lo = hi;
        while (lo > 1e-12 && lo / 2.0 - required(lo / 2.0) >= 0.0) {
            hi = lo / 2.0;
            lo /= 2.0;
        }
        if (lo <= 1e-12) {  // satisfied arbitrarily close to zero
            res.value = hi;
            res.satisfied = true;
            return res;
        }
        lo /= 2.0;
        if (lo - required(lo) >= 0.0) {
            res.value = lo;
            res.satisfied = true;
            return res;
        }
    }
    for (int it = 0; it < opts.bisect_iterations; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid - required(mid) >= 0.0) hi = mid; else lo = mid;
    }
    res.value = hi;
    res.satisfied = true;
    return res;
}

}  // namespace detail

// Smallest radius at which the complexity profile stops dominating: the
// log_weight variant weighs the profile by the square root of its own
// logarithm, the power_weight variant by the square root of the profile
// itself.  Reads c5.
inline FixedPointResult q_star(const std::function<double(double)>& profile, long long k,
                               const bounds::ConstantSet& cs = {},
                               QStarVariant variant = QStarVariant::log_weight,
                               const FixedPointOptions& opts = {}) {
    if (k < 1) throw std::invalid_argument("q_star: k must be >= 1");
    double c = cs.at(5);
    double sk = std::sqrt(static_cast<double>(k));
    auto required = [&, c, sk](double rho) {
        double vr = profile(rho);
        if (!(vr >= 0.0)) throw std::invalid_argument("q_star: profile must be nonnegative");
        if (variant == QStarVariant::log_weight)
            return c * vr * std::sqrt(std::max(std::log(vr), 0.0)) / sk;
        return c * vr * std::sqrt(vr) / sk;
    };
    return detail::solve_fixed_point(required, profile, opts, q_star_variant_name(variant));
}

// Same fixed point driven by a width profile and the psi_2 norm bound
// alpha of the ambient measure.  Reads c1.
inline FixedPointResult r_star(const std::function<double(double)>& width_profile, long long k,
                               double alpha, const bounds::ConstantSet& cs = {},
                               const FixedPointOptions& opts = {}) {
    if (k < 1) throw std::invalid_argument("r_star: k must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("r_star: alpha must be positive");
    double c = cs.at(1) * alpha * alpha / std::sqrt(static_cast<double>(k));
    auto required = [&, c](double rho) {
        double w = width_profile(rho);
        if (!(w >= 0.0)) throw std::invalid_argument("r_star: width profile must be nonnegative");
        return c * w;
    };
    return detail::solve_fixed_point(required, width_profile, opts, "r_star");
}

// ---------------------------------------------------------------------
// Gaussian mean width of the truncated law in its psi_2 geometry
// ---------------------------------------------------------------------

struct EllEResult {
    double value = 0.0;
    double stderr_ = 0.0;
    double ratio_to_radius = 0.0;  // value / truncation radius
    int trials = 0;
};

// Mean over Gaussian draws g of the psi_2 norm of <g, Y>, with Y sampled
// from the (necessarily truncated) spec.  The ratio to the truncation
// radius is reported alongside, since the value is bounded by a constant
// multiple of it.
inline EllEResult ell_E_estimate(const measures::MeasureSpec& spec, int trials,
                                 std::uint64_t seed, int psi_sample = 4096) {
    spec.validate();
    if (!(spec.truncation_radius < kInf))
        throw std::invalid_argument("ell_E_estimate: spec must have a finite truncation radius");
    if (trials < 1) throw std::invalid_argument("ell_E_estimate: trials must be >= 1");
    auto nu = measures::sample(spec, psi_sample, mix_seed(seed, 0x6e75ULL));
    std::vector<double> values(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        RngStream rng(mix_seed(seed, 0x656c6cULL, static_cast<std::uint64_t>(t)));
        Vec g(spec.n);
        for (int i = 0; i < spec.n; ++i) g[i] = rng.gaussian();
        Vec z = nu.rows * g;
        std::vector<double> zs(static_cast<std::size_t>(z.size()));
        for (int i = 0; i < z.size(); ++i) zs[static_cast<std::size_t>(i)] = z[i];
        values[static_cast<std::size_t>(t)] = orlicz::psi_norm_empirical(zs, 2.0).value;
    }
    EllEResult res;
    res.trials = trials;
    res.value = mean_of(values);
    res.stderr_ = stderr_of_mean(values);
    res.ratio_to_radius = spec.truncation_radius > 0.0 ? res.value / spec.truncation_radius : 0.0;
    return res;
}

}  // namespace olab::geometry
