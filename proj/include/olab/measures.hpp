#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "olab/common.hpp"

namespace olab::measures {

// Product / ball measures on R^n used as row distributions.  A spec fully
// determines the law of one sample row; sampling k rows with a given seed
// is reproducible bit for bit and independent of thread scheduling because
// every row gets its own derived stream.

enum class Family {
    gaussian,              // standard normal coordinates
    rademacher_cube,       // independent +-1 coordinates
    l1_ball_isotropic,     // uniform on the l1 ball (exponential spacings)
    weighted_exponential,  // coordinate i ~ Exp(1)/sqrt(log(i+1)), 1-based i
    custom_product,        // weights[i] * iid coordinate law
};

enum class CoordLaw { gaussian, exponential, symmetric_exponential, rademacher, uniform };

inline std::string family_name(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::rademacher_cube: return "rademacher_cube";
        case Family::l1_ball_isotropic: return "l1_ball_isotropic";
        case Family::weighted_exponential: return "weighted_exponential";
        case Family::custom_product: return "custom_product";
    }
    throw std::logic_error("family_name: bad enum");
}

inline Family family_from_name(const std::string& s) {
    if (s == "gaussian") return Family::gaussian;
    if (s == "rademacher_cube") return Family::rademacher_cube;
    if (s == "l1_ball_isotropic") return Family::l1_ball_isotropic;
    if (s == "weighted_exponential") return Family::weighted_exponential;
    if (s == "custom_product") return Family::custom_product;
    throw std::invalid_argument("unknown measure family: " + s);
}

inline std::string coord_law_name(CoordLaw l) {
    switch (l) {
        case CoordLaw::gaussian: return "gaussian";
        case CoordLaw::exponential: return "exponential";
        case CoordLaw::symmetric_exponential: return "symmetric_exponential";
        case CoordLaw::rademacher: return "rademacher";
        case CoordLaw::uniform: return "uniform";
    }
    throw std::logic_error("coord_law_name: bad enum");
}

inline CoordLaw coord_law_from_name(const std::string& s) {
    if (s == "gaussian") return CoordLaw::gaussian;
    if (s == "exponential") return CoordLaw::exponential;
    if (s == "symmetric_exponential") return CoordLaw::symmetric_exponential;
    if (s == "rademacher") return CoordLaw::rademacher;
    if (s == "uniform") return CoordLaw::uniform;
    throw std::invalid_argument("unknown coordinate law: " + s);
}

struct MeasureSpec {
    Family family = Family::gaussian;
    int n = 1;
    double scale = 1.0;                 // coordinate multiplier applied after raw sampling
    double truncation_radius = kInf;    // rows with ||x||_2 > R are replaced by 0
    bool flag_isotropic = false;        // declared isotropic (tests enforce it)
    bool symmetrize = false;            // weighted_exponential: multiply by random sign
    bool recenter = false;              // subtract the closed-form raw mean
    std::vector<double> weights;        // custom_product only
    CoordLaw coord_law = CoordLaw::gaussian;  // custom_product only

    void validate() const {
        if (n < 1) throw std::invalid_argument("MeasureSpec: n must be >= 1");
        if (!(scale > 0.0)) throw std::invalid_argument("MeasureSpec: scale must be > 0");
        if (truncation_radius < 0.0) throw std::invalid_argument("MeasureSpec: negative truncation radius");
        if (family == Family::custom_product && weights.size() != static_cast<std::size_t>(n))
            throw std::invalid_argument("MeasureSpec: custom_product needs one weight per coordinate");
    }

    static MeasureSpec gaussian(int n) {
        MeasureSpec s;
        s.family = Family::gaussian;
        s.n = n;
        s.flag_isotropic = true;
        return s;
    }

    static MeasureSpec cube(int n) {
        MeasureSpec s;
        s.family = Family::rademacher_cube;
        s.n = n;
        s.flag_isotropic = true;
        return s;
    }

    // Raw uniform distribution on the l1 ball (scale 1, not isotropic).
    static MeasureSpec l1_ball(int n) {
        MeasureSpec s;
        s.family = Family::l1_ball_isotropic;
        s.n = n;
        return s;
    }

    // Uniform on the l1 ball rescaled to unit coordinate variance.  The
    // exact second moment of a raw coordinate is 2/((n+1)(n+2)).
    static MeasureSpec l1_ball_isotropic(int n) {
        MeasureSpec s = l1_ball(n);
        s.scale = std::sqrt(0.5 * static_cast<double>(n + 1) * static_cast<double>(n + 2));
        s.flag_isotropic = true;
        return s;
    }

    static MeasureSpec weighted_exponential(int n) {
        MeasureSpec s;
        s.family = Family::weighted_exponential;
        s.n = n;
        return s;
    }

    static MeasureSpec custom_product(std::vector<double> w, CoordLaw law) {
        MeasureSpec s;
        s.family = Family::custom_product;
        s.n = static_cast<int>(w.size());
        s.weights = std::move(w);
        s.coord_law = law;
        return s;
    }

    MeasureSpec truncated(double radius) const {
        MeasureSpec s = *this;
        s.truncation_radius = radius;
        return s;
    }

    // Second moment of one raw (pre-scale) coordinate where a closed form
    // exists; coordinate 0 is used for coordinate-dependent families.
    std::optional<double> raw_coord_second_moment() const {
        switch (family) {
            case Family::gaussian: return 1.0;
            case Family::rademacher_cube: return 1.0;
            case Family::l1_ball_isotropic:
                return 2.0 / (static_cast<double>(n + 1) * static_cast<double>(n + 2));
            default: return std::nullopt;
        }
    }

    // Mean of the raw (pre-truncation) coordinate i, used by recentering.
    double raw_coord_mean(int i) const {
        switch (family) {
            case Family::weighted_exponential:
                return 1.0 / std::sqrt(std::log(static_cast<double>(i) + 2.0));
            case Family::custom_product:
                if (coord_law == CoordLaw::exponential) return weights[static_cast<std::size_t>(i)];
                return 0.0;
            default: return 0.0;  // symmetric families
        }
    }

    std::map<std::string, std::string> to_kv(const std::string& prefix = "measure.") const;
    static MeasureSpec from_kv(const std::map<std::string, std::string>& kv,
                               const std::string& prefix = "measure.");
};

// ---------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------

namespace detail {

inline void fill_raw_row(const MeasureSpec& spec, RngStream& rng, Vec& out) {
    const int n = spec.n;
    switch (spec.family) {
        case Family::gaussian:
            for (int i = 0; i < n; ++i) out[i] = rng.gaussian();
            break;
        case Family::rademacher_cube:
            for (int i = 0; i < n; ++i) out[i] = rng.sign();
            break;
        case Family::l1_ball_isotropic: {
            // Exponential spacings: (E_1,...,E_n)/(E_1+...+E_{n+1}) is uniform
            // on the solid simplex; random signs make it uniform on the ball.
            double total = rng.exponential();  // the slack coordinate
            for (int i = 0; i < n; ++i) {
                out[i] = rng.exponential();
                total += out[i];
            }
            for (int i = 0; i < n; ++i) out[i] = rng.sign() * out[i] / total;
            break;
        }
        case Family::weighted_exponential:
            for (int i = 0; i < n; ++i) {
                double y = rng.exponential() / std::sqrt(std::log(static_cast<double>(i) + 2.0));
                out[i] = spec.symmetrize ? rng.sign() * y : y;
            }
            break;
        case Family::custom_product:
            for (int i = 0; i < n; ++i) {
                double z = 0.0;
                switch (spec.coord_law) {
                    case CoordLaw::gaussian: z = rng.gaussian(); break;
                    case CoordLaw::exponential: z = rng.exponential(); break;
                    case CoordLaw::symmetric_exponential: z = rng.sign() * rng.exponential(); break;
                    case CoordLaw::rademacher: z = rng.sign(); break;
                    case CoordLaw::uniform: z = 2.0 * rng.uniform01() - 1.0; break;
                }
                out[i] = spec.weights[static_cast<std::size_t>(i)] * z;
            }
            break;
    }
}

}  // namespace detail

// One sample row.  Order of operations: raw draw, optional recentering,
// scale, then truncation (||x|| > R maps the row to the zero vector).
inline Vec sample_row(const MeasureSpec& spec, RngStream& rng) {
    Vec x(spec.n);
    detail::fill_raw_row(spec, rng, x);
    if (spec.recenter)
        for (int i = 0; i < spec.n; ++i) x[i] -= spec.raw_coord_mean(i);
    x *= spec.scale;
    if (spec.truncation_radius != kInf && x.norm() > spec.truncation_radius) x.setZero();
    return x;
}

struct SampleMatrix {
    Mat rows;  // k x n
    MeasureSpec spec;
    std::uint64_t seed = 0;

    int k() const { return static_cast<int>(rows.rows()); }
    int n() const { return static_cast<int>(rows.cols()); }

    void to_csv(std::ostream& os) const {
        os << "# family=" << family_name(spec.family) << "\n";
        os << "# n=" << spec.n << " k=" << k() << " seed=" << seed << "\n";
        os << "# scale=" << spec.scale << " truncation_radius=" << spec.truncation_radius << "\n";
        os.precision(17);
        for (int i = 0; i < rows.rows(); ++i) {
            for (int j = 0; j < rows.cols(); ++j) {
                if (j) os << ",";
                os << rows(i, j);
            }
            os << "\n";
        }
    }
};

inline constexpr std::uint64_t kRowStreamTag = 0x726f77ULL;  // stream domain tag

inline SampleMatrix sample(const MeasureSpec& spec, int k, std::uint64_t seed, int threads = 1) {
    spec.validate();
    if (k < 1) throw std::invalid_argument("sample: k must be >= 1");
    SampleMatrix sm;
    sm.spec = spec;
    sm.seed = seed;
    sm.rows.resize(k, spec.n);
    parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t row) {
        RngStream rng(mix_seed(seed, kRowStreamTag, row));
        sm.rows.row(static_cast<Eigen::Index>(row)) = sample_row(spec, rng).transpose();
    });
    return sm;
}

// ---------------------------------------------------------------------
// Calibration and radial statistics
// ---------------------------------------------------------------------

// Returns s such that s * X has estimated coordinate second moment 1, where
// X is drawn from the spec with its scale forced to 1 (truncation and
// recentering still apply).  Throws for degenerate measures.
inline double calibrate_isotropy(const MeasureSpec& spec, int m, std::uint64_t seed) {
    MeasureSpec unit = spec;
    unit.scale = 1.0;
    unit.validate();
    if (m < 1) throw std::invalid_argument("calibrate_isotropy: m must be >= 1");
    double acc = 0.0;
    RngStream rng(mix_seed(seed, 0x63616cULL));
    for (int j = 0; j < m; ++j) acc += sample_row(unit, rng).squaredNorm();
    double second_moment = acc / (static_cast<double>(m) * static_cast<double>(unit.n));
    if (!(second_moment > 0.0))
        throw std::domain_error("calibrate_isotropy: degenerate measure (zero second moment)");
    return 1.0 / std::sqrt(second_moment);
}

struct RadialStats {
    double mean = 0.0;    // estimate of E max_{i<=k} ||X_i||
    double stderr_ = 0.0;
    int trials = 0;
};

inline RadialStats radial_stats(const MeasureSpec& spec, int k, int trials, std::uint64_t seed) {
    spec.validate();
    if (k < 1 || trials < 1) throw std::invalid_argument("radial_stats: k and trials must be >= 1");
    std::vector<double> maxima(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        std::uint64_t trial_seed = mix_seed(seed, 0x747269ULL, static_cast<std::uint64_t>(t));
        double best = 0.0;
        for (int i = 0; i < k; ++i) {
            RngStream rng(mix_seed(trial_seed, kRowStreamTag, static_cast<std::uint64_t>(i)));
            best = std::max(best, sample_row(spec, rng).norm());
        }
        maxima[static_cast<std::size_t>(t)] = best;
    }
    RadialStats rs;
    rs.mean = mean_of(maxima);
    rs.stderr_ = stderr_of_mean(maxima);
    rs.trials = trials;
    return rs;
}

// ---------------------------------------------------------------------
// Key/value serialization (human readable, round-trips through configs)
// ---------------------------------------------------------------------

inline std::map<std::string, std::string> MeasureSpec::to_kv(const std::string& prefix) const {
    std::map<std::string, std::string> kv;
    auto put = [&](const std::string& key, const std::string& val) { kv[prefix + key] = val; };
    std::ostringstream num;
    num.precision(17);
    put("family", family_name(family));
    put("n", std::to_string(n));
    num.str(""); num << scale;
    put("scale", num.str());
    num.str("");
    if (truncation_radius == kInf) num << "inf"; else num << truncation_radius;
    put("truncation_radius", num.str());
    put("flag_isotropic", flag_isotropic ? "true" : "false");
    put("symmetrize", symmetrize ? "true" : "false");
    put("recenter", recenter ? "true" : "false");
    if (family == Family::custom_product) {
        put("coord_law", coord_law_name(coord_law));
        num.str("");
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (i) num << " ";
            num << weights[i];
        }
        put("weights", num.str());
    }
    return kv;
}

inline MeasureSpec MeasureSpec::from_kv(const std::map<std::string, std::string>& kv,
                                        const std::string& prefix) {
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(prefix + key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    MeasureSpec s;
    if (auto v = get("family")) s.family = family_from_name(*v);
    if (auto v = get("n")) s.n = std::stoi(*v);
    if (auto v = get("scale")) s.scale = std::stod(*v);
    if (auto v = get("truncation_radius")) s.truncation_radius = (*v == "inf") ? kInf : std::stod(*v);
    if (auto v = get("flag_isotropic")) s.flag_isotropic = (*v == "true" || *v == "1");
    if (auto v = get("symmetrize")) s.symmetrize = (*v == "true" || *v == "1");
    if (auto v = get("recenter")) s.recenter = (*v == "true" || *v == "1");
    if (auto v = get("coord_law")) s.coord_law = coord_law_from_name(*v);
    if (auto v = get("weights")) {
        std::istringstream is(*v);
        double w;
        s.weights.clear();
        while (is >> w) s.weights.push_back(w);
    }
    s.validate();
    return s;
}

}  // namespace olab::measures
