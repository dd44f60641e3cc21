#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>

#include <json.hpp>

#include "olab/bounds.hpp"
#include "olab/chaining.hpp"
#include "olab/common.hpp"
#include "olab/config.hpp"
#include "olab/empirical.hpp"
#include "olab/geometry.hpp"
#include "olab/index_class.hpp"
#include "olab/measures.hpp"
#include "olab/orlicz.hpp"

namespace olab::harness {

// Scenario runner: draws samples, computes the scenario statistic, compares
// it against the matching closed-form envelope, and emits flat records plus
// a JSON summary with calibrated constants, scaling fits, and pass rates.

enum class Scenario {
    phase2,          // p=2 deviation of the empirical second moment vs 1/sqrt(k)
    psphere,         // p>2 deviation over the sphere
    tailenv,         // uniform tail counts vs the two-branch envelope
    topell,          // largest-ell absolute sums vs the subset-sum envelopes
    counterexample,  // log-weighted coordinate law: unbounded sup, bounded entropy
    kernel,          // cross-polytope kernel sections vs the fixed-point radius
    paouris,         // normalized maximal sample norm across dimensions
    gamma_trunc,     // chaining complexity of the truncated law
};

inline std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::phase2: return "phase2";
        case Scenario::psphere: return "psphere";
        case Scenario::tailenv: return "tailenv";
        case Scenario::topell: return "topell";
        case Scenario::counterexample: return "counterexample";
        case Scenario::kernel: return "kernel";
        case Scenario::paouris: return "paouris";
        case Scenario::gamma_trunc: return "gamma_trunc";
    }
    throw std::logic_error("scenario_name: bad enum");
}

inline Scenario scenario_from_name(const std::string& s) {
    if (s == "phase2") return Scenario::phase2;
    if (s == "psphere") return Scenario::psphere;
    if (s == "tailenv") return Scenario::tailenv;
    if (s == "topell") return Scenario::topell;
    if (s == "counterexample") return Scenario::counterexample;
    if (s == "kernel") return Scenario::kernel;
    if (s == "paouris") return Scenario::paouris;
    if (s == "gamma_trunc") return Scenario::gamma_trunc;
    throw std::invalid_argument("unknown scenario: " + s);
}

// ---------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------

struct ExperimentConfig {
    Scenario scenario = Scenario::phase2;
    std::string measure = "gaussian";  // gaussian | cube | l1_ball | l1_ball_isotropic |
                                       // weighted_exponential[_symmetric]
    std::string truncation = "none";   // none | auto (radial-maximum estimate) | positive real
    std::vector<int> dims{8};
    std::vector<int> ks{16};
    double p = 2.0;
    int trials = 4;
    std::uint64_t seed = 1;
    bounds::ConstantSet constants;
    double epsilon = 0.5;
    double delta = 0.1;

    // estimator budgets
    int levels = 8;           // tail-count level grid size
    int psi_sample = 4096;    // sample size for psi-norm scale estimation
    int class_net = 4096;     // direction-net budget for heuristic suprema
    int restarts = 8;         // ascent restarts for heuristic suprema
    int iterations = 200;     // ascent iterations per restart
    int profile_net = 256;    // net size per radius for the kernel complexity profile
    int gamma_net = 64;       // sphere-net size for the truncated-complexity scenario
    int metric_sample = 1024; // shared sample behind empirical psi_2 metrics
    std::string qstar_variant = "log_weight";  // log_weight | power_weight

    measures::MeasureSpec measure_for(int n) const {
        measures::MeasureSpec s;
        if (measure == "gaussian") s = measures::MeasureSpec::gaussian(n);
        else if (measure == "cube") s = measures::MeasureSpec::cube(n);
        else if (measure == "l1_ball") s = measures::MeasureSpec::l1_ball(n);
        else if (measure == "l1_ball_isotropic") s = measures::MeasureSpec::l1_ball_isotropic(n);
        else if (measure == "weighted_exponential") s = measures::MeasureSpec::weighted_exponential(n);
        else if (measure == "weighted_exponential_symmetric") {
            s = measures::MeasureSpec::weighted_exponential(n);
            s.symmetrize = true;
        } else {
            throw std::invalid_argument("unknown measure name: " + measure);
        }
        return s;
    }

    std::optional<double> fixed_truncation() const {
        if (truncation == "none" || truncation == "auto") return std::nullopt;
        std::size_t used = 0;
        double x = std::stod(truncation, &used);
        if (used != truncation.size() || !(x >= 0.0))
            throw std::invalid_argument("truncation must be none, auto, or a nonnegative real");
        return x;
    }

    void validate() const {
        if (dims.empty() || ks.empty()) throw std::invalid_argument("config: dims and ks must be nonempty");
        for (int n : dims)
            if (n < 1) throw std::invalid_argument("config: dims must be positive");
        for (int k : ks)
            if (k < 1) throw std::invalid_argument("config: ks must be positive");
        if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("config: epsilon in (0,1)");
        if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("config: delta in (0,1)");
        if (!(p >= 1.0)) throw std::invalid_argument("config: p must be >= 1");
        if (levels < 2) throw std::invalid_argument("config: levels must be >= 2");
        if (qstar_variant != "log_weight" && qstar_variant != "power_weight")
            throw std::invalid_argument("config: qstar_variant must be log_weight or power_weight");
        constants.validate();
        measure_for(dims.front());  // measure name check
        fixed_truncation();         // truncation syntax check

        switch (scenario) {
            case Scenario::phase2:
                if (p != 2.0) throw std::invalid_argument("phase2 requires p = 2");
                break;
            case Scenario::psphere:
                if (!(p > 2.0)) throw std::invalid_argument("psphere requires p > 2");
                break;
            case Scenario::counterexample:
                if (measure.rfind("weighted_exponential", 0) != 0)
                    throw std::invalid_argument("counterexample requires a weighted_exponential measure");
                if (ks.size() != 1 || ks.front() != 1)
                    throw std::invalid_argument("counterexample requires ks = 1 (one draw per trial)");
                break;
            case Scenario::kernel:
                if (measure != "gaussian")
                    throw std::invalid_argument("kernel scenario requires the gaussian measure");
                break;
            case Scenario::paouris:
                if (!measure_for(dims.front()).flag_isotropic)
                    throw std::invalid_argument("paouris scenario requires an isotropic measure");
                break;
            case Scenario::gamma_trunc:
                if (truncation == "none")
                    throw std::invalid_argument("gamma_trunc requires truncation = auto or a radius");
                break;
            default: break;
        }
    }

    config::KeyValues to_kv() const {
        config::KeyValues kv;
        kv.set("scenario", scenario_name(scenario));
        kv.set("measure", measure);
        kv.set("truncation", truncation);
        auto join = [](const std::vector<int>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i)
                s += (i ? ", " : "") + std::to_string(v[i]);
            return s;
        };
        kv.set("dims", join(dims));
        kv.set("ks", join(ks));
        kv.set_double("p", p);
        kv.set_int("trials", trials);
        kv.set("seed", std::to_string(seed));
        kv.set_double("epsilon", epsilon);
        kv.set_double("delta", delta);
        kv.set_int("levels", levels);
        kv.set_int("psi_sample", psi_sample);
        kv.set_int("class_net", class_net);
        kv.set_int("restarts", restarts);
        kv.set_int("iterations", iterations);
        kv.set_int("profile_net", profile_net);
        kv.set_int("gamma_net", gamma_net);
        kv.set_int("metric_sample", metric_sample);
        kv.set("qstar_variant", qstar_variant);
        for (const auto& [k, v] : constants.to_kv()) kv.set(k, v);
        return kv;
    }

    static ExperimentConfig from_kv(const config::KeyValues& kv) {
        static const std::set<std::string> known = {
            "scenario",  "measure",   "truncation", "dims",        "ks",
            "p",         "trials",    "seed",       "epsilon",     "delta",
            "levels",    "psi_sample", "class_net", "restarts",    "iterations",
            "profile_net", "gamma_net", "metric_sample", "qstar_variant"};
        static const std::set<std::string> known_constants = [] {
            std::set<std::string> s;
            for (int i = 1; i <= 10; ++i) s.insert("constants.c" + std::to_string(i));
            s.insert({"constants.v", "constants.v1", "constants.v2", "constants.calibrated"});
            return s;
        }();
        for (const auto& [key, value] : kv.values)
            if (!known.count(key) && !known_constants.count(key))
                throw std::invalid_argument("config: unknown key '" + key + "'");
        ExperimentConfig c;
        c.scenario = scenario_from_name(kv.get("scenario"));
        c.measure = kv.get_or("measure", c.measure);
        c.truncation = kv.get_or("truncation", c.truncation);
        if (kv.has("dims")) c.dims = kv.get_int_list("dims");
        if (kv.has("ks")) c.ks = kv.get_int_list("ks");
        c.p = kv.get_double("p", c.p);
        c.trials = static_cast<int>(kv.get_int("trials", c.trials));
        if (kv.has("seed")) c.seed = std::stoull(kv.get("seed"));
        c.epsilon = kv.get_double("epsilon", c.epsilon);
        c.delta = kv.get_double("delta", c.delta);
        c.levels = static_cast<int>(kv.get_int("levels", c.levels));
        c.psi_sample = static_cast<int>(kv.get_int("psi_sample", c.psi_sample));
        c.class_net = static_cast<int>(kv.get_int("class_net", c.class_net));
        c.restarts = static_cast<int>(kv.get_int("restarts", c.restarts));
        c.iterations = static_cast<int>(kv.get_int("iterations", c.iterations));
        c.profile_net = static_cast<int>(kv.get_int("profile_net", c.profile_net));
        c.gamma_net = static_cast<int>(kv.get_int("gamma_net", c.gamma_net));
        c.metric_sample = static_cast<int>(kv.get_int("metric_sample", c.metric_sample));
        c.qstar_variant = kv.get_or("qstar_variant", c.qstar_variant);
        c.constants = bounds::ConstantSet::from_kv(kv.values);
        c.validate();
        return c;
    }

    static ExperimentConfig load(const std::string& path) {
        return from_kv(config::KeyValues::load(path));
    }
};

// ---------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------

struct ExperimentRecord {
    std::string scenario;
    int n = 0;
    int k = 0;
    int trial = 0;
    std::uint64_t seed = 0;  // derived stream for this (n,k,trial) item
    std::string metric;
    double param = 0.0;      // level, subset size, or scenario-specific abscissa
    double measured = 0.0;
    double bound = 0.0;
    bool pass = false;
    double wall_ms = 0.0;    // last column; excluded from determinism comparisons
};

// Pass direction per metric family: sup_linear is a lower-bound claim, every
// other envelope is an upper bound.
inline bool record_pass(const std::string& metric, double measured, double bound) {
    if (metric == "sup_linear") return measured >= bound;
    return measured <= bound;
}

inline std::string records_csv_header() {
    return "scenario,n,k,trial,seed,metric,param,measured,bound,pass,wall_ms";
}

inline std::string format_record(const ExperimentRecord& r) {
    std::ostringstream out;
    out.precision(17);
    out << r.scenario << ',' << r.n << ',' << r.k << ',' << r.trial << ',' << r.seed << ','
        << r.metric << ',' << r.param << ',' << r.measured << ',' << r.bound << ','
        << (r.pass ? 1 : 0) << ',';
    out << std::fixed;
    out.precision(3);
    out << r.wall_ms;
    return out.str();
}

inline void write_records_csv(const std::string& path, const std::vector<ExperimentRecord>& recs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << records_csv_header() << '\n';
    for (const auto& r : recs) out << format_record(r) << '\n';
}

inline std::vector<ExperimentRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != records_csv_header())
        throw std::runtime_error(path + ": unexpected header");
    std::vector<ExperimentRecord> recs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (;;) {
            std::size_t comma = line.find(',', start);
            f.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (f.size() != 11) throw std::runtime_error(path + ": malformed row: " + line);
        ExperimentRecord r;
        r.scenario = f[0];
        r.n = std::stoi(f[1]);
        r.k = std::stoi(f[2]);
        r.trial = std::stoi(f[3]);
        r.seed = std::stoull(f[4]);
        r.metric = f[5];
        r.param = std::stod(f[6]);
        r.measured = std::stod(f[7]);
        r.bound = std::stod(f[8]);
        r.pass = f[9] == "1";
        r.wall_ms = std::stod(f[10]);
        recs.push_back(std::move(r));
    }
    return recs;
}

// ---------------------------------------------------------------------
// Calibration and scaling fits
// ---------------------------------------------------------------------

struct CalibrationEntry {
    double multiplier = 1.0;
    int records = 0;
};

struct Calibration {
    bounds::ConstantSet constants;
    std::map<std::string, CalibrationEntry> multipliers;
};

// Constant slot a metric family reads multiplicatively; 0 when the family's
// leading constant enters nonlinearly (then only the output multiplier applies).
inline int calibration_slot(const std::string& metric) {
    if (metric == "deviation") return 3;
    if (metric == "radial_max") return 4;
    if (metric == "dudley_gamma2" || metric == "gamma2_truncated") return 2;
    return 0;
}

// Smallest per-family multiplier making every calibration record pass.  For
// upper-bound families that is max(measured/bound); for the lower-bound
// family sup_linear it is min(measured/bound) (largest admissible level).
inline Calibration calibrate_constants(const std::vector<ExperimentRecord>& records,
                                       const bounds::ConstantSet& base = {}) {
    if (records.empty()) throw std::invalid_argument("calibrate_constants: empty calibration set");
    Calibration cal;
    cal.constants = base;
    for (const auto& r : records) {
        auto& e = cal.multipliers[r.metric];
        double ratio;
        if (r.bound > 0.0) {
            ratio = r.measured / r.bound;
        } else {
            ratio = r.measured <= 0.0 ? 0.0 : kInf;
        }
        if (e.records == 0) {
            e.multiplier = ratio;
        } else if (r.metric == "sup_linear") {
            e.multiplier = std::min(e.multiplier, ratio);
        } else {
            e.multiplier = std::max(e.multiplier, ratio);
        }
        ++e.records;
    }
    for (const auto& [metric, e] : cal.multipliers) {
        if (!std::isfinite(e.multiplier) || e.multiplier <= 0.0) continue;
        if (metric == "subset_sum_psi1") {
            cal.constants.v1 = base.v1 * e.multiplier;
            cal.constants.v2 = base.v2 * e.multiplier;
        } else if (metric == "subset_sum_psi2") {
            cal.constants.v = base.v * e.multiplier;
        } else if (int slot = calibration_slot(metric); slot > 0) {
            cal.constants.set(slot, base.at(slot) * e.multiplier);
        }
    }
    cal.constants.calibrated = true;
    return cal;
}

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_ = 0.0;
    int points = 0;
};

// Ordinary least squares on (log x, log y).
inline ScalingFit fit_loglog(const std::vector<std::pair<double, double>>& xy) {
    std::map<double, double> distinct;
    for (const auto& [x, y] : xy) {
        if (!(x > 0.0) || !(y > 0.0))
            throw std::invalid_argument("fit_loglog: inputs must be positive");
        distinct[x] = y;
    }
    if (distinct.size() < 3) throw std::invalid_argument("fit_loglog: need >= 3 distinct x values");
    const int m = static_cast<int>(xy.size());
    double sx = 0, sy = 0;
    for (const auto& [x, y] : xy) {
        sx += std::log(x);
        sy += std::log(y);
    }
    double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (const auto& [x, y] : xy) {
        double dx = std::log(x) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y) - my);
    }
    ScalingFit fit;
    fit.points = m;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (const auto& [x, y] : xy) {
        double res = std::log(y) - fit.intercept - fit.slope * std::log(x);
        ssr += res * res;
    }
    if (m > 2) fit.stderr_ = std::sqrt(std::max(ssr, 0.0) / (m - 2) / sxx);
    return fit;
}

inline double record_field(const ExperimentRecord& r, const std::string& field) {
    if (field == "n") return static_cast<double>(r.n);
    if (field == "k") return static_cast<double>(r.k);
    if (field == "trial") return static_cast<double>(r.trial);
    if (field == "param") return r.param;
    if (field == "measured") return r.measured;
    if (field == "bound") return r.bound;
    throw std::invalid_argument("unknown record field: " + field);
}

// Log-log fit of the per-x medians of y_field against x_field.
inline ScalingFit scaling_fit(const std::vector<ExperimentRecord>& recs, const std::string& x_field,
                              const std::string& y_field) {
    std::map<double, std::vector<double>> groups;
    for (const auto& r : recs) groups[record_field(r, x_field)].push_back(record_field(r, y_field));
    std::vector<std::pair<double, double>> pts;
    for (auto& [x, ys] : groups) pts.emplace_back(x, median_of(ys));
    return fit_loglog(pts);
}

// Smallest k in the record grid whose median deviation at dimension n is
// below epsilon; infinity when no grid point qualifies.
inline double k0_estimate(const std::vector<ExperimentRecord>& recs, int n, double epsilon) {
    std::map<int, std::vector<double>> by_k;
    for (const auto& r : recs)
        if (r.n == n && r.metric == "deviation") by_k[r.k].push_back(r.measured);
    for (auto& [k, v] : by_k)
        if (median_of(v) < epsilon) return static_cast<double>(k);
    return kInf;
}

// ---------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------

struct RunHooks {
    // Test hook: replaces sampling with fixed rows for the given item.
    std::function<Mat(int n, int k, int trial)> force_rows;
};

struct RunResult {
    std::vector<ExperimentRecord> records;
    nlohmann::json summary;
};

namespace detail {

// Per-dimension scale estimates and per-(n,k) precomputed envelopes, all
// derived from the config seed alone so items stay order-independent.
struct Context {
    std::map<int, double> alpha;                  // worst-direction psi_2 scale
    std::map<int, double> beta;                   // worst-direction psi_1 scale
    std::map<int, double> dudley;                 // counterexample entropy integral
    std::map<std::pair<int, int>, double> qstar;  // kernel: fixed-point radius per (n,k)
    std::map<std::pair<int, int>, double> radius; // auto truncation radius per (n,k)
};

inline double direction_psi_estimate(const measures::MeasureSpec& spec, double order, int rows,
                                     std::uint64_t seed) {
    auto sm = measures::sample(spec, rows, mix_seed(seed, 0x64726177ULL));
    const int n = spec.n;
    std::vector<Vec> dirs;
    dirs.push_back(Vec::Unit(n, 0));
    dirs.push_back(Vec::Ones(n) / std::sqrt(static_cast<double>(n)));
    for (int j = 0; j < 30; ++j) {
        RngStream rng(mix_seed(seed, 0x64697273ULL, static_cast<std::uint64_t>(j)));
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = rng.gaussian();
        if (v.norm() == 0.0) continue;
        dirs.push_back(v.normalized());
    }
    double best = 0.0;
    std::vector<double> z(static_cast<std::size_t>(rows));
    for (const Vec& d : dirs) {
        Vec y = sm.rows * d;
        for (int i = 0; i < rows; ++i) z[static_cast<std::size_t>(i)] = y[i];
        best = std::max(best, orlicz::psi_norm_empirical(z, order).value);
    }
    return best;
}

inline double radial_max_mean(const measures::MeasureSpec& spec, int k, int reps,
                              std::uint64_t seed) {
    std::vector<double> maxima(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        auto sm = measures::sample(spec, k, mix_seed(seed, 0x72616478ULL, static_cast<std::uint64_t>(r)));
        maxima[static_cast<std::size_t>(r)] = sm.rows.rowwise().norm().maxCoeff();
    }
    return mean_of(maxima);
}

// Entropy integral for the log-weighted coordinate net {0, +-e_i} with
// d(e_i, e_j) = sqrt(w_i^2 + w_j^2), w_i = 1/sqrt(log(i+2)).  Distinct
// vertices above scale eps are never eps-close, so the minimal covering
// count is exactly 2*#{i : w_i > eps} + 1 and the curve integrates in
// closed form on the standard scale grid.
inline double weighted_vertex_dudley(int n) {
    auto w = [](int i) { return 1.0 / std::sqrt(std::log(static_cast<double>(i) + 2.0)); };
    double diam = 2.0 * w(0);
    std::vector<double> scales = chaining::scale_grid(diam);
    auto covers = [&](double eps) -> double {
        // #{i in [0,n) : w_i > eps}
        double inv = 1.0 / (eps * eps);
        long long cnt;
        if (inv >= std::log(static_cast<double>(n) + 2.0)) {
            cnt = n;
        } else {
            double b = std::exp(inv) - 2.0;  // i < b
            cnt = b <= 0.0 ? 0 : std::min<long long>(n, static_cast<long long>(std::floor(b - 1e-12)) + 1);
        }
        return 2.0 * static_cast<double>(cnt) + 1.0;
    };
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < scales.size(); ++j)
        acc += std::sqrt(std::log(covers(scales[j + 1]))) * (scales[j] - scales[j + 1]);
    acc += scales.back() * std::sqrt(std::log(covers(scales.back())));
    return acc;
}

// Nonincreasing complexity profile of the cross-polytope/sphere intersection,
// tabulated on a geometric radius grid.  Points with s nonzero coordinates
// and Euclidean norm rho lie in the unit l1 ball automatically whenever
// s <= 1/rho^2 (Cauchy-Schwarz), so the net needs no rejection step.
struct ProfileTable {
    std::vector<double> rho;    // ascending
    std::vector<double> value;  // nonincreasing majorant of the measurements
};

inline ProfileTable kernel_profile(const ExperimentConfig& cfg, int n, double alpha) {
    ProfileTable tab;
    const int grid = 24;
    double lo = 0.5 / std::sqrt(static_cast<double>(n)), hi = 1.0;
    for (int j = 0; j < grid; ++j) {
        double rho = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * j / (grid - 1));
        tab.rho.push_back(rho);
        int s_max = static_cast<int>(std::min(static_cast<double>(n), std::floor(1.0 / (rho * rho))));
        if (s_max < 1) {
            tab.value.push_back(0.0);
            continue;
        }
        const int m = std::max(16, cfg.profile_net);
        Mat pts = Mat::Zero(m, n);
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < m; ++i) {
            RngStream rng(mix_seed(cfg.seed, 0x6b70726fULL, static_cast<std::uint64_t>(n),
                                   static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(i)));
            int s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(s_max)));
            for (int t = 0; t < n; ++t) idx[static_cast<std::size_t>(t)] = t;
            for (int t = 0; t < s; ++t) {
                int pick = t + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - t)));
                std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(pick)]);
            }
            Vec v = Vec::Zero(n);
            for (int t = 0; t < s; ++t) {
                double mag = (i & 1) ? std::abs(rng.gaussian()) + 1e-12 : 1.0;
                v[idx[static_cast<std::size_t>(t)]] = rng.sign() * mag;
            }
            pts.row(i) = (rho / v.norm()) * v.transpose();
        }
        double g2 = chaining::admissible_gamma2(chaining::PointCloud::euclidean(std::move(pts))).value;
        tab.value.push_back(alpha * g2);
    }
    // The sphere slice is empty beyond the body's circumradius, so the profile
    // vanishes just above the top of the grid.  This gives the fixed-point
    // solver its trivial branch; without it the solver would report the
    // radius as unbounded whenever the fixed point sits above the grid.
    tab.rho.push_back(hi * (1.0 + 1e-9));
    tab.value.push_back(0.0);
    for (int j = static_cast<int>(tab.value.size()) - 2; j >= 0; --j)
        tab.value[static_cast<std::size_t>(j)] =
            std::max(tab.value[static_cast<std::size_t>(j)], tab.value[static_cast<std::size_t>(j + 1)]);
    return tab;
}

inline double profile_interp(const ProfileTable& tab, double rho) {
    if (rho <= tab.rho.front()) return tab.value.front();
    if (rho >= tab.rho.back()) return tab.value.back();
    auto it = std::upper_bound(tab.rho.begin(), tab.rho.end(), rho);
    std::size_t hi = static_cast<std::size_t>(it - tab.rho.begin());
    std::size_t lo = hi - 1;
    double t = (std::log(rho) - std::log(tab.rho[lo])) / (std::log(tab.rho[hi]) - std::log(tab.rho[lo]));
    return tab.value[lo] + t * (tab.value[hi] - tab.value[lo]);
}

inline measures::MeasureSpec resolved_spec(const ExperimentConfig& cfg, const Context& ctx, int n,
                                           int k) {
    measures::MeasureSpec spec = cfg.measure_for(n);
    if (auto r = cfg.fixed_truncation()) return spec.truncated(*r);
    if (cfg.truncation == "auto") return spec.truncated(ctx.radius.at({n, k}));
    return spec;
}

inline Context prepare_context(const ExperimentConfig& cfg) {
    Context ctx;
    const bool needs_scales = cfg.scenario == Scenario::phase2 || cfg.scenario == Scenario::psphere ||
                              cfg.scenario == Scenario::tailenv || cfg.scenario == Scenario::topell ||
                              cfg.scenario == Scenario::kernel;
    if (cfg.truncation == "auto")
        for (int n : cfg.dims)
            for (int k : cfg.ks)
                ctx.radius[{n, k}] = radial_max_mean(cfg.measure_for(n), k, 8,
                                                     mix_seed(cfg.seed, 0x72616455ULL,
                                                              static_cast<std::uint64_t>(n),
                                                              static_cast<std::uint64_t>(k)));
    for (int n : cfg.dims) {
        if (needs_scales) {
            measures::MeasureSpec spec = cfg.measure_for(n);
            if (auto r = cfg.fixed_truncation()) spec = spec.truncated(*r);
            ctx.alpha[n] = direction_psi_estimate(spec, 2.0, cfg.psi_sample,
                                                  mix_seed(cfg.seed, 0x616c7068ULL,
                                                           static_cast<std::uint64_t>(n)));
            if (cfg.scenario != Scenario::phase2 && cfg.scenario != Scenario::kernel)
                ctx.beta[n] = direction_psi_estimate(spec, 1.0, cfg.psi_sample,
                                                     mix_seed(cfg.seed, 0x62657461ULL,
                                                              static_cast<std::uint64_t>(n)));
        }
        if (cfg.scenario == Scenario::counterexample) ctx.dudley[n] = weighted_vertex_dudley(n);
        if (cfg.scenario == Scenario::kernel) {
            ProfileTable tab = kernel_profile(cfg, n, ctx.alpha.at(n));
            geometry::FixedPointOptions fopts;
            fopts.rho_min = tab.rho.front();
            fopts.rho_max = tab.rho.back();
            auto variant = cfg.qstar_variant == "log_weight" ? geometry::QStarVariant::log_weight
                                                        : geometry::QStarVariant::power_weight;
            for (int k : cfg.ks) {
                auto fp = geometry::q_star([&tab](double r) { return profile_interp(tab, r); },
                                           k, cfg.constants, variant, fopts);
                ctx.qstar[{n, k}] = fp.value;
            }
        }
    }
    return ctx;
}

inline measures::SampleMatrix draw_sample(const ExperimentConfig& cfg, const Context& ctx,
                                          const RunHooks& hooks, int n, int k, int trial,
                                          std::uint64_t item_seed) {
    measures::MeasureSpec spec = resolved_spec(cfg, ctx, n, k);
    if (hooks.force_rows) {
        Mat rows = hooks.force_rows(n, k, trial);
        if (rows.rows() != k || rows.cols() != n)
            throw std::invalid_argument("force_rows hook returned wrong shape");
        measures::SampleMatrix sm;
        sm.rows = std::move(rows);
        sm.spec = spec;
        sm.seed = item_seed;
        return sm;
    }
    return measures::sample(spec, k, mix_seed(item_seed, 0x73616d70ULL));
}

inline std::vector<ExperimentRecord> run_item(const ExperimentConfig& cfg, const Context& ctx,
                                              const RunHooks& hooks, int n, int k, int trial,
                                              std::uint64_t item_seed) {
    const bounds::ConstantSet& cs = cfg.constants;
    std::vector<ExperimentRecord> out;
    auto emit = [&](const std::string& metric, double param, double measured, double bound) {
        ExperimentRecord r;
        r.scenario = scenario_name(cfg.scenario);
        r.n = n;
        r.k = k;
        r.trial = trial;
        r.seed = item_seed;
        r.metric = metric;
        r.param = param;
        r.measured = measured;
        r.bound = bound;
        r.pass = record_pass(metric, measured, bound);
        out.push_back(std::move(r));
    };

    switch (cfg.scenario) {
        case Scenario::phase2: {
            auto sm = draw_sample(cfg, ctx, hooks, n, k, trial, item_seed);
            auto dev = empirical::deviation_sup(sm, IndexClass::sphere(n), 2.0);
            double a = ctx.alpha.at(n);
            emit("deviation", 2.0, dev.value,
                 cs.at(3) * a * a * std::sqrt(static_cast<double>(n) / static_cast<double>(k)));
            break;
        }
        case Scenario::psphere: {
            auto sm = draw_sample(cfg, ctx, hooks, n, k, trial, item_seed);
            empirical::DeviationOptions opts;
            opts.net_budget = cfg.class_net;
            opts.restarts = cfg.restarts;
            opts.iterations = cfg.iterations;
            opts.seed = mix_seed(item_seed, 0x657374ULL);
            auto dev = empirical::deviation_sup(sm, IndexClass::sphere(n), cfg.p,
                                                empirical::Method::auto_pick, opts);
            double gamma2 = ctx.alpha.at(n) * std::sqrt(static_cast<double>(n));
            emit("deviation", cfg.p, dev.value,
                 bounds::combined_deviation_bound(gamma2, 2.0 * ctx.beta.at(n), cfg.p, k, cs.v, cs));
            break;
        }
        case Scenario::tailenv: {
            auto sm = draw_sample(cfg, ctx, hooks, n, k, trial, item_seed);
            double a = ctx.alpha.at(n);
            std::vector<double> levels(static_cast<std::size_t>(cfg.levels));
            for (int j = 0; j < cfg.levels; ++j)
                levels[static_cast<std::size_t>(j)] = a * std::pow(2.0, 0.5 * (j + 1));
            empirical::TailCountOptions opts;
            opts.net_budget = cfg.class_net;
            opts.seed = mix_seed(item_seed, 0x657374ULL);
            auto counts = empirical::tail_count_sup(sm, IndexClass::sphere(n), levels,
                                                    empirical::Method::auto_pick, opts);
            double gamma2 = a * std::sqrt(static_cast<double>(n));
            for (std::size_t j = 0; j < levels.size(); ++j)
                emit("tail_count", levels[j], static_cast<double>(counts.counts[j]),
                     bounds::tail_envelope(levels[j], k, gamma2, 2.0 * ctx.beta.at(n), cs.v1, cs.v2,
                                           cs));
            break;
        }
        case Scenario::topell: {
            auto sm = draw_sample(cfg, ctx, hooks, n, k, trial, item_seed);
            double a = ctx.alpha.at(n);
            double gamma2 = a * std::sqrt(static_cast<double>(n));
            empirical::TopEllOptions opts;
            opts.seed = mix_seed(item_seed, 0x657374ULL);
            std::vector<int> ells;
            for (int ell = 1; ell <= k; ell *= 2) ells.push_back(ell);
            if (ells.back() != k) ells.push_back(k);
            for (int ell : ells) {
                auto res = empirical::top_ell_sum_sup(sm, ell, empirical::Method::auto_pick, opts);
                emit("subset_sum_psi1", static_cast<double>(ell), res.value,
                     bounds::subset_sum_bound_psi1(ell, k, gamma2, 2.0 * ctx.beta.at(n), cs.v1, cs.v2));
                emit("subset_sum_psi2", static_cast<double>(ell), res.value,
                     bounds::subset_sum_bound_psi2(ell, k, gamma2, 2.0 * a, cs.v));
            }
            break;
        }
        case Scenario::counterexample: {
            auto sm = draw_sample(cfg, ctx, hooks, n, k, trial, item_seed);
            double measured = sm.rows.row(0).cwiseAbs().maxCoeff();
            emit("sup_linear", static_cast<double>(n), measured,
                 0.5 * std::sqrt(std::log(static_cast<double>(n) + 1.0)));
            if (trial == 0)
                emit("dudley_gamma2", static_cast<double>(n), ctx.dudley.at(n), cs.at(2));
            break;
        }
        case Scenario::kernel: {
            auto sm = draw_sample(cfg, ctx, hooks, n, k, trial, item_seed);
            auto op = geometry::RandomOperator::from_sample(sm);
            geometry::SectionOptions opts;
            opts.seed = mix_seed(item_seed, 0x657374ULL);
            auto sec = geometry::section_diameter(op, geometry::BodySpec::l1_ball(n), opts);
            emit("section_diameter", static_cast<double>(k), sec.value, ctx.qstar.at({n, k}));
            break;
        }
        case Scenario::paouris: {
            auto sm = draw_sample(cfg, ctx, hooks, n, k, trial, item_seed);
            double measured = sm.rows.rowwise().norm().maxCoeff() / std::sqrt(static_cast<double>(n));
            emit("radial_max", static_cast<double>(n), measured, cs.at(4));
            break;
        }
        case Scenario::gamma_trunc: {
            measures::MeasureSpec spec = resolved_spec(cfg, ctx, n, k);
            Mat net = sphere_net(n, cfg.gamma_net, mix_seed(item_seed, 0x6e6574ULL));
            auto cloud = chaining::PointCloud::empirical_psi2(std::move(net), spec, cfg.metric_sample,
                                                              mix_seed(item_seed, 0x636c64ULL));
            double measured = chaining::admissible_gamma2(cloud).value;
            emit("gamma2_truncated", static_cast<double>(n), measured,
                 cs.at(2) * std::sqrt(static_cast<double>(n) *
                                      std::log(static_cast<double>(n) + 1.0)));
            break;
        }
    }
    return out;
}

inline nlohmann::json constants_json(const bounds::ConstantSet& cs) {
    nlohmann::json j;
    for (int i = 1; i <= 10; ++i) j["c" + std::to_string(i)] = cs.at(i);
    j["v"] = cs.v;
    j["v1"] = cs.v1;
    j["v2"] = cs.v2;
    j["calibrated"] = cs.calibrated;
    return j;
}

inline nlohmann::json build_summary(const ExperimentConfig& cfg,
                                    const std::vector<ExperimentRecord>& records) {
    nlohmann::json s;
    s["scenario"] = scenario_name(cfg.scenario);
    s["records"] = records.size();
    s["constants"] = constants_json(cfg.constants);
    {
        nlohmann::json kvj;
        for (const auto& [k, v] : cfg.to_kv().values) kvj[k] = v;
        s["config"] = kvj;
    }

    std::map<std::string, std::pair<int, int>> rates;  // metric -> (passes, records)
    for (const auto& r : records) {
        auto& e = rates[r.metric];
        e.second += 1;
        if (r.pass) e.first += 1;
    }
    for (const auto& [metric, e] : rates)
        s["pass_rates"][metric] = {{"records", e.second},
                                   {"passes", e.first},
                                   {"rate", static_cast<double>(e.first) / e.second}};

    // 50/50 calibration / held-out split by trial index.
    const int cal_trials = (cfg.trials + 1) / 2;
    std::vector<ExperimentRecord> cal, held;
    for (const auto& r : records) (r.trial < cal_trials ? cal : held).push_back(r);
    if (!cal.empty()) {
        Calibration c = calibrate_constants(cal, cfg.constants);
        for (const auto& [metric, e] : c.multipliers)
            s["calibration"][metric] = {{"multiplier", e.multiplier}, {"records", e.records}};
        s["calibrated_constants"] = constants_json(c.constants);
        if (!held.empty()) {
            // per-record and per-trial (all records of the metric in one item
            // group) pass rates against the calibrated bound
            std::map<std::string, std::pair<int, int>> rrate;
            std::map<std::string, std::map<std::tuple<int, int, int>, bool>> trate;
            for (const auto& r : held) {
                double m = 1.0;
                if (auto it = c.multipliers.find(r.metric); it != c.multipliers.end())
                    m = it->second.multiplier;
                // an infinite bound stays infinite under scaling (0 * inf is NaN)
                double scaled = std::isfinite(r.bound) ? m * r.bound : r.bound;
                bool ok = record_pass(r.metric, r.measured, scaled);
                auto& e = rrate[r.metric];
                e.second += 1;
                if (ok) e.first += 1;
                auto key = std::make_tuple(r.n, r.k, r.trial);
                auto it2 = trate[r.metric].try_emplace(key, true).first;
                it2->second = it2->second && ok;
            }
            for (const auto& [metric, e] : rrate) {
                int tp = 0;
                const auto& tm = trate[metric];
                for (const auto& [key, ok] : tm)
                    if (ok) ++tp;
                s["heldout"][metric] = {
                    {"records", e.second},
                    {"record_pass_rate", static_cast<double>(e.first) / e.second},
                    {"trials", tm.size()},
                    {"trial_pass_rate", static_cast<double>(tp) / static_cast<double>(tm.size())}};
            }
        }
    }

    if (cfg.scenario == Scenario::phase2 || cfg.scenario == Scenario::psphere) {
        for (int n : cfg.dims) {
            std::vector<ExperimentRecord> slice;
            for (const auto& r : records)
                if (r.n == n && r.metric == "deviation") slice.push_back(r);
            try {
                ScalingFit f = scaling_fit(slice, "k", "measured");
                s["fits"]["deviation_vs_k"][std::to_string(n)] = {
                    {"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_}};
            } catch (const std::invalid_argument&) {
            }
        }
    }
    if (cfg.scenario == Scenario::phase2) {
        std::vector<std::pair<double, double>> k0pts;
        for (int n : cfg.dims) {
            double k0 = k0_estimate(records, n, cfg.epsilon);
            s["k0"][std::to_string(n)] =
                std::isfinite(k0) ? nlohmann::json(k0) : nlohmann::json("inf");
            if (std::isfinite(k0)) k0pts.emplace_back(static_cast<double>(n), k0);
        }
        try {
            ScalingFit f = fit_loglog(k0pts);
            s["fits"]["k0_vs_n"] = {
                {"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_}};
        } catch (const std::invalid_argument&) {
        }
    }
    return s;
}

}  // namespace detail

inline RunResult run(const ExperimentConfig& cfg, const RunHooks& hooks = {}, int threads = 1) {
    cfg.validate();
    detail::Context ctx = detail::prepare_context(cfg);

    struct Item {
        int n, k, trial;
    };
    std::vector<Item> items;
    for (int n : cfg.dims)
        for (int k : cfg.ks)
            for (int t = 0; t < cfg.trials; ++t) items.push_back({n, k, t});

    std::vector<std::vector<ExperimentRecord>> slots(items.size());
    parallel_for(items.size(), threads, [&](std::size_t i) {
        const Item& it = items[i];
        std::uint64_t item_seed =
            mix_seed(cfg.seed, 0x6974656dULL + static_cast<std::uint64_t>(cfg.scenario),
                     static_cast<std::uint64_t>(it.n), static_cast<std::uint64_t>(it.k),
                     static_cast<std::uint64_t>(it.trial));
        auto t0 = std::chrono::steady_clock::now();
        auto recs = detail::run_item(cfg, ctx, hooks, it.n, it.k, it.trial, item_seed);
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
        for (auto& r : recs) r.wall_ms = ms;
        slots[i] = std::move(recs);
    });

    RunResult res;
    for (auto& v : slots)
        for (auto& r : v) res.records.push_back(std::move(r));
    res.summary = detail::build_summary(cfg, res.records);
    return res;
}

// ---------------------------------------------------------------------
// Output files: records.csv, summary.json, plots/*.csv + plot script
// ---------------------------------------------------------------------

inline const char* plot_script_text() {
    return R"PY(#!/usr/bin/env python3
"""Render the medians table next to this script as simple plots.

Usage: python3 plot.py [outdir]   (reads medians.csv in its own directory)
"""
import csv
import os
import sys
from collections import defaultdict

here = os.path.dirname(os.path.abspath(__file__))
out = sys.argv[1] if len(sys.argv) > 1 else here

rows = []
with open(os.path.join(here, "medians.csv")) as f:
    for row in csv.DictReader(f):
        rows.append(row)

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not available; medians.csv holds the plot data")
    sys.exit(0)

by_metric = defaultdict(list)
for r in rows:
    by_metric[r["metric"]].append(r)

for metric, data in by_metric.items():
    ks = sorted({int(r["k"]) for r in data})
    ns = sorted({int(r["n"]) for r in data})
    params = sorted({float(r["param"]) for r in data})
    if len(ks) > 1:
        x_field, x_vals = "k", ks
    elif len(params) > 1:
        x_field, x_vals = "param", params
    else:
        x_field, x_vals = "n", ns
    fig, ax = plt.subplots()
    group = "n" if x_field != "n" else "k"
    series = defaultdict(list)
    for r in data:
        series[r[group]].append((float(r[x_field]), float(r["median_measured"]),
                                 float(r["median_bound"])))
    for label, pts in sorted(series.items(), key=lambda kv: float(kv[0])):
        pts.sort()
        xs = [p[0] for p in pts]
        ax.plot(xs, [p[1] for p in pts], marker="o", label=f"{group}={label} measured")
        ax.plot(xs, [p[2] for p in pts], linestyle="--", label=f"{group}={label} bound")
    ax.set_xlabel(x_field)
    ax.set_ylabel(metric)
    if all(v > 0 for v in x_vals) and len(x_vals) > 2:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.legend(fontsize=6)
    fig.savefig(os.path.join(out, f"{metric}.png"), dpi=150, bbox_inches="tight")
    plt.close(fig)
print(f"wrote {len(by_metric)} plot(s) to {out}")
)PY";
}

inline void write_outputs(const std::string& out_dir, const ExperimentConfig& cfg,
                          const RunResult& result) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "plots");
    write_records_csv((fs::path(out_dir) / "records.csv").string(), result.records);
    {
        std::ofstream out(fs::path(out_dir) / "summary.json");
        out << result.summary.dump(2) << '\n';
    }
    {
        std::ofstream out(fs::path(out_dir) / "config_used.cfg");
        out << cfg.to_kv().serialize();
    }
    // medians per (metric, n, k, param) drive the plot script
    std::map<std::tuple<std::string, int, int, double>, std::pair<std::vector<double>, std::vector<double>>>
        groups;
    for (const auto& r : result.records) {
        auto& g = groups[{r.metric, r.n, r.k, r.param}];
        g.first.push_back(r.measured);
        g.second.push_back(r.bound);
    }
    {
        std::ofstream out(fs::path(out_dir) / "plots" / "medians.csv");
        out << "metric,n,k,param,median_measured,median_bound,records\n";
        out.precision(17);
        for (auto& [key, g] : groups) {
            const auto& [metric, n, k, param] = key;
            out << metric << ',' << n << ',' << k << ',' << param << ','
                << median_of(g.first) << ',' << median_of(g.second) << ',' << g.first.size() << '\n';
        }
    }
    {
        std::ofstream out(fs::path(out_dir) / "plots" / "plot.py");
        out << plot_script_text();
    }
}

}  // namespace olab::harness
