#pragma once

#include <array>
#include <map>
#include <optional>
#include <sstream>

#include "olab/common.hpp"

namespace olab::bounds {

// Closed-form evaluators for the deviation and tail bounds the harness
// tests empirically.  Every unnamed prefactor lives in a ConstantSet entry
// (default 1); the harness fits them on calibration trials, so the
// evaluators themselves stay pure arithmetic.  Logarithms are natural.

// ---------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------

struct ConstantSet {
    std::array<double, 10> c{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    double v = 1.0;
    double v1 = 1.0;
    double v2 = 1.0;
    bool calibrated = false;  // set once the harness has fit the entries

    // 1-based access, matching the usual c1, c2, ... naming.
    double at(int i) const {
        if (i < 1 || i > 10) throw std::invalid_argument("ConstantSet: index must be in 1..10");
        return c[static_cast<std::size_t>(i - 1)];
    }
    void set(int i, double x) {
        if (i < 1 || i > 10) throw std::invalid_argument("ConstantSet: index must be in 1..10");
        c[static_cast<std::size_t>(i - 1)] = x;
    }

    void validate() const {
        for (double x : c)
            if (!(x > 0.0)) throw std::invalid_argument("ConstantSet: entries must be positive");
        if (!(v > 0.0) || !(v1 > 0.0) || !(v2 > 0.0))
            throw std::invalid_argument("ConstantSet: v, v1, v2 must be positive");
    }

    std::map<std::string, std::string> to_kv(const std::string& prefix = "constants.") const;
    static ConstantSet from_kv(const std::map<std::string, std::string>& kv,
                               const std::string& prefix = "constants.");
};

inline std::map<std::string, std::string> ConstantSet::to_kv(const std::string& prefix) const {
    std::map<std::string, std::string> kv;
    std::ostringstream num;
    num.precision(17);
    for (int i = 1; i <= 10; ++i) {
        num.str("");
        num << at(i);
        kv[prefix + "c" + std::to_string(i)] = num.str();
    }
    auto put = [&](const std::string& key, double x) {
        num.str("");
        num << x;
        kv[prefix + key] = num.str();
    };
    put("v", v);
    put("v1", v1);
    put("v2", v2);
    kv[prefix + "calibrated"] = calibrated ? "true" : "false";
    return kv;
}

inline ConstantSet ConstantSet::from_kv(const std::map<std::string, std::string>& kv,
                                        const std::string& prefix) {
    ConstantSet s;
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(prefix + key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    for (int i = 1; i <= 10; ++i)
        if (auto x = get("c" + std::to_string(i))) s.set(i, std::stod(*x));
    if (auto x = get("v")) s.v = std::stod(*x);
    if (auto x = get("v1")) s.v1 = std::stod(*x);
    if (auto x = get("v2")) s.v2 = std::stod(*x);
    if (auto x = get("calibrated")) s.calibrated = (*x == "true" || *x == "1");
    s.validate();
    return s;
}

// Inputs of the bounded-plus-residual decomposition: an upper estimate A of
// the chaining functional, an upper estimate B of the psi_1 diameter, the
// moment order p, a confidence parameter v, and the sample size k.  theta
// is filled in by truncation_level.
struct DecompositionParams {
    double A = 1.0;
    double B = 1.0;
    double p = 2.0;
    double v = 1.0;
    long long k = 1;
    double theta = 0.0;

    void validate() const {
        if (!(A > 0.0) || !(B > 0.0)) throw std::invalid_argument("DecompositionParams: A, B must be positive");
        if (!(p >= 1.0)) throw std::invalid_argument("DecompositionParams: p must be >= 1");
        if (!(v > 0.0)) throw std::invalid_argument("DecompositionParams: v must be positive");
        if (k < 1) throw std::invalid_argument("DecompositionParams: k must be >= 1");
    }
};

// ---------------------------------------------------------------------
// Evaluators
// ---------------------------------------------------------------------

// Two-regime tail bound for a sum of k independent centered variables with
// a finite psi_1 norm: quadratic exponent below psi1, linear above.
// Reads c1.
inline double bernstein_tail(double t, long long k, double psi1, const ConstantSet& cs = {}) {
    if (!(t > 0.0) || !(psi1 > 0.0)) throw std::invalid_argument("bernstein_tail: t and psi1 must be positive");
    if (k < 1) throw std::invalid_argument("bernstein_tail: k must be >= 1");
    double r = t / psi1;
    return 2.0 * std::exp(-cs.at(1) * static_cast<double>(k) * std::min(r, r * r));
}

// Uniform bound on sums over the ell largest values when increments have a
// psi_2 chaining estimate and a psi_1 diameter.
inline double subset_sum_bound_psi1(int ell, long long k, double gamma2, double diam_psi1,
                                    double v1, double v2) {
    if (ell < 1 || ell > k) throw std::invalid_argument("subset_sum_bound_psi1: need 1 <= ell <= k");
    double l = static_cast<double>(ell);
    return v1 * std::sqrt(l) * gamma2 +
           v2 * diam_psi1 * l * std::log(std::exp(1.0) * static_cast<double>(k) / l);
}

// Same shape with a psi_2 diameter: the subset term only needs the square
// root of the log factor.
inline double subset_sum_bound_psi2(int ell, long long k, double gamma2, double diam_psi2, double v) {
    if (ell < 1 || ell > k) throw std::invalid_argument("subset_sum_bound_psi2: need 1 <= ell <= k");
    double l = static_cast<double>(ell);
    return v * (std::sqrt(l) * gamma2 +
                diam_psi2 * l * std::sqrt(std::log(std::exp(1.0) * static_cast<double>(k) / l)));
}

// Envelope for the largest number of samples exceeding a level t: the
// maximum of a quadratic-decay branch and an exponential branch.  Reads c3.
inline double tail_envelope(double t, long long k, double gamma2, double diam_psi1,
                            double v1, double v2, const ConstantSet& cs = {}) {
    if (!(t > 0.0)) throw std::invalid_argument("tail_envelope: t must be positive");
    if (k < 1) throw std::invalid_argument("tail_envelope: k must be >= 1");
    double c3 = cs.at(3);
    double quad = c3 * v1 * v1 * gamma2 * gamma2 / (t * t);
    double expo = std::exp(1.0) * static_cast<double>(k) *
                  std::exp(-t / (c3 * diam_psi1 * v2));
    return std::max(quad, expo);
}

// Smallest admissible truncation level: the maximum of a branch driven by
// the sample size and one driven by the moment order.  Reads c2.
inline double truncation_level(const DecompositionParams& params, const ConstantSet& cs = {}) {
    params.validate();
    double c2 = cs.at(2);
    double kk = static_cast<double>(params.k);
    double sample_branch =
        c2 * params.v * params.B *
        std::log(c2 * (params.B * params.B * kk / (params.A * params.A)) * params.v + 1.0);
    double moment_branch = c2 * params.p * params.B * std::log(c2 * params.p * params.B + 1.0);
    return std::max(sample_branch, moment_branch);
}

// Clip each value at level theta, keeping the sign; the residual carries
// whatever sticks out.  The two parts sum back to the input exactly --
// bitwise, not just in exact arithmetic -- and both maps are 1-Lipschitz
// up to one ulp.  The residual absorbs the rounding of x -/+ theta, so the
// bounded part is the exact complement; when that rounding pushes the
// bounded part outside the level, one ulp moves into the residual.
inline std::pair<std::vector<double>, std::vector<double>> split(const std::vector<double>& values,
                                                                 double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("split: theta must be positive");
    std::vector<double> bounded(values.size()), residual(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        double x = values[i];
        if (std::abs(x) <= theta) {
            bounded[i] = x;
            residual[i] = 0.0;
            continue;
        }
        double sign = x < 0.0 ? -1.0 : 1.0;
        double r = x - sign * theta;
        double b = x - r;  // exact: |x| > theta, so the subtraction cancels
        if (std::abs(b) > theta) {
            r = std::nextafter(r, sign * kInf);
            b = x - r;
        }
        if (sign * b < 0.0 || std::abs(b) > theta || b + r != x) {  // theta below the resolution of x
            b = 0.0;
            r = x;
        }
        bounded[i] = b;
        residual[i] = r;
    }
    return {std::move(bounded), std::move(residual)};
}

// Bound on the p-th moment mass beyond the truncation level.  Reads c1, c2.
inline double residual_moment_bound(double B, double p, double theta, const ConstantSet& cs = {}) {
    if (!(B > 0.0) || !(p >= 1.0) || !(theta >= 0.0))
        throw std::invalid_argument("residual_moment_bound: need B > 0, p >= 1, theta >= 0");
    return cs.at(1) * std::pow(2.0 * p * B, p) * std::exp(-theta / (cs.at(2) * B));
}

// Order-dependent factor in the residual-part estimate: powers of theta
// below second order, a logarithm at second order, powers of A above it.
// Reads c4.
inline double kappa(double p, double A, double theta, const ConstantSet& cs = {}) {
    if (!(p >= 1.0)) throw std::invalid_argument("kappa: p must be >= 1");
    double c4 = cs.at(4);
    if (p < 2.0) {
        if (!(theta > 0.0)) throw std::invalid_argument("kappa: theta must be positive for p < 2");
        return c4 * std::pow(theta, p - 2.0);
    }
    if (p == 2.0) {
        if (!(A > 1.0)) throw std::invalid_argument("kappa: A must exceed 1 for p = 2");
        return c4 * std::log(A);
    }
    if (!(A > 0.0)) throw std::invalid_argument("kappa: A must be positive");
    return c4 * std::pow(A, p - 2.0);
}

// Deviation contribution of the clipped part alone.  Reads c3.
inline double bounded_part_bound(double gamma2, double p, double theta, long long k, double v,
                                 const ConstantSet& cs = {}) {
    if (!(p >= 1.0) || !(theta > 0.0) || k < 1 || !(v > 0.0))
        throw std::invalid_argument("bounded_part_bound: invalid parameters");
    return cs.at(3) * p * std::pow(theta, p - 1.0) * v * gamma2 / std::sqrt(static_cast<double>(k));
}

// Full deviation bound combining the clipped and residual parts, with the
// truncation level chosen at its smallest admissible value.  Reads c2 (and
// c4 through kappa).
inline double combined_deviation_bound(double A, double B, double p, long long k, double v,
                                       const ConstantSet& cs = {}) {
    DecompositionParams params;
    params.A = A;
    params.B = B;
    params.p = p;
    params.v = v;
    params.k = k;
    double theta = truncation_level(params, cs);
    double kk = static_cast<double>(k);
    double c2 = cs.at(2);
    return c2 * v *
           (p * std::pow(theta, p - 1.0) * A / std::sqrt(kk) +
            (A * A / kk) * (std::pow(theta, p - 2.0) + kappa(p, A, theta, cs) + 1.0));
}

// Order-dependent factor for the truncated-sample bound, driven by the
// expected maximum H_k of the truncation variable.
inline double kappa_truncated(double p, double H_k) {
    if (!(p >= 1.0)) throw std::invalid_argument("kappa_truncated: p must be >= 1");
    if (p < 2.0) return 1.0;
    if (p == 2.0) {
        if (!(H_k > 1.0)) throw std::invalid_argument("kappa_truncated: H_k must exceed 1 for p = 2");
        return std::log(H_k);
    }
    if (!(H_k > 0.0)) throw std::invalid_argument("kappa_truncated: H_k must be positive");
    return std::pow(H_k, p - 2.0);
}

// Deviation bound after resampling from the truncated law: the same
// two-term shape with its own truncation level (confidence folded into the
// constants) plus a defect term for the mass the truncation removed.
// Reads c2, c3.
inline double truncated_process_bound(double A, double B, double p, long long k, double H_k,
                                      double eps, const ConstantSet& cs = {}) {
    if (!(eps >= 0.0)) throw std::invalid_argument("truncated_process_bound: eps must be >= 0");
    DecompositionParams params;
    params.A = A;
    params.B = B;
    params.p = p;
    params.v = 1.0;  // this bound's level formula carries no separate confidence factor
    params.k = k;
    double theta = truncation_level(params, cs);
    double kk = static_cast<double>(k);
    double c2 = cs.at(2);
    return c2 * (std::pow(theta, p - 1.0) * A / std::sqrt(kk) +
                 (A * A / kk) * (std::pow(theta, p - 2.0) + kappa_truncated(p, H_k))) +
           cs.at(3) * std::sqrt(B) * eps;
}

}  // namespace olab::bounds
