#pragma once

#include "olab/common.hpp"

namespace olab {

// A family of directions indexed over R^n: the unit sphere, the l1 ball,
// an explicit finite list, or a net standing in for a continuous body.
struct IndexClass {
    enum class Kind { sphere, finite_list, l1_ball, net };

    Kind kind = Kind::sphere;
    int n = 1;
    Mat vectors;              // rows; finite_list and net only
    double resolution = 0.0;  // net only: nominal mesh width

    static IndexClass sphere(int n) {
        IndexClass c;
        c.kind = Kind::sphere;
        c.n = n;
        return c;
    }

    static IndexClass l1_ball(int n) {
        IndexClass c;
        c.kind = Kind::l1_ball;
        c.n = n;
        return c;
    }

    static IndexClass finite_list(Mat vecs) {
        if (vecs.rows() < 1) throw std::invalid_argument("IndexClass: empty list");
        IndexClass c;
        c.kind = Kind::finite_list;
        c.n = static_cast<int>(vecs.cols());
        c.vectors = std::move(vecs);
        return c;
    }

    static IndexClass net(Mat vecs, double resolution) {
        IndexClass c = finite_list(std::move(vecs));
        c.kind = Kind::net;
        c.resolution = resolution;
        return c;
    }

    bool is_finite() const { return kind == Kind::finite_list || kind == Kind::net; }

    // Both continuous kinds are symmetric; finite lists are treated as
    // given (callers wanting symmetry should include -t explicitly).
    bool symmetric() const { return kind == Kind::sphere || kind == Kind::l1_ball; }

    // sup_{t in class} |<g, t>|, exact per kind.
    double support(const Vec& g) const {
        switch (kind) {
            case Kind::sphere: return g.norm();
            case Kind::l1_ball: return g.cwiseAbs().maxCoeff();
            case Kind::finite_list:
            case Kind::net: return (vectors * g).cwiseAbs().maxCoeff();
        }
        throw std::logic_error("IndexClass::support: bad kind");
    }

    // Radius sup ||t||_2 over the class.
    double euclidean_radius() const {
        switch (kind) {
            case Kind::sphere:
            case Kind::l1_ball: return 1.0;
            case Kind::finite_list:
            case Kind::net: return vectors.rowwise().norm().maxCoeff();
        }
        throw std::logic_error("IndexClass::euclidean_radius: bad kind");
    }
};

// Deterministic net of m uniform random unit vectors (rows).
inline Mat sphere_net(int n, int m, std::uint64_t seed) {
    if (n < 1 || m < 1) throw std::invalid_argument("sphere_net: n and m must be >= 1");
    Mat pts(m, n);
    for (int i = 0; i < m; ++i) {
        RngStream rng(mix_seed(seed, 0x6e6574ULL, static_cast<std::uint64_t>(i)));
        Vec v(n);
        double norm2 = 0.0;
        do {
            for (int j = 0; j < n; ++j) v[j] = rng.gaussian();
            norm2 = v.squaredNorm();
        } while (norm2 == 0.0);
        pts.row(i) = v.transpose() / std::sqrt(norm2);
    }
    return pts;
}

// Default dense-net budget used by several lower-bound estimators.
inline int default_net_budget(int n) {
    double cap = std::pow(20.0, static_cast<double>(n));
    return static_cast<int>(std::min(1e5, cap));
}

}  // namespace olab
