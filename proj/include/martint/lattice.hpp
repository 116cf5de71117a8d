#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace martint {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vec3 = std::array<double, 3>;

// Space-time point; unused spatial slots stay 0 for d < 3.
struct Zpt {
    double t = 0.0;
    Vec3 x{0.0, 0.0, 0.0};
};

inline double euclid_norm(const Vec3& x) {
    return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
}

// Discrete torus (eps Z / Z)^d with continuous time on [0, horizon].
struct LatticeSpec {
    int d = 3;
    double eps = 0.25;
    double horizon = 1.0;

    int side() const { return static_cast<int>(std::lround(1.0 / eps)); }

    std::int64_t site_count() const {
        std::int64_t n = 1;
        for (int i = 0; i < d; ++i) n *= side();
        return n;
    }

    void validate() const {
        if (d < 1 || d > 3) throw ConfigError("lattice: d must be in {1,2,3}");
        if (!(eps > 0.0 && eps <= 1.0)) throw ConfigError("lattice: eps must be in (0,1]");
        double inv = 1.0 / eps;
        if (std::abs(inv - std::lround(inv)) > 1e-9)
            throw ConfigError("lattice: 1/eps must be a positive integer, got eps=" + std::to_string(eps));
        if (!(horizon >= 0.0)) throw ConfigError("lattice: horizon must be >= 0");
    }

    std::array<int, 3> site_coords(std::int64_t s) const {
        std::array<int, 3> c{0, 0, 0};
        int n = side();
        for (int i = 0; i < d; ++i) {
            c[i] = static_cast<int>(s % n);
            s /= n;
        }
        return c;
    }

    std::int64_t site_index(std::array<int, 3> c) const {
        int n = side();
        std::int64_t s = 0;
        for (int i = d - 1; i >= 0; --i) {
            int w = ((c[i] % n) + n) % n;
            s = s * n + w;
        }
        return s;
    }

    Vec3 site_position(std::int64_t s) const {
        auto c = site_coords(s);
        Vec3 x{0, 0, 0};
        for (int i = 0; i < d; ++i) x[i] = eps * c[i];
        return x;
    }

    // shortest displacement a-b on the torus, per coordinate in (-1/2, 1/2]
    Vec3 torus_diff(const Vec3& a, const Vec3& b) const {
        Vec3 r{0, 0, 0};
        for (int i = 0; i < d; ++i) {
            double v = a[i] - b[i];
            v -= std::round(v);
            r[i] = v;
        }
        return r;
    }
};

} // namespace martint
