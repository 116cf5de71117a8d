#pragma once

#include "martint/lattice.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace martint {

enum class JumpModel { SymmetricPair, OneSidedCompensated };

// Constant-density jump martingale family on the lattice. Every jump has
// magnitude c*eps^k; the predictable bracket is eps^{-d}*bracket_density*t
// and the drift compensator is eps^{-k-d}*compensator_density*t.
struct MartingaleSpec {
    double k = -0.5;                  // jump-size exponent, k > -d/2
    double c = 1.0;                   // jump magnitude constant, > 0
    double bracket_density = 1.0;     // |.| <= 1
    double compensator_density = 0.0;
    JumpModel model = JumpModel::SymmetricPair;
    double site_rate = 1.0;           // jumps per site per unit time

    double jump_size(double eps) const { return c * std::pow(eps, k); }

    // Spec whose martingales approximate space-time white noise on the d=3
    // torus: k=-1/2, c=1/sqrt(2), two Poisson clocks of rate eps^-2 per site.
    static MartingaleSpec wiener_limit(double eps);

    // One-sided spec with unit constants: c=1, rate chosen so the bracket
    // density is exactly `bracket`.
    static MartingaleSpec one_sided_unit(double eps, int d, double k, double bracket = 1.0);

    void validate(const LatticeSpec& lattice) const;
};

struct JumpEvent {
    double time;
    std::int32_t site;
    std::int8_t sign; // +1 or -1
};

// Immutable realization of the whole martingale family: per-site time-sorted
// jump events plus the (constant) compensator data of the spec.
class MartingalePathSet {
public:
    MartingalePathSet(LatticeSpec lattice, MartingaleSpec spec, std::uint64_t seed,
                      std::vector<std::vector<JumpEvent>> events);

    const LatticeSpec& lattice() const { return lattice_; }
    const MartingaleSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    const std::vector<JumpEvent>& events(std::int64_t site) const { return per_site_[site]; }
    std::int64_t total_events() const;

    // flattened copy of all events, sorted by time
    std::vector<JumpEvent> all_events_sorted() const;

    // cadlag value at (t, site): signed jump sum over s <= t minus the
    // compensator drift
    double evaluate(double t, std::int64_t site) const;

    double realized_bracket(double t, std::int64_t site) const;
    std::int64_t jump_count(double a, double b, std::int64_t site) const; // events in [a,b]
    double total_variation(double horizon, std::int64_t site) const;

    // path of eps^{-k} ([M]_t - <M>_t): same event times, all signs +1,
    // jump magnitude c^2 eps^k, compensator density = bracket_density
    MartingalePathSet renormalized() const;

private:
    LatticeSpec lattice_;
    MartingaleSpec spec_;
    std::uint64_t seed_;
    std::vector<std::vector<JumpEvent>> per_site_;
};

MartingalePathSet sample_paths(const LatticeSpec& lattice, const MartingaleSpec& spec,
                               std::uint64_t seed);

double predictable_bracket(const MartingaleSpec& spec, const LatticeSpec& lattice, double t);

// Unit-mass radial mollifier profile: w(r) = exp(-sharp * r^2 / (1 - r^2))
// on r < 1, zero outside, normalized so the d-dimensional integral of
// psi_e(x) = e^-d * psi(x/e) is 1. Larger `sharp` concentrates the bump.
struct MollifierProfile {
    double sharpness = 1.0;
    double operator()(double r) const {
        if (r >= 1.0) return 0.0;
        double r2 = r * r;
        return std::exp(-sharpness * r2 / (1.0 - r2));
    }
    double normalization(int d) const; // integral of the unnormalized profile over R^d
};

struct SmoothedFieldSpec {
    double alpha = 0.75;       // smoothing scale e = eps^alpha
    MollifierProfile psi{};

    double scale(double eps) const { return std::pow(eps, alpha); }
};

// Evaluator for eps^d sum_y psi_e(x-y) M(t,y), periodic in space. The
// discrete mollifier weights are normalized to exact unit lattice mass.
class SmoothedField {
public:
    SmoothedField(const MartingalePathSet& path, const SmoothedFieldSpec& spec);
    double operator()(double t, std::int64_t site) const;
    double mollifier_lattice_mass_error() const { return raw_mass_defect_; }

private:
    const MartingalePathSet& path_;
    std::vector<std::int64_t> neighbor_sites_;
    std::vector<double> weights_; // eps^d * psi_e(offset), renormalized
    double raw_mass_defect_;
    std::vector<std::vector<std::int64_t>> site_neighbors_; // per-site resolved indices
};

// Test function with declared compact time support, for pairings against the
// martingale measure.
struct PairTestFunction {
    std::function<double(double, const Vec3&)> eval;
    double t_lo = 0.0;
    double t_hi = 1.0;
};

// integral of phi against the one-fold measure eps^d sum_x dM(s,x) over
// s in [0, t]; the compensator part uses midpoint quadrature with step h
double pair_with_test(const MartingalePathSet& path, const PairTestFunction& phi, double t,
                      double quad_step);

} // namespace martint
