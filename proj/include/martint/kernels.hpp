#pragma once

#include "martint/lattice.hpp"
#include "martint/noise.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace martint {

// ---- parabolic geometry -----------------------------------------------------

struct ParabolicGeometry {
    int d = 3;
    int s_total() const { return d + 2; } // |s| with scaling (2,1,...,1)
};

inline double parabolic_norm(const Zpt& z) {
    return std::sqrt(std::abs(z.t)) + euclid_norm(z.x);
}

inline Zpt parabolic_scale(double lambda, const Zpt& z) {
    return Zpt{lambda * lambda * z.t, {lambda * z.x[0], lambda * z.x[1], lambda * z.x[2]}};
}

// |k|_s = 2 k_0 + k_1 + ... + k_d for a space-time multi-index
int multiindex_weight(std::span<const int> k);

// heat kernel on R^3, zero for t <= 0
double heat_kernel(double t, const Vec3& x);

// C-infinity step: 1 on [0, plateau], 0 outside [0, support]
struct CutoffSpec {
    double plateau = 0.5;
    double support = 1.0;
    double operator()(double r) const;
    void validate() const;
};

struct KernelMeta {
    double a = 0.0;      // order of singularity
    int r = 0;           // renormalization order
    double support = 0.0; // parabolic support radius
    double eh = 0.0;     // smoothing scale
    double eps = 0.0;    // lattice mesh the kernel is meant for
};

// Type-erased space-time kernel evaluator.
struct KernelView {
    KernelMeta meta;
    std::function<double(const Zpt&)> eval;
    double operator()(const Zpt& z) const { return eval(z); }
};

// ---- smoothed heat kernel and its singular part -----------------------------

struct KernelBuildParams {
    double time_step = 0.0;     // radial table step in t; 0 -> eh^2 / 16
    double radial_step = 0.0;   // radial table step in |x|; 0 -> eh / 16
    double mollifier_sharpness = 4.0;
    int quad_nodes = 24;        // nodes for the mollification quadratures
};

// P^eps = P * psi~_eh on a (t, |x|) table; the space-time mollifier is a
// product bump supported in the parabolic box |t| <= 0.7 eh^2, |x| <= 0.7 eh.
class SmoothedHeatKernel {
public:
    SmoothedHeatKernel(double eh, const KernelBuildParams& params = {});
    double value(double t, double r) const;
    double value(const Zpt& z) const { return value(z.t, euclid_norm(z.x)); }
    double eh() const { return eh_; }

private:
    double eh_;
    double t0_, ht_, hr_;
    int nt_, nr_;
    std::vector<double> table_;
};

// K^eps (= chi * P^eps, singular part) together with the smooth remainder.
class SingularKernel {
public:
    SingularKernel(double eh, const CutoffSpec& cutoff, const KernelBuildParams& params = {});

    double eval(const Zpt& z) const;      // K^eps
    double remainder(const Zpt& z) const; // R^eps = (1 - chi) * P^eps
    double smoothed(const Zpt& z) const;  // P^eps
    const CutoffSpec& cutoff() const { return cutoff_; }
    double eh() const { return eh_; }

    KernelView view(double eps) const; // meta: a=3, r=0, support=cutoff.support

private:
    double eh_;
    CutoffSpec cutoff_;
    SmoothedHeatKernel base_;
};

// ---- kernels sampled on the space lattice -----------------------------------

// Kernel values on (time grid) x (lattice offsets in a box), linear in time.
class LatticeKernel {
public:
    LatticeKernel(double eps, double t0, double dt, int nt, int reach, KernelMeta meta);

    static LatticeKernel sample(const KernelView& k, double eps, double time_step);

    double eps() const { return eps_; }
    int reach() const { return reach_; }
    int nt() const { return nt_; }
    double t0() const { return t0_; }
    double dt() const { return dt_; }
    const KernelMeta& meta() const { return meta_; }

    double& at(int it, int ix, int iy, int iz);       // offsets in [-reach, reach]
    double at(int it, int ix, int iy, int iz) const;

    // linear interpolation in time at a lattice offset
    double value(double t, int ix, int iy, int iz) const;
    double value(const Zpt& z) const; // offsets from coordinates (must be lattice multiples)

    KernelView view() const;

    // eps^3 * sum_y int K(t,y)^2 dt with the time integral of the squared
    // linear interpolant done exactly per segment
    double squared_mass_exact() const;

    // eps^3 * sum_y int K(t,y) dt (exact trapezoid of the interpolant)
    double mass() const;

    // eps^3 * sum_y trapezoid of the node-squared values; centers fields built
    // from the node-sampled squared kernel
    double node_squared_mass() const;

    std::size_t value_count() const { return values_.size(); }
    const std::vector<double>& raw() const { return values_; }
    std::vector<double>& raw() { return values_; }

    void export_binary(const std::string& path) const;
    static LatticeKernel import_binary(const std::string& path);

private:
    double eps_, t0_, dt_;
    int nt_, reach_, side_;
    KernelMeta meta_;
    std::vector<double> values_;
    std::size_t idx(int it, int ix, int iy, int iz) const;
};

// K^e = K *_eps psi_e: discrete spatial convolution against the normalized
// lattice mollifier of scale eh
LatticeKernel discrete_convolve(const LatticeKernel& k, const MollifierProfile& psi, double eh);

// point-mass mollifier weights degenerate to the identity; exposed for tests
std::vector<std::pair<std::array<int, 3>, double>> lattice_mollifier_weights(
    double eps, double eh, const MollifierProfile& psi);

// ---- dyadic decomposition ---------------------------------------------------

struct DyadicStack {
    int levels = 0;                 // N + 1 pieces, N = -floor(log2 eh)
    double c1 = 0.5, c2 = 2.0;      // level-n support in [c1 2^-n, c2 2^-n] (level N keeps the ball)
    KernelView base;
    std::vector<KernelView> pieces;

    double reconstruct(const Zpt& z) const;
};

DyadicStack dyadic_decompose(const KernelView& k, double eh);

// ---- norms -------------------------------------------------------------------

// deterministic probe set for sup-norm measurements: parabolic shells from
// ~eh/8 up to the support radius, axis/diagonal/mixed directions
std::vector<Zpt> kernel_probe_points(double support, double eh);

// sup over probes of (||z||_s + eh)^(a + |k|_s) |D^k K(z)| for |k|_s <= q,
// derivatives by central differences at step eps (space) and eps^2 (time)
double kernel_norm(const KernelView& k, double a, int q, double eh, double eps,
                   const std::vector<Zpt>& probes = {});

// ---- renormalization ---------------------------------------------------------

// positive renormalization: K^(z-, z+) = K(z+ - z-) - sum_{|k|_s < r} z+^k/k! D^k K(-z-)
struct TwoPointKernel {
    std::function<double(const Zpt&, const Zpt&)> eval;
    double operator()(const Zpt& a, const Zpt& b) const { return eval(a, b); }
};

TwoPointKernel positive_renorm(const KernelView& k, int r, double fd_space_step,
                               double fd_time_step);

// negative renormalization applied to a two-point test function eta:
// int int K(z+ - z-) (T_r eta)(z-, z+) d mu d mu over the lattice-time measure,
// with eta supported in [t_lo, t_hi] x (ball of radius x_rad) in each slot
struct TwoPointSupport {
    double t_lo = 0.0, t_hi = 1.0;
    double x_rad = 1.0;
};

double negative_renorm_apply(const KernelView& k, int r,
                             const std::function<double(const Zpt&, const Zpt&)>& eta,
                             const TwoPointSupport& sup, double eps, double time_step);

// ---- chain kernel and the renormalization constants -------------------------

// G(v) = K(-v) * A(v)^2 with A(v) = int K(u+v) K(u) dmu(u): the five-factor
// two-loop kernel; a=5, r=0 declared. The space part of A is the exact
// lattice sum (padded FFT); time is a Riemann sum at the table step times
// time_stride.
class ChainKernel {
public:
    explicit ChainKernel(const LatticeKernel& k, int time_stride = 1);
    double value(const Zpt& v) const;       // via the tabulated correlation
    double value_alt(const Zpt& v) const;   // independent direct summation
    KernelView view() const;
    const LatticeKernel& correlation() const { return corr_; }

private:
    const LatticeKernel* k_;
    LatticeKernel corr_;
};

// (R G)(eta) = int int G(z2 - z1) (eta(z1,z2) - eta(z1,z1)) dz1 dz2
double chain_renorm(const ChainKernel& g,
                    const std::function<double(const Zpt&, const Zpt&)>& eta,
                    const TwoPointSupport& sup, double eps, double time_step);

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0; // |value(h) - value(h/2)| Richardson gap
};

// C1 = int K(z)^2 dz over the lattice-time domain, midpoint in time at step h
QuadratureResult renorm_constant_c1(const KernelView& k, double eps, double h);

// exact integral of the squared interpolant of a sampled kernel (used to
// center the squared field in the model)
double renorm_constant_c1_exact(const LatticeKernel& k);

// C2 = 2 int K(z) A(z)^2 dz with A the correlation above; the time stride
// documents the quadrature step and the error estimate compares against the
// doubled stride
QuadratureResult renorm_constant_c2(const LatticeKernel& k, int time_stride = 1);

} // namespace martint
