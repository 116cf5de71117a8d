#pragma once

#include "martint/fft.hpp"
#include "martint/kernels.hpp"
#include "martint/noise.hpp"

#include <memory>
#include <optional>

namespace martint {

enum class SymbolTag { Xi, Psi, Psi2, IPsi3Psi2 };

struct ModelSymbol {
    SymbolTag tag = SymbolTag::Xi;
    double kappa = 0.01;
    double homogeneity() const {
        switch (tag) {
        case SymbolTag::Xi: return -2.5 - kappa;
        case SymbolTag::Psi: return -0.5 - kappa;
        case SymbolTag::Psi2: return -1.0 - 2.0 * kappa;
        case SymbolTag::IPsi3Psi2: return -0.5 - 5.0 * kappa;
        }
        return 0.0;
    }
    double target_slope() const { // kappa -> 0 exponent used in slope fits
        switch (tag) {
        case SymbolTag::Xi: return -2.5;
        case SymbolTag::Psi: return -0.5;
        case SymbolTag::Psi2: return -1.0;
        case SymbolTag::IPsi3Psi2: return -0.5;
        }
        return 0.0;
    }
};

SymbolTag symbol_from_name(const std::string& name);
std::string symbol_name(SymbolTag tag);

// smooth product bump supported in the unit parabolic ball
struct TestProfile {
    double sharp_t = 2.0, sharp_x = 2.0;
    double time_halfwidth = 0.25; // support |t| <= time_halfwidth
    double space_radius = 0.5;    // support |x| <= space_radius
    double eval_raw(double t, double r) const;
    double mass() const; // space-time integral of the raw profile
};

// phi^lambda_z(t,x) = lambda^-5 phi(lambda^-2 (t-t0), lambda^-1 (x-x0)),
// normalized to unit space-time mass; spatial distance taken on the torus
struct ScaledTestFunction {
    TestProfile profile{};
    double lambda = 1.0;
    Zpt center{};
    double inv_mass = 1.0;

    static ScaledTestFunction make(const TestProfile& p, double lambda, const Zpt& center);
    double operator()(double t, const Vec3& x, const LatticeSpec& lat) const;
    double t_lo() const { return center.t - profile.time_halfwidth * lambda * lambda; }
    double t_hi() const { return center.t + profile.time_halfwidth * lambda * lambda; }
    double x_rad() const { return profile.space_radius * lambda; }
};

// martingale family extended to negative times by an independent mirrored copy
class ExtendedNoise {
public:
    struct Atom {
        double t;
        std::int32_t site;
        float sign;
    };

    ExtendedNoise(const LatticeSpec& lattice, const MartingaleSpec& spec, std::uint64_t seed,
                  double t_neg, double t_pos);

    // hand-built realizations, e.g. a single jump
    static ExtendedNoise from_atoms(const LatticeSpec& lattice, const MartingaleSpec& spec,
                                    std::vector<Atom> atoms, double t_neg, double t_pos);

    const LatticeSpec& lattice() const { return lattice_; }
    const MartingaleSpec& spec() const { return spec_; }
    const std::vector<Atom>& atoms() const { return atoms_; } // time-sorted
    double t_neg() const { return t_neg_; }
    double t_pos() const { return t_pos_; }

private:
    LatticeSpec lattice_;
    MartingaleSpec spec_;
    double t_neg_, t_pos_;
    std::vector<Atom> atoms_;
};

struct ModelParams {
    LatticeSpec lattice{3, 0.125, 1.0};
    MartingaleSpec spec = MartingaleSpec::wiener_limit(0.125);
    double eh = 0.25;
    MollifierProfile psi{6.0};
    KernelBuildParams kernel_params{};
    double time_step = 0.0; // grid/kernel step; 0 -> eps^2
    int c2_time_stride = 1; // time quadrature stride for the chain constant
    bool with_chain_constant = false;
};

// Shared read-only tables for one (eps, eh): the singular kernel, its lattice
// samplings, periodized Fourier slices, and the renormalization constants.
class ModelContext {
public:
    explicit ModelContext(const ModelParams& p);

    const ModelParams& params() const { return p_; }
    const LatticeSpec& lattice() const { return p_.lattice; }
    double dt() const { return dt_; }
    int side() const { return side_; }
    std::int64_t sites() const { return static_cast<std::int64_t>(side_) * side_ * side_; }

    const SingularKernel& continuum_kernel() const { return *kc_; }
    const LatticeKernel& kernel_eps() const { return *k_eps_; }  // K^eps on the lattice
    const LatticeKernel& kernel_eh() const { return *k_eh_; }    // K^e = K^eps * psi_e
    double c1() const { return c1_; }
    double c2() const { return c2_; }
    double c2_error() const { return c2_err_; }

    // periodized kernel Fourier slices: slot j covers time offset (j + j_lo)*dt
    struct FourierKernel {
        int j_lo = 0;
        std::vector<std::vector<cplx>> slices;
        int j_hi() const { return j_lo + static_cast<int>(slices.size()) - 1; }
    };
    const FourierKernel& fk_eh() const { return fk_eh_; }
    const FourierKernel& fk_eps() const { return fk_eps_; }
    const FourierKernel& fk_eh_sq() const { return fk_eh_sq_; } // periodized squared kernel

    // periodized real-space table of K^e (per time node), for direct sums
    double periodized_eh(int time_node, std::int64_t site_offset) const;
    int per_j_lo() const { return fk_eh_.j_lo; }
    const std::vector<std::vector<double>>& per_eh_raw() const { return per_eh_; }

private:
    ModelParams p_;
    double dt_;
    int side_;
    std::unique_ptr<SingularKernel> kc_;
    std::unique_ptr<LatticeKernel> k_eps_, k_eh_;
    double c1_ = 0.0, c2_ = 0.0, c2_err_ = 0.0;
    FourierKernel fk_eh_, fk_eps_, fk_eh_sq_;
    std::vector<std::vector<double>> per_eh_;

    FourierKernel periodize_and_transform(const LatticeKernel& k, bool square,
                                          std::vector<std::vector<double>>* keep_real);
};

// reference evaluator: exact jump-sum convolution of the noise with K^e,
// periodized in space (sums all kernel images)
double psi_field_direct(const ModelContext& ctx, const ExtendedNoise& noise, const Zpt& zbar);

// Pairing engine for one (context, test function); shares tables across
// replicas, safe for concurrent use.
class SymbolEvaluator {
public:
    SymbolEvaluator(const ModelContext& ctx, const ScaledTestFunction& phi);

    double pair(SymbolTag tag, const ExtendedNoise& noise) const;

    double pair_xi(const ExtendedNoise& noise) const;
    double pair_psi(const ExtendedNoise& noise) const;
    double pair_psi2(const ExtendedNoise& noise, bool renormalized = true) const;
    double pair_ipsi3psi2(const ExtendedNoise& noise) const;
    double pair_cherry(const ExtendedNoise& noise) const; // compensated diagonal of Psi^2

    // closed-form second moments from the bracket (match the Monte Carlo
    // estimators exactly in expectation)
    double exact_second_moment_xi() const;
    double exact_second_moment_psi() const;

    double t_neg_required(SymbolTag tag) const;
    double t_pos_required(SymbolTag tag) const;

    const ScaledTestFunction& phi() const { return phi_; }
    const ModelContext& context() const { return ctx_; }

private:
    const ModelContext& ctx_;
    ScaledTestFunction phi_;
    // phi support slice range on the global grid
    int q_lo_ = 0, q_hi_ = -1;
    std::vector<double> phi_slices_;          // phi values per (slice, site)
    std::vector<std::pair<std::array<int, 3>, double>> moll_weights_;
    // G table for the Psi pairing: per grid node, per site
    int g_lo_ = 0;
    std::vector<std::vector<double>> g_psi_;

    struct Field; // per-replica tabulated field
    void tabulate(const ExtendedNoise& noise, const ModelContext::FourierKernel& fk, int q_lo,
                  int q_hi, std::vector<std::vector<double>>& out, bool signed_atoms = true) const;
    double quadrature_pair(const std::vector<double>& slice_values) const;
};

} // namespace martint
