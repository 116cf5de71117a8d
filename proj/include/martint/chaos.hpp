#pragma once

#include "martint/lattice.hpp"
#include "martint/noise.hpp"

#include <functional>
#include <span>
#include <vector>

namespace martint {

// Set partition of {0..n-1}; components are sorted by least element and each
// component is sorted increasingly.
struct Contraction {
    int n = 0;
    std::vector<std::vector<int>> components;
    int m() const { return static_cast<int>(components.size()); }
    void validate() const;
};

// All set partitions of {0..n-1}; the count is the n-th Bell number.
std::vector<Contraction> contractions(int n);

// Time order of the components: slot j (0-based, earliest first) holds
// component slot_to_component[j].
struct Ordering {
    std::vector<int> slot_to_component;
};

std::vector<Ordering> orderings(const Contraction& gamma);

enum class ComponentLabel { Nil, Down, Diamond }; // nil / Lebesgue-bracket / compensated-bracket

struct Labeling {
    std::vector<ComponentLabel> labels;
    static Labeling all_nil(int m) { return Labeling{std::vector<ComponentLabel>(m, ComponentLabel::Nil)}; }
};

// Deterministic function of n space-time points of the discretized domain.
struct GridFunction {
    int arity = 1;
    std::function<double(std::span<const Zpt>)> eval;

    double operator()(std::span<const Zpt> z) const { return eval(z); }
};

GridFunction constant_function(int arity, double value);

// F^{gamma,sigma}: the m-ary function obtained by setting all variables of a
// component to that component's slot variable.
GridFunction contracted_function(const GridFunction& f, const Contraction& gamma,
                                 const Ordering& sigma);

// p-value assignment on the m components: each entry is 1, 2 or 0 (0 encodes infinity)
struct PFunction {
    std::vector<int> p; // entries in {1, 2, 0}; 0 means the sup norm
    static constexpr int Inf = 0;
    int m() const { return static_cast<int>(p.size()); }
};

std::vector<PFunction> all_p_functions(int m);

// ---- exact integral evaluation against the jump measures -------------------

struct ChaosQuadrature {
    double step = 1e-3; // absolute time step for Lebesgue / compensator parts
    std::int64_t op_guard = 10'000'000;
};

// n-fold product integral of F against the product of one-fold measures,
// evaluated by brute force over all tuples of measure atoms (jump atoms plus,
// for compensated specs, midpoint-rule time atoms).
double product_integral(const GridFunction& f, const MartingalePathSet& path, int n, double t,
                        const ChaosQuadrature& quad = {});

// integral of the 1-ary F against the n-th diagonal measure over s < t
double diagonal_integral(const GridFunction& f, const MartingalePathSet& path, int n, double t);

struct DiagonalSplit {
    double martingale_part;
    double lebesgue_part;
};

// two-term split of the diagonal integral: a stochastic-integral part against
// M (n odd) or the compensated bracket martingale (n even), plus a Lebesgue
// part carrying the corresponding density
DiagonalSplit diagonal_decomposition(const GridFunction& f, const MartingalePathSet& path, int n,
                                     double t, const ChaosQuadrature& quad = {});

// nested time-ordered integral over the components of gamma in the order
// sigma; exact on symmetric specs, midpoint quadrature for compensator parts
double iterated_integral(const Contraction& gamma, const Ordering& sigma, const GridFunction& f,
                         const MartingalePathSet& path, double t, const ChaosQuadrature& quad = {});

// as iterated_integral, but Down-labelled components integrate against the
// bracket density and Diamond-labelled ones against the compensated bracket
// martingale (both only defined for even component sizes)
double renormalized_iterated_integral(const Contraction& gamma, const Ordering& sigma,
                                      const Labeling& lab, const GridFunction& f,
                                      const MartingalePathSet& path, double t,
                                      const ChaosQuadrature& quad = {});

// ---- norms and exponents ----------------------------------------------------

// Recursive L^p norm of an m-ary function with the time-ordering indicators:
// levels are peeled outermost-first, p=1,2 use the eps^d-weighted lattice sum
// and time quadrature, p=Inf the grid sup.
double nested_norm(const GridFunction& f_m, const PFunction& p, const LatticeSpec& lattice,
                   double horizon, double quad_step);

// indices of singleton components
std::vector<int> singleton_components(const Contraction& gamma);

double exponent_alpha(const Contraction& gamma, const PFunction& p, int d, double k);
double exponent_beta(const Contraction& gamma, const PFunction& p, double moment_p);

} // namespace martint
