#include "martint/chaos.hpp"

#include <algorithm>
#include <cmath>

namespace martint {

void Contraction::validate() const {
    std::vector<int> seen(n, 0);
    for (const auto& comp : components) {
        if (comp.empty()) throw ConfigError("contraction: empty component");
        for (int i : comp) {
            if (i < 0 || i >= n) throw ConfigError("contraction: index out of range");
            if (seen[i]++) throw ConfigError("contraction: index repeated");
        }
    }
    for (int i = 0; i < n; ++i)
        if (!seen[i]) throw ConfigError("contraction: index not covered");
}

std::vector<Contraction> contractions(int n) {
    if (n < 1 || n > 8) throw GuardError("contractions: n must be in [1,8]");
    // restricted growth strings: a[i] <= 1 + max(a[0..i-1])
    std::vector<Contraction> out;
    std::vector<int> a(n, 0), b(n, 0); // b[i] = max allowed value at i
    int i = 0;
    while (true) {
        if (i == n) {
            int m = *std::max_element(a.begin(), a.end()) + 1;
            Contraction g;
            g.n = n;
            g.components.assign(m, {});
            for (int j = 0; j < n; ++j) g.components[a[j]].push_back(j);
            out.push_back(std::move(g));
            --i;
            while (i > 0 && a[i] == b[i] + 1) a[i--] = 0;
            if (i == 0) break;
            ++a[i];
            ++i;
        } else {
            b[i] = (i == 0) ? -1 : std::max(b[i - 1], a[i - 1]);
            ++i;
        }
    }
    return out;
}

std::vector<Ordering> orderings(const Contraction& gamma) {
    gamma.validate();
    std::vector<int> idx(gamma.m());
    for (int j = 0; j < gamma.m(); ++j) idx[j] = j;
    std::vector<Ordering> out;
    do {
        out.push_back(Ordering{idx});
    } while (std::next_permutation(idx.begin(), idx.end()));
    return out;
}

GridFunction constant_function(int arity, double value) {
    return GridFunction{arity, [value](std::span<const Zpt>) { return value; }};
}

GridFunction contracted_function(const GridFunction& f, const Contraction& gamma,
                                 const Ordering& sigma) {
    if (f.arity != gamma.n) throw ConfigError("contracted_function: arity mismatch");
    const int n = gamma.n;
    const int m = gamma.m();
    std::vector<int> var_to_slot(n);
    for (int j = 0; j < m; ++j)
        for (int i : gamma.components[sigma.slot_to_component[j]]) var_to_slot[i] = j;
    auto inner = f;
    return GridFunction{m, [inner, var_to_slot, n](std::span<const Zpt> z) {
                            std::vector<Zpt> full(n);
                            for (int i = 0; i < n; ++i) full[i] = z[var_to_slot[i]];
                            return inner(full);
                        }};
}

std::vector<PFunction> all_p_functions(int m) {
    std::vector<PFunction> out;
    const int vals[3] = {1, 2, PFunction::Inf};
    std::vector<int> cur(m, 1);
    std::function<void(int)> rec = [&](int j) {
        if (j == m) {
            out.push_back(PFunction{cur});
            return;
        }
        for (int v : vals) {
            cur[j] = v;
            rec(j + 1);
        }
    };
    rec(0);
    return out;
}

// ---- measure atoms ----------------------------------------------------------

namespace {

struct Atom {
    double t;
    std::int64_t site;
    double weight;
};

// atoms of the one-fold measure eps^d sum_x dM on [0, t): jumps plus (for
// nonzero compensator) midpoint time atoms on every site
std::vector<Atom> one_fold_atoms(const MartingalePathSet& path, double t,
                                 const ChaosQuadrature& quad) {
    const auto& lat = path.lattice();
    const auto& spec = path.spec();
    const double epsd = std::pow(lat.eps, lat.d);
    const double jump = spec.jump_size(lat.eps);
    std::vector<Atom> atoms;
    for (std::int64_t s = 0; s < lat.site_count(); ++s)
        for (const auto& e : path.events(s)) {
            if (e.time >= t) break;
            atoms.push_back(Atom{e.time, s, epsd * e.sign * jump});
        }
    if (spec.compensator_density != 0.0) {
        const double dens = -std::pow(lat.eps, -spec.k) * spec.compensator_density;
        std::int64_t m = std::max<std::int64_t>(1, std::llround(t / quad.step));
        double h = t / static_cast<double>(m);
        for (std::int64_t s = 0; s < lat.site_count(); ++s)
            for (std::int64_t i = 0; i < m; ++i)
                atoms.push_back(Atom{(i + 0.5) * h, s, dens * h});
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.t < b.t; });
    return atoms;
}

// atoms of the n-th diagonal measure on [0, t): eps^{nd} (Delta M)^n at jumps
std::vector<Atom> diagonal_atoms(const MartingalePathSet& path, int n, double t) {
    const auto& lat = path.lattice();
    const double w0 = std::pow(std::pow(lat.eps, lat.d), n);
    const double jump = path.spec().jump_size(lat.eps);
    std::vector<Atom> atoms;
    for (std::int64_t s = 0; s < lat.site_count(); ++s)
        for (const auto& e : path.events(s)) {
            if (e.time >= t) break;
            double dm = e.sign * jump;
            atoms.push_back(Atom{e.time, s, w0 * std::pow(dm, n)});
        }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.t < b.t; });
    return atoms;
}

// atoms of c^{n-2} eps^{(d+k)(n-1)} * (one-fold measure of the compensated
// bracket martingale) on [0, t)
std::vector<Atom> diamond_atoms(const MartingalePathSet& path, int n, double t,
                                const ChaosQuadrature& quad) {
    const auto& lat = path.lattice();
    const auto& spec = path.spec();
    const double scale = std::pow(spec.c, n - 2) *
                         std::pow(lat.eps, (lat.d + spec.k) * (n - 1));
    const double epsd = std::pow(lat.eps, lat.d);
    const double jump_bar = spec.c * spec.c * std::pow(lat.eps, spec.k); // jumps of the bracket martingale
    std::vector<Atom> atoms;
    for (std::int64_t s = 0; s < lat.site_count(); ++s)
        for (const auto& e : path.events(s)) {
            if (e.time >= t) break;
            atoms.push_back(Atom{e.time, s, scale * epsd * jump_bar});
        }
    const double dens = -scale * std::pow(lat.eps, -spec.k) * spec.bracket_density;
    if (dens != 0.0) {
        std::int64_t m = std::max<std::int64_t>(1, std::llround(t / quad.step));
        double h = t / static_cast<double>(m);
        for (std::int64_t s = 0; s < lat.site_count(); ++s)
            for (std::int64_t i = 0; i < m; ++i)
                atoms.push_back(Atom{(i + 0.5) * h, s, dens * h});
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.t < b.t; });
    return atoms;
}

// atoms of c^{n-2} eps^{(d+k)(n-2)} * bracket_density * (lattice-time measure)
std::vector<Atom> down_atoms(const MartingalePathSet& path, int n, double t,
                             const ChaosQuadrature& quad) {
    const auto& lat = path.lattice();
    const auto& spec = path.spec();
    const double scale = std::pow(spec.c, n - 2) *
                         std::pow(lat.eps, (lat.d + spec.k) * (n - 2));
    const double epsd = std::pow(lat.eps, lat.d);
    const double dens = scale * epsd * spec.bracket_density;
    std::vector<Atom> atoms;
    std::int64_t m = std::max<std::int64_t>(1, std::llround(t / quad.step));
    double h = t / static_cast<double>(m);
    for (std::int64_t s = 0; s < lat.site_count(); ++s)
        for (std::int64_t i = 0; i < m; ++i) atoms.push_back(Atom{(i + 0.5) * h, s, dens * h});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.t < b.t; });
    return atoms;
}

// nested sum over slots m-1 .. 0 with strictly decreasing time bound
double nested_sum(const std::vector<std::vector<Atom>>& lists, const GridFunction& f_contracted,
                  const LatticeSpec& lat, double t_upper) {
    const int m = static_cast<int>(lists.size());
    std::vector<Zpt> z(m);
    std::function<double(int, double)> rec = [&](int j, double bound) -> double {
        const auto& L = lists[j];
        double acc = 0.0;
        for (const auto& a : L) {
            if (a.t >= bound) break;
            z[j].t = a.t;
            z[j].x = lat.site_position(a.site);
            double inner = (j == 0) ? f_contracted(z) : rec(j - 1, a.t);
            acc += a.weight * inner;
        }
        return acc;
    };
    if (m == 0) return f_contracted(std::span<const Zpt>{});
    return rec(m - 1, t_upper);
}

std::int64_t list_ops(const std::vector<std::vector<Atom>>& lists) {
    std::int64_t ops = 1;
    for (const auto& L : lists) {
        if (L.empty()) return 0;
        if (ops > (std::int64_t(1) << 62) / static_cast<std::int64_t>(L.size())) return -1;
        ops *= static_cast<std::int64_t>(L.size());
    }
    return ops;
}

} // namespace

double product_integral(const GridFunction& f, const MartingalePathSet& path, int n, double t,
                        const ChaosQuadrature& quad) {
    if (f.arity != n) throw ConfigError("product_integral: arity mismatch");
    auto atoms = one_fold_atoms(path, t, quad);
    double ops = std::pow(static_cast<double>(atoms.size()), n);
    if (ops > static_cast<double>(quad.op_guard))
        throw GuardError("product_integral: |atoms|^n exceeds the operation guard; "
                         "use a smaller instance");
    const auto& lat = path.lattice();
    std::vector<Zpt> z(n);
    std::function<double(int)> rec = [&](int j) -> double {
        double acc = 0.0;
        for (const auto& a : atoms) {
            z[j].t = a.t;
            z[j].x = lat.site_position(a.site);
            double inner = (j + 1 == n) ? f(z) : rec(j + 1);
            acc += a.weight * inner;
        }
        return acc;
    };
    if (atoms.empty()) return 0.0;
    return rec(0);
}

double diagonal_integral(const GridFunction& f, const MartingalePathSet& path, int n, double t) {
    if (n < 2) throw ConfigError("diagonal_integral: need n >= 2");
    if (f.arity != 1) throw ConfigError("diagonal_integral: F must have arity 1");
    auto atoms = diagonal_atoms(path, n, t);
    const auto& lat = path.lattice();
    double acc = 0.0;
    Zpt z;
    for (const auto& a : atoms) {
        z.t = a.t;
        z.x = lat.site_position(a.site);
        acc += a.weight * f(std::span<const Zpt>{&z, 1});
    }
    return acc;
}

DiagonalSplit diagonal_decomposition(const GridFunction& f, const MartingalePathSet& path, int n,
                                     double t, const ChaosQuadrature& quad) {
    if (n < 2) throw ConfigError("diagonal_decomposition: need n >= 2");
    if (f.arity != 1) throw ConfigError("diagonal_decomposition: F must have arity 1");
    const auto& lat = path.lattice();
    const auto& spec = path.spec();
    const double epsd = std::pow(lat.eps, lat.d);
    Zpt z;

    // sum_x eps^d int_0^t F ds by the midpoint rule; shared by both parts so
    // the compensator contributions cancel exactly in the split identity
    double fquad = 0.0;
    {
        std::int64_t m = std::max<std::int64_t>(1, std::llround(t / quad.step));
        double h = t / static_cast<double>(m);
        for (std::int64_t s = 0; s < lat.site_count(); ++s) {
            z.x = lat.site_position(s);
            for (std::int64_t i = 0; i < m; ++i) {
                z.t = (i + 0.5) * h;
                fquad += f(std::span<const Zpt>{&z, 1});
            }
        }
        fquad *= epsd * h;
    }

    // signed jump sum of F against dM (odd) or the bracket-martingale jumps (even)
    auto jump_sum = [&](double per_jump, bool signed_sum) {
        double acc = 0.0;
        for (std::int64_t s = 0; s < lat.site_count(); ++s) {
            z.x = lat.site_position(s);
            for (const auto& e : path.events(s)) {
                if (e.time >= t) break;
                z.t = e.time;
                acc += f(std::span<const Zpt>{&z, 1}) * (signed_sum ? e.sign : 1) * per_jump;
            }
        }
        return acc;
    };

    DiagonalSplit out{0.0, 0.0};
    if (n % 2 == 1) {
        const double scale = std::pow(spec.c, n - 1) *
                             std::pow(lat.eps, (lat.d + spec.k) * (n - 1));
        const double lscale = std::pow(spec.c, n - 1) *
                              std::pow(lat.eps, (lat.d + spec.k) * (n - 2));
        double jsum = epsd * jump_sum(spec.jump_size(lat.eps), true);
        double comp = std::pow(lat.eps, -spec.k - lat.d) * spec.compensator_density * fquad;
        out.martingale_part = scale * (jsum - comp);
        out.lebesgue_part = lscale * spec.compensator_density * fquad;
    } else {
        const double scale = std::pow(spec.c, n - 2) *
                             std::pow(lat.eps, (lat.d + spec.k) * (n - 1));
        const double lscale = std::pow(spec.c, n - 2) *
                              std::pow(lat.eps, (lat.d + spec.k) * (n - 2));
        const double jump_bar = spec.c * spec.c * std::pow(lat.eps, spec.k);
        double jsum = epsd * jump_sum(jump_bar, false);
        double comp = std::pow(lat.eps, -spec.k - lat.d) * spec.bracket_density * fquad;
        out.martingale_part = scale * (jsum - comp);
        out.lebesgue_part = lscale * spec.bracket_density * fquad;
    }
    return out;
}

double iterated_integral(const Contraction& gamma, const Ordering& sigma, const GridFunction& f,
                         const MartingalePathSet& path, double t, const ChaosQuadrature& quad) {
    gamma.validate();
    if (gamma.m() > 6) throw GuardError("iterated_integral: more than 6 components");
    if (f.arity != gamma.n) throw ConfigError("iterated_integral: arity mismatch");
    auto fc = contracted_function(f, gamma, sigma);
    std::vector<std::vector<Atom>> lists(gamma.m());
    for (int j = 0; j < gamma.m(); ++j) {
        int nj = static_cast<int>(gamma.components[sigma.slot_to_component[j]].size());
        lists[j] = (nj == 1) ? one_fold_atoms(path, t, quad) : diagonal_atoms(path, nj, t);
    }
    std::int64_t ops = list_ops(lists);
    if (ops < 0 || ops > quad.op_guard)
        throw GuardError("iterated_integral: operation guard exceeded");
    return nested_sum(lists, fc, path.lattice(), t);
}

double renormalized_iterated_integral(const Contraction& gamma, const Ordering& sigma,
                                      const Labeling& lab, const GridFunction& f,
                                      const MartingalePathSet& path, double t,
                                      const ChaosQuadrature& quad) {
    gamma.validate();
    if (gamma.m() > 6) throw GuardError("renormalized_iterated_integral: more than 6 components");
    if (f.arity != gamma.n) throw ConfigError("renormalized_iterated_integral: arity mismatch");
    if (static_cast<int>(lab.labels.size()) != gamma.m())
        throw ConfigError("renormalized_iterated_integral: labeling size mismatch");
    for (int cidx = 0; cidx < gamma.m(); ++cidx) {
        bool odd = gamma.components[cidx].size() % 2 == 1;
        if (odd && lab.labels[cidx] != ComponentLabel::Nil)
            throw ConfigError("renormalized_iterated_integral: odd component must carry nil");
    }
    auto fc = contracted_function(f, gamma, sigma);
    std::vector<std::vector<Atom>> lists(gamma.m());
    for (int j = 0; j < gamma.m(); ++j) {
        int cidx = sigma.slot_to_component[j];
        int nj = static_cast<int>(gamma.components[cidx].size());
        switch (lab.labels[cidx]) {
        case ComponentLabel::Nil:
            lists[j] = (nj == 1) ? one_fold_atoms(path, t, quad) : diagonal_atoms(path, nj, t);
            break;
        case ComponentLabel::Down:
            lists[j] = down_atoms(path, nj, t, quad);
            break;
        case ComponentLabel::Diamond:
            lists[j] = diamond_atoms(path, nj, t, quad);
            break;
        }
    }
    std::int64_t ops = list_ops(lists);
    if (ops < 0 || ops > quad.op_guard)
        throw GuardError("renormalized_iterated_integral: operation guard exceeded");
    return nested_sum(lists, fc, path.lattice(), t);
}

double nested_norm(const GridFunction& f_m, const PFunction& p, const LatticeSpec& lattice,
                   double horizon, double quad_step) {
    const int m = f_m.arity;
    if (p.m() != m) throw ConfigError("nested_norm: p-function size mismatch");
    std::int64_t steps = std::max<std::int64_t>(1, std::llround(horizon / quad_step));
    const double h = horizon / static_cast<double>(steps);
    const double epsd = std::pow(lattice.eps, lattice.d);
    std::vector<Zpt> z(m);

    // level j integrates z_j over times < bound (the time of level j+1)
    std::function<double(int, double)> rec = [&](int j, double bound) -> double {
        const int pj = p.p[j];
        double acc = (pj == PFunction::Inf) ? 0.0 : 0.0;
        bool any = false;
        for (std::int64_t i = 0; i < steps; ++i) {
            double tj = (i + 0.5) * h;
            if (tj >= bound) break;
            for (std::int64_t s = 0; s < lattice.site_count(); ++s) {
                z[j].t = tj;
                z[j].x = lattice.site_position(s);
                double v = (j == 0) ? std::abs(f_m(z)) : rec(j - 1, tj);
                any = true;
                if (pj == PFunction::Inf)
                    acc = std::max(acc, v);
                else if (pj == 1)
                    acc += epsd * h * v;
                else
                    acc += epsd * h * v * v;
            }
        }
        if (!any) return 0.0;
        if (pj == 2) return std::sqrt(acc);
        return acc;
    };
    return rec(m - 1, horizon + 1.0);
}

std::vector<int> singleton_components(const Contraction& gamma) {
    std::vector<int> out;
    for (int j = 0; j < gamma.m(); ++j)
        if (gamma.components[j].size() == 1) out.push_back(j);
    return out;
}

double exponent_alpha(const Contraction& gamma, const PFunction& p, int d, double k) {
    if (p.m() != gamma.m()) throw ConfigError("exponent_alpha: p-function size mismatch");
    int total = 0;
    for (const auto& c : gamma.components) total += static_cast<int>(c.size());
    int n1 = 0, n2 = 0;
    for (int v : p.p) {
        if (v == 1) ++n1;
        if (v == 2) ++n2;
    }
    return (d + k) * (total - 2 * n1 - n2);
}

double exponent_beta(const Contraction& gamma, const PFunction& p, double moment_p) {
    if (p.m() != gamma.m()) throw ConfigError("exponent_beta: p-function size mismatch");
    auto g1 = singleton_components(gamma);
    double beta = 1.0;
    for (int j = 0; j < p.m(); ++j) {
        if (p.p[j] != PFunction::Inf) continue;
        bool in_g1 = std::find(g1.begin(), g1.end(), j) != g1.end();
        if (in_g1) continue;
        if (j + 1 >= 2) beta *= (moment_p - 1.0) / moment_p; // component index i >= 2, 1-based
    }
    return beta;
}

} // namespace martint
