#include "martint/noise.hpp"
#include "martint/rng.hpp"

#include <algorithm>
#include <cmath>

namespace martint {

MartingaleSpec MartingaleSpec::wiener_limit(double eps) {
    MartingaleSpec s;
    s.k = -0.5;
    s.c = 1.0 / std::sqrt(2.0);
    s.bracket_density = 1.0;
    s.compensator_density = 0.0;
    s.model = JumpModel::SymmetricPair;
    s.site_rate = 2.0 / (eps * eps); // d = 3: rate * c^2 * eps^{2k} = eps^{-3}
    return s;
}

MartingaleSpec MartingaleSpec::one_sided_unit(double eps, int d, double k, double bracket) {
    MartingaleSpec s;
    s.k = k;
    s.c = 1.0;
    s.bracket_density = bracket;
    s.compensator_density = bracket; // bracket / c with c = 1
    s.model = JumpModel::OneSidedCompensated;
    s.site_rate = bracket * std::pow(eps, -d - 2.0 * k);
    return s;
}

void MartingaleSpec::validate(const LatticeSpec& lattice) const {
    lattice.validate();
    if (!(c > 0.0)) throw ConfigError("martingale: c must be > 0");
    if (!(site_rate > 0.0)) throw ConfigError("martingale: site_rate must be > 0");
    if (!(k > -0.5 * lattice.d))
        throw ConfigError("martingale: need k > -d/2, got k=" + std::to_string(k));
    if (std::abs(bracket_density) > 1.0 + 1e-12)
        throw ConfigError("martingale: |bracket_density| must be <= 1");

    double lhs = site_rate * c * c * std::pow(lattice.eps, 2.0 * k);
    double rhs = bracket_density * std::pow(lattice.eps, -lattice.d);
    if (std::abs(lhs - rhs) > 1e-9 * std::max(std::abs(lhs), std::abs(rhs)))
        throw ConfigError("martingale: violated identity site_rate*c^2*eps^(2k) = "
                          "bracket_density*eps^(-d): " +
                          std::to_string(lhs) + " vs " + std::to_string(rhs));

    if (model == JumpModel::SymmetricPair) {
        if (compensator_density != 0.0)
            throw ConfigError("martingale: symmetric-pair model requires compensator_density = 0");
    } else {
        // c * compensator = bracket is forced by the martingale property of
        // J - eps^{-k-d} * compensator * t for one-sided jumps at site_rate
        double want = bracket_density / c;
        if (std::abs(compensator_density - want) > 1e-9 * std::max(1.0, std::abs(want)))
            throw ConfigError("martingale: one-sided model requires compensator_density = "
                              "bracket_density / c = " +
                              std::to_string(want) + ", got " +
                              std::to_string(compensator_density));
    }
}

MartingalePathSet::MartingalePathSet(LatticeSpec lattice, MartingaleSpec spec, std::uint64_t seed,
                                     std::vector<std::vector<JumpEvent>> events)
    : lattice_(lattice), spec_(spec), seed_(seed), per_site_(std::move(events)) {}

std::int64_t MartingalePathSet::total_events() const {
    std::int64_t n = 0;
    for (const auto& v : per_site_) n += static_cast<std::int64_t>(v.size());
    return n;
}

std::vector<JumpEvent> MartingalePathSet::all_events_sorted() const {
    std::vector<JumpEvent> all;
    all.reserve(total_events());
    for (const auto& v : per_site_) all.insert(all.end(), v.begin(), v.end());
    std::sort(all.begin(), all.end(),
              [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
    return all;
}

double MartingalePathSet::evaluate(double t, std::int64_t site) const {
    if (t < 0.0 || t > lattice_.horizon + 1e-12)
        throw DomainError("evaluate: t outside [0, horizon]");
    double jump = spec_.jump_size(lattice_.eps);
    double sum = 0.0;
    for (const auto& e : per_site_[site]) {
        if (e.time > t) break;
        sum += e.sign * jump;
    }
    double drift = std::pow(lattice_.eps, -spec_.k - lattice_.d) * spec_.compensator_density * t;
    return sum - drift;
}

double MartingalePathSet::realized_bracket(double t, std::int64_t site) const {
    if (t < 0.0 || t > lattice_.horizon + 1e-12)
        throw DomainError("realized_bracket: t outside [0, horizon]");
    double j2 = spec_.jump_size(lattice_.eps);
    j2 *= j2;
    std::int64_t n = 0;
    for (const auto& e : per_site_[site]) {
        if (e.time > t) break;
        ++n;
    }
    return j2 * static_cast<double>(n);
}

std::int64_t MartingalePathSet::jump_count(double a, double b, std::int64_t site) const {
    std::int64_t n = 0;
    for (const auto& e : per_site_[site]) {
        if (e.time > b) break;
        if (e.time >= a) ++n;
    }
    return n;
}

double MartingalePathSet::total_variation(double horizon, std::int64_t site) const {
    double jump = spec_.jump_size(lattice_.eps);
    double drift =
        std::pow(lattice_.eps, -spec_.k - lattice_.d) * std::abs(spec_.compensator_density);
    return jump * static_cast<double>(jump_count(0.0, horizon, site)) + drift * horizon;
}

MartingalePathSet MartingalePathSet::renormalized() const {
    MartingaleSpec r;
    r.k = spec_.k;
    r.c = spec_.c * spec_.c;
    r.bracket_density = spec_.c * spec_.c * spec_.bracket_density;
    r.compensator_density = spec_.bracket_density;
    r.model = JumpModel::OneSidedCompensated;
    r.site_rate = spec_.site_rate;
    std::vector<std::vector<JumpEvent>> ev = per_site_;
    for (auto& v : ev)
        for (auto& e : v) e.sign = 1;
    return MartingalePathSet(lattice_, r, seed_, std::move(ev));
}

MartingalePathSet sample_paths(const LatticeSpec& lattice, const MartingaleSpec& spec,
                               std::uint64_t seed) {
    spec.validate(lattice);
    const std::int64_t n_sites = lattice.site_count();
    const double T = lattice.horizon;
    std::vector<std::vector<JumpEvent>> events(n_sites);

    auto fill_stream = [&](std::int64_t site, std::uint64_t stream, double rate, std::int8_t sign,
                           std::vector<JumpEvent>& out) {
        if (rate <= 0.0) return;
        CounterRng rng(seed, static_cast<std::uint64_t>(site), stream);
        double t = rng.exponential(rate);
        while (t < T) {
            out.push_back(JumpEvent{t, static_cast<std::int32_t>(site), sign});
            t += rng.exponential(rate);
        }
    };

    for (std::int64_t s = 0; s < n_sites; ++s) {
        auto& v = events[s];
        if (spec.model == JumpModel::SymmetricPair) {
            fill_stream(s, 0, 0.5 * spec.site_rate, +1, v);
            fill_stream(s, 1, 0.5 * spec.site_rate, -1, v);
            std::sort(v.begin(), v.end(),
                      [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
        } else {
            fill_stream(s, 0, spec.site_rate, +1, v);
        }
    }
    return MartingalePathSet(lattice, spec, seed, std::move(events));
}

double predictable_bracket(const MartingaleSpec& spec, const LatticeSpec& lattice, double t) {
    if (t < 0.0 || t > lattice.horizon + 1e-12)
        throw DomainError("predictable_bracket: t outside [0, horizon]");
    return std::pow(lattice.eps, -lattice.d) * spec.bracket_density * t;
}

double MollifierProfile::normalization(int d) const {
    // radial quadrature of w(r) over the unit ball in R^d
    const int n = 4000;
    double h = 1.0 / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double r = (i + 0.5) * h;
        double surf = (d == 1) ? 2.0 : (d == 2 ? 2.0 * M_PI * r : 4.0 * M_PI * r * r);
        acc += (*this)(r)*surf * h;
    }
    return acc;
}

SmoothedField::SmoothedField(const MartingalePathSet& path, const SmoothedFieldSpec& spec)
    : path_(path) {
    const auto& lat = path.lattice();
    const double eps = lat.eps;
    const double e = spec.scale(eps);
    if (!(e >= eps - 1e-12 && e <= 1.0))
        throw ConfigError("smoothing: need eps <= eps^alpha <= 1");
    if (e > 0.5) throw ConfigError("smoothing: mollifier support exceeds torus half-width");

    const int reach = static_cast<int>(std::floor(e / eps)) + 1;
    const int n = lat.side();
    const double norm = spec.psi.normalization(lat.d);
    const double epsd = std::pow(eps, lat.d);

    // collect lattice offsets within the support ball and their weights
    std::vector<std::array<int, 3>> offs;
    std::vector<double> w;
    std::array<int, 3> c{0, 0, 0};
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int i = 0; i < lat.d; ++i) { lo[i] = -reach; hi[i] = reach; }
    for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0])
        for (c[1] = lo[1]; c[1] <= hi[1]; ++c[1])
            for (c[2] = lo[2]; c[2] <= hi[2]; ++c[2]) {
                double r = 0.0;
                for (int i = 0; i < lat.d; ++i) r += (c[i] * eps) * (c[i] * eps);
                r = std::sqrt(r);
                double val = spec.psi(r / e) / (norm * std::pow(e, lat.d));
                if (val > 0.0) {
                    offs.push_back(c);
                    w.push_back(epsd * val);
                }
            }
    double mass = 0.0;
    for (double x : w) mass += x;
    raw_mass_defect_ = std::abs(mass - 1.0);
    // exact discrete unit mass so pairings keep closed-form brackets
    for (double& x : w) x /= mass;

    weights_ = std::move(w);
    site_neighbors_.resize(lat.site_count());
    for (std::int64_t s = 0; s < lat.site_count(); ++s) {
        auto base = lat.site_coords(s);
        auto& nb = site_neighbors_[s];
        nb.reserve(offs.size());
        for (const auto& o : offs) {
            std::array<int, 3> q{0, 0, 0};
            for (int i = 0; i < lat.d; ++i) q[i] = (((base[i] + o[i]) % n) + n) % n;
            nb.push_back(lat.site_index(q));
        }
    }
    (void)n;
}

double SmoothedField::operator()(double t, std::int64_t site) const {
    const auto& nb = site_neighbors_[site];
    double acc = 0.0;
    for (std::size_t i = 0; i < nb.size(); ++i) acc += weights_[i] * path_.evaluate(t, nb[i]);
    return acc;
}

double pair_with_test(const MartingalePathSet& path, const PairTestFunction& phi, double t,
                      double quad_step) {
    const auto& lat = path.lattice();
    if (phi.t_lo < 0.0 || phi.t_hi > lat.horizon + 1e-12)
        throw DomainError("pair_with_test: test function support escapes [0, horizon]");
    const double epsd = std::pow(lat.eps, lat.d);
    const double jump = path.spec().jump_size(lat.eps);

    double acc = 0.0;
    for (std::int64_t s = 0; s < lat.site_count(); ++s) {
        Vec3 x = lat.site_position(s);
        for (const auto& e : path.events(s)) {
            if (e.time > t) break;
            acc += phi.eval(e.time, x) * e.sign * jump;
        }
    }
    acc *= epsd;

    if (path.spec().compensator_density != 0.0) {
        const double drift = std::pow(lat.eps, -path.spec().k) * path.spec().compensator_density;
        double t_hi = std::min(t, phi.t_hi);
        double t_lo = std::max(0.0, phi.t_lo);
        if (t_hi > t_lo) {
            std::int64_t m = std::max<std::int64_t>(1, std::llround((t_hi - t_lo) / quad_step));
            double h = (t_hi - t_lo) / static_cast<double>(m);
            double q = 0.0;
            for (std::int64_t s = 0; s < lat.site_count(); ++s) {
                Vec3 x = lat.site_position(s);
                for (std::int64_t i = 0; i < m; ++i) q += phi.eval(t_lo + (i + 0.5) * h, x);
            }
            acc -= drift * q * h; // eps^d * eps^{-k-d} = eps^{-k} per site
        }
    }
    return acc;
}

} // namespace martint
