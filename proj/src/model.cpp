#include "martint/model.hpp"
#include "martint/rng.hpp"

#include <algorithm>
#include <cmath>

namespace martint {

SymbolTag symbol_from_name(const std::string& name) {
    if (name == "Xi") return SymbolTag::Xi;
    if (name == "Psi") return SymbolTag::Psi;
    if (name == "Psi2") return SymbolTag::Psi2;
    if (name == "IPsi3Psi2") return SymbolTag::IPsi3Psi2;
    throw ConfigError("unknown symbol '" + name + "'");
}

std::string symbol_name(SymbolTag tag) {
    switch (tag) {
    case SymbolTag::Xi: return "Xi";
    case SymbolTag::Psi: return "Psi";
    case SymbolTag::Psi2: return "Psi2";
    case SymbolTag::IPsi3Psi2: return "IPsi3Psi2";
    }
    return "?";
}

namespace {
double bump(double u, double sharp) {
    double u2 = u * u;
    if (u2 >= 1.0) return 0.0;
    return std::exp(-sharp * u2 / (1.0 - u2));
}
} // namespace

double TestProfile::eval_raw(double t, double r) const {
    return bump(t / time_halfwidth, sharp_t) * bump(r / space_radius, sharp_x);
}

double TestProfile::mass() const {
    const int n = 800;
    double mt = 0.0, ht = 2.0 * time_halfwidth / n;
    for (int i = 0; i < n; ++i) mt += bump((-time_halfwidth + (i + 0.5) * ht) / time_halfwidth, sharp_t) * ht;
    double mx = 0.0, hr = space_radius / n;
    for (int i = 0; i < n; ++i) {
        double r = (i + 0.5) * hr;
        mx += 4.0 * M_PI * r * r * bump(r / space_radius, sharp_x) * hr;
    }
    return mt * mx;
}

ScaledTestFunction ScaledTestFunction::make(const TestProfile& p, double lambda,
                                            const Zpt& center) {
    ScaledTestFunction f;
    f.profile = p;
    f.lambda = lambda;
    f.center = center;
    f.inv_mass = 1.0 / p.mass();
    return f;
}

double ScaledTestFunction::operator()(double t, const Vec3& x, const LatticeSpec& lat) const {
    double ut = (t - center.t) / (lambda * lambda);
    Vec3 d = lat.torus_diff(x, center.x);
    double r = euclid_norm(d) / lambda;
    double v = profile.eval_raw(ut, r);
    if (v == 0.0) return 0.0;
    return v * inv_mass * std::pow(lambda, -5.0);
}

ExtendedNoise::ExtendedNoise(const LatticeSpec& lattice, const MartingaleSpec& spec,
                             std::uint64_t seed, double t_neg, double t_pos)
    : lattice_(lattice), spec_(spec), t_neg_(t_neg), t_pos_(t_pos) {
    LatticeSpec pos_l = lattice, neg_l = lattice;
    pos_l.horizon = t_pos;
    neg_l.horizon = t_neg;
    auto pos = sample_paths(pos_l, spec, seed);
    auto neg = sample_paths(neg_l, spec, mix64(seed ^ 0x5d1f00d5u));
    atoms_.reserve(pos.total_events() + neg.total_events());
    for (std::int64_t s = 0; s < lattice.site_count(); ++s) {
        for (const auto& e : pos.events(s))
            atoms_.push_back(Atom{e.time, e.site, static_cast<float>(e.sign)});
        for (const auto& e : neg.events(s))
            atoms_.push_back(Atom{-e.time, e.site, static_cast<float>(e.sign)});
    }
    std::sort(atoms_.begin(), atoms_.end(),
              [](const Atom& a, const Atom& b) { return a.t < b.t; });
}

// ---- ModelContext --------------------------------------------------------------

ModelContext::ModelContext(const ModelParams& p) : p_(p) {
    p_.lattice.validate();
    if (p_.lattice.d != 3) throw ConfigError("model: the symbol maps are built for d = 3");
    dt_ = p_.time_step > 0.0 ? p_.time_step : p_.lattice.eps * p_.lattice.eps;
    side_ = p_.lattice.side();

    kc_ = std::make_unique<SingularKernel>(p_.eh, CutoffSpec{0.5, 1.0}, p_.kernel_params);
    k_eps_ = std::make_unique<LatticeKernel>(
        LatticeKernel::sample(kc_->view(p_.lattice.eps), p_.lattice.eps, dt_));
    k_eh_ = std::make_unique<LatticeKernel>(discrete_convolve(*k_eps_, p_.psi, p_.eh));
    c1_ = renorm_constant_c1_exact(*k_eh_);
    if (p_.with_chain_constant) {
        auto r = renorm_constant_c2(*k_eh_, p_.c2_time_stride);
        c2_ = r.value;
        c2_err_ = r.error_estimate;
    }
    fk_eh_ = periodize_and_transform(*k_eh_, false, &per_eh_);
    fk_eps_ = periodize_and_transform(*k_eps_, false, nullptr);
    fk_eh_sq_ = periodize_and_transform(*k_eh_, true, nullptr);
}

ModelContext::FourierKernel ModelContext::periodize_and_transform(
    const LatticeKernel& k, bool square, std::vector<std::vector<double>>* keep_real) {
    FourierKernel fk;
    fk.j_lo = static_cast<int>(std::lround(k.t0() / dt_));
    const std::int64_t n = sites();
    fk.slices.resize(k.nt());
    if (keep_real) keep_real->assign(k.nt(), std::vector<double>(n, 0.0));
    const int R = k.reach();
    for (int it = 0; it < k.nt(); ++it) {
        std::vector<double> f(n, 0.0);
        for (int ox = -R; ox <= R; ++ox)
            for (int oy = -R; oy <= R; ++oy)
                for (int oz = -R; oz <= R; ++oz) {
                    double v = k.at(it, ox, oy, oz);
                    if (v == 0.0) continue;
                    if (square) v *= v;
                    int cx = ((ox % side_) + side_) % side_;
                    int cy = ((oy % side_) + side_) % side_;
                    int cz = ((oz % side_) + side_) % side_;
                    f[(static_cast<std::size_t>(cz) * side_ + cy) * side_ + cx] += v;
                }
        if (keep_real) (*keep_real)[it] = f;
        fk.slices[it] = dft3_forward_real(f, side_);
    }
    return fk;
}

double ModelContext::periodized_eh(int time_node, std::int64_t site_offset) const {
    int j = time_node - fk_eh_.j_lo;
    if (j < 0 || j >= static_cast<int>(per_eh_.size())) return 0.0;
    return per_eh_[j][site_offset];
}

double psi_field_direct(const ModelContext& ctx, const ExtendedNoise& noise, const Zpt& zbar) {
    const auto& lat = ctx.lattice();
    const auto& k = ctx.kernel_eh();
    const int side = ctx.side();
    const double eps = lat.eps;
    const double w0 = std::pow(eps, 3) * noise.spec().jump_size(eps);
    auto zc = lat.site_coords(lat.site_index({static_cast<int>(std::lround(zbar.x[0] / eps)),
                                              static_cast<int>(std::lround(zbar.x[1] / eps)),
                                              static_cast<int>(std::lround(zbar.x[2] / eps))}));
    double acc = 0.0;
    const int mspan = k.reach() / side + 1;
    for (const auto& a : noise.atoms()) {
        double tau = zbar.t - a.t;
        auto ac = lat.site_coords(a.site);
        int d0 = zc[0] - ac[0], d1 = zc[1] - ac[1], d2 = zc[2] - ac[2];
        double sum = 0.0;
        for (int mx = -mspan; mx <= mspan; ++mx)
            for (int my = -mspan; my <= mspan; ++my)
                for (int mz = -mspan; mz <= mspan; ++mz)
                    sum += k.value(tau, d0 + mx * side, d1 + my * side, d2 + mz * side);
        acc += sum * a.sign;
    }
    return acc * w0;
}

// ---- SymbolEvaluator -------------------------------------------------------------

SymbolEvaluator::SymbolEvaluator(const ModelContext& ctx, const ScaledTestFunction& phi)
    : ctx_(ctx), phi_(phi) {
    const auto& lat = ctx.lattice();
    const double dt = ctx.dt();
    q_lo_ = static_cast<int>(std::ceil(phi.t_lo() / dt));
    q_hi_ = static_cast<int>(std::floor(phi.t_hi() / dt));
    if (q_hi_ < q_lo_) throw ConfigError("test function support narrower than the time grid");

    const std::int64_t n = ctx.sites();
    phi_slices_.assign(static_cast<std::size_t>(q_hi_ - q_lo_ + 1) * n, 0.0);
    for (int q = q_lo_; q <= q_hi_; ++q)
        for (std::int64_t s = 0; s < n; ++s)
            phi_slices_[static_cast<std::size_t>(q - q_lo_) * n + s] =
                phi(q * dt, lat.site_position(s), lat);

    moll_weights_ = lattice_mollifier_weights(lat.eps, ctx.params().eh, ctx.params().psi);

    // G(tau_j, y) = eps^3 dt sum_q sum_x phi(t_q, x) K_per(t_q - tau_j, x - y)
    const auto& fk = ctx.fk_eh();
    g_lo_ = q_lo_ - fk.j_hi();
    const int g_hi = q_hi_ - fk.j_lo;
    std::vector<std::vector<cplx>> phi_hat(q_hi_ - q_lo_ + 1);
    for (int q = q_lo_; q <= q_hi_; ++q) {
        std::vector<double> f(phi_slices_.begin() + static_cast<std::size_t>(q - q_lo_) * n,
                              phi_slices_.begin() + static_cast<std::size_t>(q - q_lo_ + 1) * n);
        phi_hat[q - q_lo_] = dft3_forward_real(f, ctx.side());
    }
    const double scale = std::pow(lat.eps, 3) * dt / static_cast<double>(n);
    g_psi_.assign(g_hi - g_lo_ + 1, {});
    for (int j = g_lo_; j <= g_hi; ++j) {
        std::vector<cplx> acc(n, cplx(0, 0));
        bool any = false;
        for (int q = q_lo_; q <= q_hi_; ++q) {
            int off = q - j;
            if (off < fk.j_lo || off > fk.j_hi()) continue;
            const auto& ks = fk.slices[off - fk.j_lo];
            const auto& ph = phi_hat[q - q_lo_];
            for (std::int64_t s = 0; s < n; ++s) acc[s] += ph[s] * std::conj(ks[s]);
            any = true;
        }
        auto& out = g_psi_[j - g_lo_];
        out.assign(n, 0.0);
        if (any) {
            dft3(acc, ctx.side(), true);
            for (std::int64_t s = 0; s < n; ++s) out[s] = acc[s].real() * scale;
        }
    }
}

double SymbolEvaluator::quadrature_pair(const std::vector<double>& vals) const {
    const std::int64_t n = ctx_.sites();
    double acc = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) acc += vals[i] * phi_slices_[i];
    return acc * std::pow(ctx_.lattice().eps, 3) * ctx_.dt();
}

double SymbolEvaluator::pair_xi(const ExtendedNoise& noise) const {
    const auto& lat = ctx_.lattice();
    const int side = ctx_.side();
    const double w0 = std::pow(lat.eps, 3) * noise.spec().jump_size(lat.eps);
    const double t_lo = phi_.t_lo(), t_hi = phi_.t_hi();
    double acc = 0.0;
    for (const auto& a : noise.atoms()) {
        if (a.t < t_lo) continue;
        if (a.t > t_hi) break;
        auto c = lat.site_coords(a.site);
        double g = 0.0;
        for (const auto& [off, w] : moll_weights_) {
            std::array<int, 3> q{(((c[0] - off[0]) % side) + side) % side,
                                 (((c[1] - off[1]) % side) + side) % side,
                                 (((c[2] - off[2]) % side) + side) % side};
            Vec3 x{q[0] * lat.eps, q[1] * lat.eps, q[2] * lat.eps};
            g += w * phi_(a.t, x, lat);
        }
        acc += g * a.sign;
    }
    return acc * w0;
}

double SymbolEvaluator::pair_psi(const ExtendedNoise& noise) const {
    const auto& lat = ctx_.lattice();
    const double dt = ctx_.dt();
    const double w0 = std::pow(lat.eps, 3) * noise.spec().jump_size(lat.eps);
    const std::int64_t n = ctx_.sites();
    const int g_hi = g_lo_ + static_cast<int>(g_psi_.size()) - 1;
    double acc = 0.0;
    for (const auto& a : noise.atoms()) {
        double u = a.t / dt - g_lo_;
        if (u <= 0.0 || u >= static_cast<double>(g_hi - g_lo_)) continue;
        int i = static_cast<int>(u);
        double f = u - i;
        const double* lo = g_psi_[i].data();
        const double* hi = g_psi_[i + 1].data();
        (void)n;
        acc += ((1.0 - f) * lo[a.site] + f * hi[a.site]) * a.sign;
    }
    return acc * w0;
}

void SymbolEvaluator::tabulate(const ExtendedNoise& noise, const ModelContext::FourierKernel& fk,
                               int out_lo, int out_hi, std::vector<std::vector<double>>& out,
                               bool signed_atoms) const {
    const double dt = ctx_.dt();
    const std::int64_t n = ctx_.sites();
    const int side = ctx_.side();
    const int b_lo = out_lo - fk.j_hi() - 1;
    const int b_hi = out_hi - fk.j_lo + 1;
    const int nb = b_hi - b_lo + 1;

    // linear split of each atom onto the two neighboring grid nodes
    std::vector<std::vector<double>> bins(nb);
    for (const auto& a : noise.atoms()) {
        double u = a.t / dt;
        int b = static_cast<int>(std::floor(u));
        double f = u - b;
        double s = signed_atoms ? a.sign : 1.0;
        if (b >= b_lo && b <= b_hi) {
            auto& v = bins[b - b_lo];
            if (v.empty()) v.assign(n, 0.0);
            v[a.site] += (1.0 - f) * s;
        }
        if (b + 1 >= b_lo && b + 1 <= b_hi) {
            auto& v = bins[b + 1 - b_lo];
            if (v.empty()) v.assign(n, 0.0);
            v[a.site] += f * s;
        }
    }
    std::vector<std::vector<cplx>> bins_hat(nb);
    for (int b = 0; b < nb; ++b)
        if (!bins[b].empty()) bins_hat[b] = dft3_forward_real(bins[b], side);

    const double scale =
        std::pow(ctx_.lattice().eps, 3) * noise.spec().jump_size(ctx_.lattice().eps) /
        static_cast<double>(n);
    out.assign(out_hi - out_lo + 1, {});
    std::vector<cplx> acc(n);
    for (int q = out_lo; q <= out_hi; ++q) {
        std::fill(acc.begin(), acc.end(), cplx(0, 0));
        bool any = false;
        for (int j = fk.j_lo; j <= fk.j_hi(); ++j) {
            int b = q - j;
            if (b < b_lo || b > b_hi) continue;
            const auto& bh = bins_hat[b - b_lo];
            if (bh.empty()) continue;
            const auto& ks = fk.slices[j - fk.j_lo];
            for (std::int64_t s = 0; s < n; ++s) acc[s] += ks[s] * bh[s];
            any = true;
        }
        auto& slice = out[q - out_lo];
        slice.assign(n, 0.0);
        if (any) {
            dft3(acc, side, true);
            for (std::int64_t s = 0; s < n; ++s) slice[s] = acc[s].real() * scale;
        }
    }
}

double SymbolEvaluator::pair_psi2(const ExtendedNoise& noise, bool renormalized) const {
    std::vector<std::vector<double>> psi;
    tabulate(noise, ctx_.fk_eh(), q_lo_, q_hi_, psi);
    const std::int64_t n = ctx_.sites();
    std::vector<double> vals(static_cast<std::size_t>(q_hi_ - q_lo_ + 1) * n);
    const double c1 = renormalized ? ctx_.c1() : 0.0;
    for (int q = 0; q <= q_hi_ - q_lo_; ++q)
        for (std::int64_t s = 0; s < n; ++s) {
            double v = psi[q][s];
            vals[static_cast<std::size_t>(q) * n + s] = v * v - c1;
        }
    return quadrature_pair(vals);
}

double SymbolEvaluator::pair_cherry(const ExtendedNoise& noise) const {
    // compensated pure-diagonal part of Psi^2: the squared kernel integrated
    // against the bracket martingale of M
    std::vector<std::vector<double>> diag;
    tabulate(noise, ctx_.fk_eh_sq(), q_lo_, q_hi_, diag, /*signed_atoms=*/false);
    // tabulate() weights each atom by eps^3 c eps^k; the diamond measure at
    // n=2 carries eps^{d+k} * eps^3 * c^2 eps^k per jump
    const auto& lat = ctx_.lattice();
    const auto& spec = noise.spec();
    const double extra = spec.c * std::pow(lat.eps, lat.d + spec.k);
    // centering constant matched to the node-sampled squared kernel so the
    // field has mean zero under its own discretization
    const double center = spec.bracket_density * ctx_.kernel_eh().node_squared_mass();
    const std::int64_t n = ctx_.sites();
    std::vector<double> vals(static_cast<std::size_t>(q_hi_ - q_lo_ + 1) * n);
    for (int q = 0; q <= q_hi_ - q_lo_; ++q)
        for (std::int64_t s = 0; s < n; ++s)
            vals[static_cast<std::size_t>(q) * n + s] = diag[q][s] * extra - center;
    return quadrature_pair(vals);
}

double SymbolEvaluator::pair_ipsi3psi2(const ExtendedNoise& noise) const {
    const auto& lat = ctx_.lattice();
    const double dt = ctx_.dt();
    const std::int64_t n = ctx_.sites();
    const auto& fke = ctx_.fk_eps();

    const int w_lo = q_lo_ - fke.j_hi();
    const int w_hi = q_hi_ - fke.j_lo;
    std::vector<std::vector<double>> psi;
    tabulate(noise, ctx_.fk_eh(), w_lo, q_hi_, psi);
    auto psi_at = [&](int q) -> const std::vector<double>& { return psi[q - w_lo]; };

    // W = Psi^3 and its transform
    std::vector<std::vector<cplx>> w_hat(w_hi - w_lo + 1);
    for (int q = w_lo; q <= w_hi; ++q) {
        std::vector<double> w(n);
        const auto& p = psi_at(q);
        for (std::int64_t s = 0; s < n; ++s) w[s] = p[s] * p[s] * p[s];
        w_hat[q - w_lo] = dft3_forward_real(w, ctx_.side());
    }

    // U = K^eps conv W on the phi slices, lattice-time measure
    const double uscale = std::pow(lat.eps, 3) * dt / static_cast<double>(n);
    std::vector<std::vector<double>> u(q_hi_ - q_lo_ + 1);
    std::vector<cplx> acc(n);
    for (int q = q_lo_; q <= q_hi_; ++q) {
        std::fill(acc.begin(), acc.end(), cplx(0, 0));
        for (int j = fke.j_lo; j <= fke.j_hi(); ++j) {
            int b = q - j;
            if (b < w_lo || b > w_hi) continue;
            const auto& ks = fke.slices[j - fke.j_lo];
            const auto& wh = w_hat[b - w_lo];
            for (std::int64_t s = 0; s < n; ++s) acc[s] += ks[s] * wh[s];
        }
        dft3(acc, ctx_.side(), true);
        u[q - q_lo_].assign(n, 0.0);
        for (std::int64_t s = 0; s < n; ++s) u[q - q_lo_][s] = acc[s].real() * uscale;
    }

    // U at the base point z (center of phi)
    const int qc = static_cast<int>(std::lround(phi_.center.t / dt));
    std::int64_t sc = lat.site_index({static_cast<int>(std::lround(phi_.center.x[0] / lat.eps)),
                                      static_cast<int>(std::lround(phi_.center.x[1] / lat.eps)),
                                      static_cast<int>(std::lround(phi_.center.x[2] / lat.eps))});
    if (qc < q_lo_ || qc > q_hi_)
        throw ConfigError("pair_ipsi3psi2: the base point must lie on a phi slice");
    const double u_z = u[qc - q_lo_][sc];

    std::vector<double> vals(static_cast<std::size_t>(q_hi_ - q_lo_ + 1) * n);
    const double c2 = ctx_.c2();
    for (int q = q_lo_; q <= q_hi_; ++q) {
        const auto& p = psi_at(q);
        const auto& uq = u[q - q_lo_];
        for (std::int64_t s = 0; s < n; ++s)
            vals[static_cast<std::size_t>(q - q_lo_) * n + s] =
                p[s] * p[s] * (uq[s] - u_z) - 3.0 * c2 * p[s];
    }
    return quadrature_pair(vals);
}

double SymbolEvaluator::pair(SymbolTag tag, const ExtendedNoise& noise) const {
    switch (tag) {
    case SymbolTag::Xi: return pair_xi(noise);
    case SymbolTag::Psi: return pair_psi(noise);
    case SymbolTag::Psi2: return pair_psi2(noise);
    case SymbolTag::IPsi3Psi2: return pair_ipsi3psi2(noise);
    }
    return 0.0;
}

double SymbolEvaluator::exact_second_moment_xi() const {
    const auto& lat = ctx_.lattice();
    const int side = ctx_.side();
    const double dt = ctx_.dt();
    // C eps^3 sum_site int g(t, site)^2 dt with g the mollified test function
    const int sub = 4;
    const double h = dt / sub;
    double acc = 0.0;
    for (int q = q_lo_ * sub; q <= q_hi_ * sub; ++q) {
        double t = q * h;
        for (std::int64_t s = 0; s < ctx_.sites(); ++s) {
            auto c = lat.site_coords(s);
            double g = 0.0;
            for (const auto& [off, w] : moll_weights_) {
                std::array<int, 3> qq{(((c[0] - off[0]) % side) + side) % side,
                                      (((c[1] - off[1]) % side) + side) % side,
                                      (((c[2] - off[2]) % side) + side) % side};
                Vec3 x{qq[0] * lat.eps, qq[1] * lat.eps, qq[2] * lat.eps};
                g += w * phi_(t, x, lat);
            }
            acc += g * g;
        }
    }
    return ctx_.params().spec.bracket_density * std::pow(lat.eps, 3) * acc * h;
}

double SymbolEvaluator::exact_second_moment_psi() const {
    // C eps^3 sum_site int G(t, site)^2 dt, exact on the linear interpolant
    const auto& lat = ctx_.lattice();
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < g_psi_.size(); ++j)
        for (std::int64_t s = 0; s < ctx_.sites(); ++s) {
            double a = g_psi_[j][s], b = g_psi_[j + 1][s];
            acc += (a * a + a * b + b * b) / 3.0;
        }
    return ctx_.params().spec.bracket_density * std::pow(lat.eps, 3) * acc * ctx_.dt();
}

double SymbolEvaluator::t_neg_required(SymbolTag tag) const {
    const double dt = ctx_.dt();
    const auto& fke = ctx_.fk_eps();
    const auto& fkh = ctx_.fk_eh();
    double lo = q_lo_ * dt;
    switch (tag) {
    case SymbolTag::Xi: break;
    case SymbolTag::Psi:
    case SymbolTag::Psi2: lo = (q_lo_ - fkh.j_hi()) * dt; break;
    case SymbolTag::IPsi3Psi2: lo = (q_lo_ - fke.j_hi() - fkh.j_hi()) * dt; break;
    }
    return std::max(0.0, -lo) + 2.0 * dt;
}

double SymbolEvaluator::t_pos_required(SymbolTag tag) const {
    const double dt = ctx_.dt();
    const auto& fke = ctx_.fk_eps();
    const auto& fkh = ctx_.fk_eh();
    double hi = q_hi_ * dt;
    switch (tag) {
    case SymbolTag::Xi: break;
    case SymbolTag::Psi:
    case SymbolTag::Psi2: hi = (q_hi_ - fkh.j_lo) * dt; break;
    case SymbolTag::IPsi3Psi2: hi = (q_hi_ - fke.j_lo - fkh.j_lo) * dt; break;
    }
    return std::max(hi, 0.0) + 2.0 * dt;
}

} // namespace martint
