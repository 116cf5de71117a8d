#include "martint/kernels.hpp"
#include "martint/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace martint {

int multiindex_weight(std::span<const int> k) {
    if (k.empty()) return 0;
    int w = 2 * k[0];
    for (std::size_t i = 1; i < k.size(); ++i) w += k[i];
    return w;
}

double heat_kernel(double t, const Vec3& x) {
    if (t <= 0.0) return 0.0;
    double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    return std::pow(4.0 * M_PI * t, -1.5) * std::exp(-r2 / (4.0 * t));
}

namespace {
double expstep(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }
} // namespace

double CutoffSpec::operator()(double r) const {
    if (r <= plateau) return 1.0;
    if (r >= support) return 0.0;
    double u = (support - r) / (support - plateau);
    return expstep(u) / (expstep(u) + expstep(1.0 - u));
}

void CutoffSpec::validate() const {
    if (!(plateau > 0.0 && support > plateau))
        throw ConfigError("cutoff: need 0 < plateau < support");
}

// ---- smoothed heat kernel -----------------------------------------------------

namespace {

// radial bump on [0,1), sharpness fixed per build params
struct RadialBump {
    double sharp;
    double operator()(double u) const {
        if (u >= 1.0) return 0.0;
        double u2 = u * u;
        return std::exp(-sharp * u2 / (1.0 - u2));
    }
};

// (G_sigma * f)(l) for radial f supported in [0, R], Gaussian with variance
// sigma^2 per axis in R^3
double gauss_radial_convolve(const std::function<double(double)>& f, double R, double sigma,
                             double l, int nodes) {
    if (sigma <= 0.0) return l <= R ? f(l) : 0.0;
    const double s2 = sigma * sigma;
    auto term = [&](double rho) {
        // rho * f(rho) * exp(-(l-rho)^2/(2s2)) * (1 - exp(-2 l rho / s2)) / l
        // with the sinh form stabilized for small l
        double a = std::exp(-(l - rho) * (l - rho) / (2.0 * s2));
        double x = 2.0 * l * rho / s2;
        double fac;
        if (x < 1e-8)
            fac = rho * (2.0 * rho / s2) * (1.0 + x * x / 24.0); // -expm1(-x)/l ~ 2rho/s2
        else
            fac = rho * (-std::expm1(-x)) / l;
        return f(rho) * a * fac;
    };
    double acc = 0.0;
    if (sigma > 3.0 * R / nodes) {
        double h = R / nodes;
        for (int i = 0; i < nodes; ++i) acc += term((i + 0.5) * h) * h;
    } else {
        // integrand lives in a sigma-window around l
        double lo = std::max(0.0, l - 8.0 * sigma), hi = std::min(R, l + 8.0 * sigma);
        if (hi <= lo) return 0.0;
        double h = (hi - lo) / nodes;
        for (int i = 0; i < nodes; ++i) acc += term(lo + (i + 0.5) * h) * h;
    }
    return acc / (sigma * std::sqrt(2.0 * M_PI));
}

} // namespace

SmoothedHeatKernel::SmoothedHeatKernel(double eh, const KernelBuildParams& params) : eh_(eh) {
    const double at = 0.7, ax = 0.7; // product bump fits in the unit space-time ball
    const double sharp = params.mollifier_sharpness;
    RadialBump bump{sharp};

    // space mollifier beta(x) supported |x| <= ax*eh, unit mass in R^3
    const double Rx = ax * eh;
    double beta_norm = 0.0;
    {
        const int n = 2000;
        double h = Rx / n;
        for (int i = 0; i < n; ++i) {
            double rho = (i + 0.5) * h;
            beta_norm += 4.0 * M_PI * rho * rho * bump(rho / Rx) * h;
        }
    }
    auto beta = [&, beta_norm](double rho) { return bump(rho / Rx) / beta_norm; };

    // time mollifier eta(s) supported |s| <= at*eh^2, unit mass
    const double Rt = at * eh * eh;
    double eta_norm = 0.0;
    {
        const int n = 2000;
        double h = 2.0 * Rt / n;
        for (int i = 0; i < n; ++i) eta_norm += bump(std::abs(-Rt + (i + 0.5) * h) / Rt) * h;
    }

    // table over u = sqrt(t + t_neg) and r = |x|
    const double t_neg = Rt * 1.02;
    const double t_max = 1.05;
    const double hu = (params.radial_step > 0.0 ? params.radial_step : eh / 16.0);
    const double hr = hu;
    t0_ = -t_neg;
    ht_ = hu;
    hr_ = hr;
    nt_ = static_cast<int>(std::ceil(std::sqrt(t_max + t_neg) / hu)) + 2;
    nr_ = static_cast<int>(std::ceil(1.1 / hr)) + 2;
    table_.assign(static_cast<std::size_t>(nt_) * nr_, 0.0);

    const int qn = params.quad_nodes;
    const double hs = 2.0 * Rt / qn;
    for (int it = 0; it < nt_; ++it) {
        double u = it * hu;
        double t = u * u - t_neg;
        for (int ir = 0; ir < nr_; ++ir) {
            double l = ir * hr;
            double acc = 0.0;
            for (int is = 0; is < qn; ++is) {
                double s = -Rt + (is + 0.5) * hs;
                double w = bump(std::abs(s) / Rt) / eta_norm * hs;
                double tau = t - s;
                if (tau <= 0.0) continue;
                // P(tau, .) is the centered Gaussian with sigma^2 = 2 tau per axis
                double b = gauss_radial_convolve(beta, Rx, std::sqrt(2.0 * tau), l, 48);
                acc += w * b;
            }
            table_[static_cast<std::size_t>(it) * nr_ + ir] = acc;
        }
    }
}

double SmoothedHeatKernel::value(double t, double r) const {
    double arg = t - t0_;
    if (arg <= 0.0) return 0.0;
    double u = std::sqrt(arg) / ht_;
    double v = r / hr_;
    int iu = static_cast<int>(u), iv = static_cast<int>(v);
    if (iu >= nt_ - 1 || iv >= nr_ - 1) return 0.0;
    double fu = u - iu, fv = v - iv;
    auto at = [&](int a, int b) { return table_[static_cast<std::size_t>(a) * nr_ + b]; };
    return (1 - fu) * ((1 - fv) * at(iu, iv) + fv * at(iu, iv + 1)) +
           fu * ((1 - fv) * at(iu + 1, iv) + fv * at(iu + 1, iv + 1));
}

SingularKernel::SingularKernel(double eh, const CutoffSpec& cutoff, const KernelBuildParams& params)
    : eh_(eh), cutoff_(cutoff), base_(eh, params) {
    cutoff_.validate();
    if (std::abs(cutoff_.plateau - 0.5) > 1e-12 || std::abs(cutoff_.support - 1.0) > 1e-12)
        throw ConfigError("singular kernel: cutoff must plateau at 1 on ||z|| <= 1/2 and vanish "
                          "outside ||z|| <= 1");
}

double SingularKernel::eval(const Zpt& z) const {
    double chi = cutoff_(parabolic_norm(z));
    if (chi == 0.0) return 0.0;
    return chi * base_.value(z.t, euclid_norm(z.x));
}

double SingularKernel::remainder(const Zpt& z) const {
    double chi = cutoff_(parabolic_norm(z));
    return (1.0 - chi) * base_.value(z.t, euclid_norm(z.x));
}

double SingularKernel::smoothed(const Zpt& z) const { return base_.value(z.t, euclid_norm(z.x)); }

KernelView SingularKernel::view(double eps) const {
    KernelMeta meta{3.0, 0, cutoff_.support, eh_, eps};
    const SingularKernel* self = this;
    return KernelView{meta, [self](const Zpt& z) { return self->eval(z); }};
}

// ---- lattice kernels ----------------------------------------------------------

LatticeKernel::LatticeKernel(double eps, double t0, double dt, int nt, int reach, KernelMeta meta)
    : eps_(eps), t0_(t0), dt_(dt), nt_(nt), reach_(reach), side_(2 * reach + 1), meta_(meta),
      values_(static_cast<std::size_t>(nt) * side_ * side_ * side_, 0.0) {}

std::size_t LatticeKernel::idx(int it, int ix, int iy, int iz) const {
    std::size_t s = static_cast<std::size_t>(it);
    s = s * side_ + (ix + reach_);
    s = s * side_ + (iy + reach_);
    s = s * side_ + (iz + reach_);
    return s;
}

double& LatticeKernel::at(int it, int ix, int iy, int iz) { return values_[idx(it, ix, iy, iz)]; }
double LatticeKernel::at(int it, int ix, int iy, int iz) const {
    return values_[idx(it, ix, iy, iz)];
}

double LatticeKernel::value(double t, int ix, int iy, int iz) const {
    if (std::abs(ix) > reach_ || std::abs(iy) > reach_ || std::abs(iz) > reach_) return 0.0;
    double u = (t - t0_) / dt_;
    if (u <= 0.0 || u >= nt_ - 1) return 0.0;
    int iu = static_cast<int>(u);
    double f = u - iu;
    return (1 - f) * at(iu, ix, iy, iz) + f * at(iu + 1, ix, iy, iz);
}

double LatticeKernel::value(const Zpt& z) const {
    auto snap = [&](double v) {
        double q = v / eps_;
        long r = std::lround(q);
        if (std::abs(q - r) > 1e-6)
            throw DomainError("lattice kernel: coordinate not a lattice multiple");
        return static_cast<int>(r);
    };
    return value(z.t, snap(z.x[0]), snap(z.x[1]), snap(z.x[2]));
}

KernelView LatticeKernel::view() const {
    const LatticeKernel* self = this;
    return KernelView{meta_, [self](const Zpt& z) { return self->value(z); }};
}

LatticeKernel LatticeKernel::sample(const KernelView& k, double eps, double time_step) {
    const double sup = k.meta.support;
    const int reach = static_cast<int>(std::ceil(sup / eps - 1e-12));
    // t_lo snapped to a multiple of the step so sampled kernels share the
    // global time grid used by the field tabulation
    const double t_lo =
        -std::ceil((0.75 * k.meta.eh * k.meta.eh) / time_step + 2.0) * time_step;
    const double t_hi = sup * sup + 2.0 * time_step;
    const int nt = static_cast<int>(std::ceil((t_hi - t_lo) / time_step)) + 1;
    LatticeKernel out(eps, t_lo, time_step, nt, reach, k.meta);
    Zpt z;
    for (int it = 0; it < nt; ++it) {
        z.t = t_lo + it * time_step;
        for (int ix = -reach; ix <= reach; ++ix)
            for (int iy = -reach; iy <= reach; ++iy)
                for (int iz = -reach; iz <= reach; ++iz) {
                    z.x = {ix * eps, iy * eps, iz * eps};
                    out.at(it, ix, iy, iz) = k(z);
                }
    }
    return out;
}

double LatticeKernel::squared_mass_exact() const {
    // integral of the squared piecewise-linear interpolant: per segment
    // (a^2 + a b + b^2) * dt / 3
    double acc = 0.0;
    const std::size_t stride = static_cast<std::size_t>(side_) * side_ * side_;
    for (std::size_t p = 0; p < stride; ++p) {
        double seg = 0.0;
        for (int it = 0; it + 1 < nt_; ++it) {
            double a = values_[static_cast<std::size_t>(it) * stride + p];
            double b = values_[static_cast<std::size_t>(it + 1) * stride + p];
            seg += (a * a + a * b + b * b);
        }
        acc += seg;
    }
    return acc * dt_ / 3.0 * eps_ * eps_ * eps_;
}

double LatticeKernel::mass() const {
    double acc = 0.0;
    const std::size_t stride = static_cast<std::size_t>(side_) * side_ * side_;
    for (std::size_t p = 0; p < stride; ++p) {
        double seg = 0.0;
        for (int it = 0; it < nt_; ++it) {
            double w = (it == 0 || it == nt_ - 1) ? 0.5 : 1.0;
            seg += w * values_[static_cast<std::size_t>(it) * stride + p];
        }
        acc += seg;
    }
    return acc * dt_ * eps_ * eps_ * eps_;
}

double LatticeKernel::node_squared_mass() const {
    double acc = 0.0;
    const std::size_t stride = static_cast<std::size_t>(side_) * side_ * side_;
    for (std::size_t p = 0; p < stride; ++p) {
        double seg = 0.0;
        for (int it = 0; it < nt_; ++it) {
            double w = (it == 0 || it == nt_ - 1) ? 0.5 : 1.0;
            double v = values_[static_cast<std::size_t>(it) * stride + p];
            seg += w * v * v;
        }
        acc += seg;
    }
    return acc * dt_ * eps_ * eps_ * eps_;
}

void LatticeKernel::export_binary(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("export_binary: cannot open " + path);
    const char magic[8] = {'M', 'K', 'R', 'N', '1', 0, 0, 0};
    out.write(magic, 8);
    std::int32_t dims[4] = {nt_, side_, side_, side_};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    double header[6] = {eps_, meta_.eh, meta_.a, static_cast<double>(meta_.r), t0_, dt_};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(values_.data()),
              static_cast<std::streamsize>(values_.size() * sizeof(double)));
    if (!out) throw DomainError("export_binary: write failed for " + path);
}

LatticeKernel LatticeKernel::import_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("import_binary: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "MKRN1", 5) != 0) throw DomainError("import_binary: bad magic");
    std::int32_t dims[4];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    double header[6];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (dims[1] != dims[2] || dims[1] != dims[3] || dims[1] % 2 == 0)
        throw DomainError("import_binary: bad box dims");
    KernelMeta meta{header[2], static_cast<int>(header[3]), 0.0, header[1], header[0]};
    LatticeKernel out(header[0], header[4], header[5], dims[0], (dims[1] - 1) / 2, meta);
    in.read(reinterpret_cast<char*>(out.values_.data()),
            static_cast<std::streamsize>(out.values_.size() * sizeof(double)));
    if (!in) throw DomainError("import_binary: truncated file " + path);
    return out;
}

std::vector<std::pair<std::array<int, 3>, double>> lattice_mollifier_weights(
    double eps, double eh, const MollifierProfile& psi) {
    const int reach = static_cast<int>(std::floor(eh / eps)) + 1;
    std::vector<std::pair<std::array<int, 3>, double>> w;
    double mass = 0.0;
    for (int ix = -reach; ix <= reach; ++ix)
        for (int iy = -reach; iy <= reach; ++iy)
            for (int iz = -reach; iz <= reach; ++iz) {
                double r = eps * std::sqrt(double(ix * ix + iy * iy + iz * iz));
                double v = psi(r / eh);
                if (v > 0.0) {
                    w.push_back({{ix, iy, iz}, v});
                    mass += v;
                }
            }
    for (auto& e : w) e.second /= mass; // exact unit lattice mass: eps^3 sum psi_e = 1
    return w;
}

LatticeKernel discrete_convolve(const LatticeKernel& k, const MollifierProfile& psi, double eh) {
    auto w = lattice_mollifier_weights(k.eps(), eh, psi);
    int moll_reach = 0;
    for (const auto& e : w)
        moll_reach = std::max({moll_reach, std::abs(e.first[0]), std::abs(e.first[1]),
                               std::abs(e.first[2])});
    KernelMeta meta = k.meta();
    meta.support += eh;
    LatticeKernel out(k.eps(), k.t0(), k.dt(), k.nt(), k.reach() + moll_reach, meta);
    const int R = out.reach();
    for (int it = 0; it < out.nt(); ++it)
        for (int ix = -R; ix <= R; ++ix)
            for (int iy = -R; iy <= R; ++iy)
                for (int iz = -R; iz <= R; ++iz) {
                    double acc = 0.0;
                    for (const auto& e : w) {
                        int jx = ix - e.first[0], jy = iy - e.first[1], jz = iz - e.first[2];
                        if (std::abs(jx) > k.reach() || std::abs(jy) > k.reach() ||
                            std::abs(jz) > k.reach())
                            continue;
                        acc += e.second * k.at(it, jx, jy, jz);
                    }
                    out.at(it, ix, iy, iz) = acc;
                }
    return out;
}

// ---- dyadic decomposition -----------------------------------------------------

double DyadicStack::reconstruct(const Zpt& z) const {
    double acc = 0.0;
    for (const auto& p : pieces) acc += p(z);
    return acc;
}

DyadicStack dyadic_decompose(const KernelView& k, double eh) {
    DyadicStack st;
    st.base = k;
    const int N = static_cast<int>(-std::floor(std::log2(eh)));
    st.levels = N + 1;
    // u_n(z) = step(2^n ||z||); the short transition [1, 1.35] leaves every
    // level a plateau where its profile equals 1, keeping the measured
    // constants comparable across levels
    CutoffSpec step{1.0, 1.35};
    auto u = [step](int n, const Zpt& z) { return step(std::ldexp(parabolic_norm(z), n)); };
    for (int n = 0; n <= N; ++n) {
        KernelView piece;
        piece.meta = k.meta;
        piece.meta.support = std::min(k.meta.support, std::ldexp(2.0, -n));
        if (n == 0 && N == 0) {
            piece.eval = [k](const Zpt& z) { return k(z); };
        } else if (n == 0) {
            piece.eval = [k, u](const Zpt& z) { return k(z) * (1.0 - u(1, z)); };
        } else if (n == N) {
            piece.eval = [k, u, n](const Zpt& z) { return k(z) * u(n, z); };
        } else {
            piece.eval = [k, u, n](const Zpt& z) { return k(z) * (u(n, z) - u(n + 1, z)); };
        }
        st.pieces.push_back(std::move(piece));
    }
    return st;
}

// ---- norms ---------------------------------------------------------------------

std::vector<Zpt> kernel_probe_points(double support, double eh) {
    std::vector<Zpt> pts;
    const double inv3 = 1.0 / std::sqrt(3.0), inv2 = 1.0 / std::sqrt(2.0);
    for (double r = support * 0.98; r > eh / 8.0; r *= std::pow(0.5, 0.25)) {
        double r2 = r * r, h = r / 2.0, h2 = h * h;
        pts.push_back(Zpt{r2, {0, 0, 0}});
        pts.push_back(Zpt{-r2, {0, 0, 0}});
        pts.push_back(Zpt{0, {r, 0, 0}});
        pts.push_back(Zpt{0, {r * inv3, r * inv3, r * inv3}});
        pts.push_back(Zpt{0, {r * inv2, r * inv2, 0}});
        pts.push_back(Zpt{h2, {h, 0, 0}});
        pts.push_back(Zpt{-h2, {0, h, 0}});
        pts.push_back(Zpt{h2, {h * inv3, h * inv3, h * inv3}});
    }
    pts.push_back(Zpt{0, {0, 0, 0}});
    return pts;
}

namespace {

struct Stencil {
    int weight_s; // |k|_s
    std::function<double(const KernelView&, const Zpt&, double, double)> apply;
};

double kshift(const KernelView& k, const Zpt& z, double dt, int i, double dx, int j, double dy) {
    Zpt w = z;
    w.t += dt;
    if (i >= 0) w.x[i] += dx;
    if (j >= 0) w.x[j] += dy;
    return k(w);
}

std::vector<Stencil> stencils_up_to(int q) {
    std::vector<Stencil> st;
    st.push_back({0, [](const KernelView& k, const Zpt& z, double, double) { return k(z); }});
    if (q >= 1) {
        for (int i = 0; i < 3; ++i)
            st.push_back({1, [i](const KernelView& k, const Zpt& z, double hx, double) {
                              return (kshift(k, z, 0, i, hx, -1, 0) -
                                      kshift(k, z, 0, i, -hx, -1, 0)) /
                                     (2 * hx);
                          }});
    }
    if (q >= 2) {
        st.push_back({2, [](const KernelView& k, const Zpt& z, double, double ht) {
                          return (kshift(k, z, ht, -1, 0, -1, 0) -
                                  kshift(k, z, -ht, -1, 0, -1, 0)) /
                                 (2 * ht);
                      }});
        for (int i = 0; i < 3; ++i)
            st.push_back({2, [i](const KernelView& k, const Zpt& z, double hx, double) {
                              return (kshift(k, z, 0, i, hx, -1, 0) - 2 * k(z) +
                                      kshift(k, z, 0, i, -hx, -1, 0)) /
                                     (hx * hx);
                          }});
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                st.push_back({2, [i, j](const KernelView& k, const Zpt& z, double hx, double) {
                                  return (kshift(k, z, 0, i, hx, j, hx) -
                                          kshift(k, z, 0, i, hx, j, -hx) -
                                          kshift(k, z, 0, i, -hx, j, hx) +
                                          kshift(k, z, 0, i, -hx, j, -hx)) /
                                         (4 * hx * hx);
                              }});
    }
    return st;
}

} // namespace

double kernel_norm(const KernelView& k, double a, int q, double eh, double eps,
                   const std::vector<Zpt>& probes) {
    if (q < 0 || q > 2) throw ConfigError("kernel_norm: q must be in {0,1,2}");
    auto pts = probes.empty() ? kernel_probe_points(k.meta.support > 0 ? k.meta.support : 1.0, eh)
                              : probes;
    auto st = stencils_up_to(q);
    const double hx = eps, ht = eps * eps;
    double best = 0.0;
    for (const auto& z : pts) {
        double w = parabolic_norm(z) + eh;
        for (const auto& s : st) {
            double v = std::abs(s.apply(k, z, hx, ht));
            best = std::max(best, std::pow(w, a + s.weight_s) * v);
        }
    }
    return best;
}

// ---- renormalization ------------------------------------------------------------

TwoPointKernel positive_renorm(const KernelView& k, int r, double fd_space_step,
                               double fd_time_step) {
    if (r < 0) throw ConfigError("positive_renorm: r must be >= 0");
    if (r > 2) throw ConfigError("positive_renorm: orders r > 2 are unsupported");
    (void)fd_time_step;
    if (r == 0)
        return TwoPointKernel{[k](const Zpt& zm, const Zpt& zp) {
            return k(Zpt{zp.t - zm.t,
                         {zp.x[0] - zm.x[0], zp.x[1] - zm.x[1], zp.x[2] - zm.x[2]}});
        }};
    double h = fd_space_step;
    return TwoPointKernel{[k, r, h](const Zpt& zm, const Zpt& zp) {
        Zpt diff{zp.t - zm.t, {zp.x[0] - zm.x[0], zp.x[1] - zm.x[1], zp.x[2] - zm.x[2]}};
        Zpt neg{-zm.t, {-zm.x[0], -zm.x[1], -zm.x[2]}};
        double acc = k(diff) - k(neg); // |k|_s < 1 forces k = 0
        if (r == 2) {
            for (int i = 0; i < 3; ++i) {
                Zpt p = neg, m = neg;
                p.x[i] += h;
                m.x[i] -= h;
                acc -= zp.x[i] * (k(p) - k(m)) / (2 * h);
            }
        }
        return acc;
    }};
}

double negative_renorm_apply(const KernelView& k, int r,
                             const std::function<double(const Zpt&, const Zpt&)>& eta,
                             const TwoPointSupport& sup, double eps, double time_step) {
    if (r >= 0) throw ConfigError("negative_renorm_apply: r must be < 0");
    if (r < -2) throw ConfigError("negative_renorm_apply: |r| > 2 unsupported");
    const int absr = -r;
    const double h = eps; // FD step for the z+ derivatives of eta

    auto taylor_sub = [&](const Zpt& zm, const Zpt& zp) {
        double acc = eta(zm, zp) - eta(zm, zm);
        if (absr == 2) {
            for (int i = 0; i < 3; ++i) {
                Zpt p = zm, m = zm;
                p.x[i] += h;
                m.x[i] -= h;
                acc -= (zp.x[i] - zm.x[i]) * (eta(zm, p) - eta(zm, m)) / (2 * h);
            }
        }
        return acc;
    };

    const int rx = static_cast<int>(std::ceil(sup.x_rad / eps));
    const int rk = static_cast<int>(std::ceil(k.meta.support / eps));
    const std::int64_t mt = std::max<std::int64_t>(1, std::llround((sup.t_hi - sup.t_lo) / time_step));
    const double ht = (sup.t_hi - sup.t_lo) / static_cast<double>(mt);
    const double kt_lo = -(k.meta.eh * k.meta.eh), kt_hi = k.meta.support * k.meta.support;
    const std::int64_t kt_n = std::max<std::int64_t>(1, std::llround((kt_hi - kt_lo) / time_step));
    const double kht = (kt_hi - kt_lo) / static_cast<double>(kt_n);
    const double w_m = eps * eps * eps * ht;
    const double w_p = eps * eps * eps * kht;

    double acc = 0.0;
    Zpt zm, zp, diff;
    for (std::int64_t itm = 0; itm < mt; ++itm) {
        zm.t = sup.t_lo + (itm + 0.5) * ht;
        for (int ax = -rx; ax <= rx; ++ax)
            for (int ay = -rx; ay <= rx; ++ay)
                for (int az = -rx; az <= rx; ++az) {
                    zm.x = {ax * eps, ay * eps, az * eps};
                    if (euclid_norm(zm.x) > sup.x_rad) continue;
                    for (std::int64_t itp = 0; itp < kt_n; ++itp) {
                        diff.t = kt_lo + (itp + 0.5) * kht;
                        zp.t = zm.t + diff.t;
                        for (int bx = -rk; bx <= rk; ++bx)
                            for (int by = -rk; by <= rk; ++by)
                                for (int bz = -rk; bz <= rk; ++bz) {
                                    diff.x = {bx * eps, by * eps, bz * eps};
                                    double kv = k(diff);
                                    if (kv == 0.0) continue;
                                    zp.x = {zm.x[0] + diff.x[0], zm.x[1] + diff.x[1],
                                            zm.x[2] + diff.x[2]};
                                    acc += kv * taylor_sub(zm, zp);
                                }
                    }
                }
    }
    return acc * w_m * w_p;
}

// ---- chain kernel -----------------------------------------------------------------

ChainKernel::ChainKernel(const LatticeKernel& k, int time_stride)
    : k_(&k),
      corr_(k.eps(), -(k.nt() - 1) * k.dt(), k.dt() * time_stride,
            2 * ((k.nt() - 1) / time_stride) + 1, 2 * k.reach(),
            KernelMeta{5.0, 0, 2 * k.meta().support, k.meta().eh, k.eps()}) {
    const int R = k.reach();
    const int S = 2 * R + 1;
    int P = 1;
    while (P < 2 * S - 1) P <<= 1;
    const std::size_t pcells = static_cast<std::size_t>(P) * P * P;
    if (pcells * k.nt() * 16 > (std::size_t(3) << 30))
        throw GuardError("chain kernel: padded transform exceeds the memory guard");

    // forward transforms of every time slice, zero-padded to avoid wrap
    std::vector<std::vector<cplx>> khat(k.nt());
    for (int it = 0; it < k.nt(); ++it) {
        std::vector<double> f(pcells, 0.0);
        for (int ox = -R; ox <= R; ++ox)
            for (int oy = -R; oy <= R; ++oy)
                for (int oz = -R; oz <= R; ++oz) {
                    double v = k.at(it, ox, oy, oz);
                    if (v == 0.0) continue;
                    std::size_t cx = (ox + P) % P, cy = (oy + P) % P, cz = (oz + P) % P;
                    f[(cz * P + cy) * P + cx] = v;
                }
        khat[it] = dft3_forward_real(f, P);
    }

    // A(., v_t) slice by slice: the space part is the exact lattice
    // correlation, time a Riemann sum
    const int ts = time_stride;
    const double w = std::pow(k.eps(), 3) * k.dt() * ts / static_cast<double>(pcells);
    std::vector<cplx> acc(pcells);
    const int cR = corr_.reach();
    for (int vt = 0; vt < corr_.nt(); ++vt) {
        long vt_units = std::lround((corr_.t0() + vt * corr_.dt()) / k.dt());
        std::fill(acc.begin(), acc.end(), cplx(0, 0));
        long ut_lo = std::max<long>(0, -vt_units);
        long ut_hi = std::min<long>(k.nt() - 1, k.nt() - 1 - vt_units);
        bool any = false;
        for (long ut = ut_lo; ut <= ut_hi; ut += ts) {
            const auto& g = khat[ut];
            const auto& f = khat[ut + vt_units];
            for (std::size_t i = 0; i < pcells; ++i) acc[i] += f[i] * std::conj(g[i]);
            any = true;
        }
        if (any) dft3(acc, P, true);
        for (int vx = -cR; vx <= cR; ++vx)
            for (int vy = -cR; vy <= cR; ++vy)
                for (int vz = -cR; vz <= cR; ++vz) {
                    double val = 0.0;
                    if (any) {
                        std::size_t cx = (vx + P) % P, cy = (vy + P) % P, cz = (vz + P) % P;
                        val = acc[(cz * P + cy) * P + cx].real() * w;
                    }
                    corr_.at(vt, vx, vy, vz) = val;
                }
    }
}

double ChainKernel::value(const Zpt& v) const {
    Zpt neg{-v.t, {-v.x[0], -v.x[1], -v.x[2]}};
    double a = corr_.value(v);
    return k_->value(neg) * a * a;
}

double ChainKernel::value_alt(const Zpt& v) const {
    // direct summation of the correlation at a single point
    const auto& k = *k_;
    const int R = k.reach();
    auto snap = [&](double q) { return static_cast<int>(std::lround(q / k.eps())); };
    int vx = snap(v.x[0]), vy = snap(v.x[1]), vz = snap(v.x[2]);
    long vt_units = std::lround(v.t / k.dt());
    double acc = 0.0;
    long ut_lo = std::max<long>(0, -vt_units);
    long ut_hi = std::min<long>(k.nt() - 1, k.nt() - 1 - vt_units);
    for (long ut = ut_lo; ut <= ut_hi; ++ut)
        for (int ux = std::max(-R, -R - vx); ux <= std::min(R, R - vx); ++ux)
            for (int uy = std::max(-R, -R - vy); uy <= std::min(R, R - vy); ++uy)
                for (int uz = std::max(-R, -R - vz); uz <= std::min(R, R - vz); ++uz) {
                    double a = k.at(static_cast<int>(ut), ux, uy, uz);
                    if (a == 0.0) continue;
                    acc += a * k.at(static_cast<int>(ut + vt_units), ux + vx, uy + vy, uz + vz);
                }
    double A = acc * std::pow(k.eps(), 3) * k.dt();
    Zpt neg{-v.t, {-v.x[0], -v.x[1], -v.x[2]}};
    return k_->value(neg) * A * A;
}

KernelView ChainKernel::view() const {
    const ChainKernel* self = this;
    KernelMeta meta = corr_.meta();
    return KernelView{meta, [self](const Zpt& z) { return self->value(z); }};
}

double chain_renorm(const ChainKernel& g,
                    const std::function<double(const Zpt&, const Zpt&)>& eta,
                    const TwoPointSupport& sup, double eps, double time_step) {
    // z1 over the test-function support, v = z2 - z1 over the correlation grid
    const auto& corr = g.correlation();
    const int rx = static_cast<int>(std::ceil(sup.x_rad / eps));
    const std::int64_t mt = std::max<std::int64_t>(1, std::llround((sup.t_hi - sup.t_lo) / time_step));
    const double ht = (sup.t_hi - sup.t_lo) / static_cast<double>(mt);
    const double w1 = std::pow(eps, 3) * ht;
    const double wv = std::pow(corr.eps(), 3) * corr.dt();
    const int cR = corr.reach();

    double acc = 0.0;
    Zpt z1, z2, v;
    for (std::int64_t it1 = 0; it1 < mt; ++it1) {
        z1.t = sup.t_lo + (it1 + 0.5) * ht;
        for (int ax = -rx; ax <= rx; ++ax)
            for (int ay = -rx; ay <= rx; ++ay)
                for (int az = -rx; az <= rx; ++az) {
                    z1.x = {ax * eps, ay * eps, az * eps};
                    if (euclid_norm(z1.x) > sup.x_rad) continue;
                    double base = eta(z1, z1);
                    for (int vt = 0; vt < corr.nt(); ++vt) {
                        v.t = corr.t0() + (vt + 0.5) * corr.dt();
                        z2.t = z1.t + v.t;
                        for (int bx = -cR; bx <= cR; ++bx)
                            for (int by = -cR; by <= cR; ++by)
                                for (int bz = -cR; bz <= cR; ++bz) {
                                    v.x = {bx * corr.eps(), by * corr.eps(), bz * corr.eps()};
                                    double gv = g.value(v);
                                    if (gv == 0.0) continue;
                                    z2.x = {z1.x[0] + v.x[0], z1.x[1] + v.x[1],
                                            z1.x[2] + v.x[2]};
                                    acc += gv * (eta(z1, z2) - base);
                                }
                    }
                }
    }
    return acc * w1 * wv;
}

QuadratureResult renorm_constant_c1(const KernelView& k, double eps, double h) {
    auto run = [&](double step) {
        const int reach = static_cast<int>(std::ceil(k.meta.support / eps));
        const double t_lo = -(k.meta.eh * k.meta.eh), t_hi = k.meta.support * k.meta.support;
        const std::int64_t n = std::max<std::int64_t>(1, std::llround((t_hi - t_lo) / step));
        const double ht = (t_hi - t_lo) / static_cast<double>(n);
        double acc = 0.0;
        Zpt z;
        for (int ix = -reach; ix <= reach; ++ix)
            for (int iy = -reach; iy <= reach; ++iy)
                for (int iz = -reach; iz <= reach; ++iz) {
                    z.x = {ix * eps, iy * eps, iz * eps};
                    for (std::int64_t it = 0; it < n; ++it) {
                        z.t = t_lo + (it + 0.5) * ht;
                        double v = k(z);
                        acc += v * v;
                    }
                }
        return acc * std::pow(eps, 3) * ht;
    };
    double v1 = run(h), v2 = run(h / 2);
    return QuadratureResult{v2, std::abs(v1 - v2)};
}

double renorm_constant_c1_exact(const LatticeKernel& k) { return k.squared_mass_exact(); }

QuadratureResult renorm_constant_c2(const LatticeKernel& k, int time_stride) {
    ChainKernel chain(k, time_stride);
    const auto& corr = chain.correlation();
    auto run = [&](int ts) {
        // C2 = 2 sum_z w K(z) A(-z)^2: exact lattice sum in space, Riemann in
        // time at the given stride
        double acc = 0.0;
        const int R = k.reach();
        Zpt z;
        for (int it = 0; it < k.nt(); it += ts) {
            z.t = k.t0() + it * k.dt();
            for (int jx = -R; jx <= R; ++jx)
                for (int jy = -R; jy <= R; ++jy)
                    for (int jz = -R; jz <= R; ++jz) {
                        double kv = k.at(it, jx, jy, jz);
                        if (kv == 0.0) continue;
                        Zpt neg{-z.t, {-jx * k.eps(), -jy * k.eps(), -jz * k.eps()}};
                        double a = corr.value(neg);
                        acc += kv * a * a;
                    }
        }
        return 2.0 * acc * std::pow(k.eps(), 3) * k.dt() * ts;
    };
    double fine = run(time_stride);
    double coarse = run(time_stride * 2);
    return QuadratureResult{fine, std::abs(coarse - fine)};
}

} // namespace martint
