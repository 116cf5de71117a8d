#include "martint/experiment.hpp"
#include "martint/chaos.hpp"
#include "martint/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace martint {

void ExperimentConfig::validate() const {
    if (symbols.empty()) throw ConfigError("experiment: no symbols");
    if (eps_grid.empty()) throw ConfigError("experiment: empty eps grid");
    if (lambda_grid.empty()) throw ConfigError("experiment: empty lambda grid");
    if (replicas < 1) throw ConfigError("experiment: replicas must be >= 1");
    for (double l : lambda_grid) {
        double lg = std::log2(l);
        if (std::abs(lg - std::round(lg)) > 1e-9)
            throw ConfigError("experiment: lambda values must be dyadic, got " +
                              std::to_string(l));
    }
}

MomentStat p_moment(const std::vector<double>& samples, double p) {
    MomentStat st;
    const std::size_t n = samples.size();
    if (n == 0) return st;
    double m = 0.0;
    for (double x : samples) m += std::pow(std::abs(x), p);
    m /= static_cast<double>(n);
    st.moment = std::pow(m, 1.0 / p);
    if (n >= 2 && m > 0.0) {
        double var = 0.0;
        for (double x : samples) {
            double d = std::pow(std::abs(x), p) - m;
            var += d * d;
        }
        var /= static_cast<double>(n - 1);
        double se_m = std::sqrt(var / static_cast<double>(n));
        st.se = (1.0 / p) * std::pow(m, 1.0 / p - 1.0) * se_m;
        st.se_ok = true;
    }
    return st;
}

namespace {

Zpt experiment_center(const LatticeSpec& lat, double dt, const TestProfile& prof, double lambda) {
    Zpt z;
    double ht = prof.time_halfwidth * lambda * lambda;
    z.t = std::ceil(ht / dt + 1.0) * dt;
    int mid = lat.side() / 2;
    z.x = {mid * lat.eps, mid * lat.eps, mid * lat.eps};
    return z;
}

void parallel_replicas(int threads, int n, const std::function<void(int)>& fn) {
    if (threads <= 1) {
        for (int r = 0; r < n; ++r) fn(r);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            while (true) {
                int r = next.fetch_add(1);
                if (r >= n) break;
                fn(r);
            }
        });
    for (auto& th : pool) th.join();
}

} // namespace

std::vector<ScalingRecord> run_scaling(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<ScalingRecord> records;
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - t_start)
            .count();
    };

    for (SymbolTag sym : cfg.symbols) {
        for (double eps : cfg.eps_grid) {
            ModelParams mp;
            mp.lattice = LatticeSpec{3, eps, 1.0};
            mp.spec = MartingaleSpec::wiener_limit(eps);
            mp.eh = cfg.eh_for(eps);
            mp.psi = MollifierProfile{cfg.moll_sharpness};
            mp.kernel_params.mollifier_sharpness = cfg.kernel_sharpness;
            mp.with_chain_constant = (sym == SymbolTag::IPsi3Psi2);
            ModelContext ctx(mp);

            std::vector<SymbolEvaluator> evals;
            evals.reserve(cfg.lambda_grid.size());
            double t_neg = 0.0, t_pos = 0.0;
            for (double lambda : cfg.lambda_grid) {
                Zpt center = experiment_center(mp.lattice, ctx.dt(), cfg.profile, lambda);
                evals.emplace_back(ctx, ScaledTestFunction::make(cfg.profile, lambda, center));
                t_neg = std::max(t_neg, evals.back().t_neg_required(sym));
                t_pos = std::max(t_pos, evals.back().t_pos_required(sym));
            }

            const int nl = static_cast<int>(cfg.lambda_grid.size());
            std::vector<std::vector<double>> samples(nl);
            for (auto& v : samples) v.assign(cfg.replicas, 0.0);
            std::atomic<bool> over_budget{false};
            std::vector<char> done(cfg.replicas, 0);

            auto worker = [&](int r) {
                if (over_budget.load()) return;
                ExtendedNoise noise(mp.lattice, mp.spec, stream_key(cfg.master_seed, r, 0x5ca1e),
                                    t_neg, t_pos);
                for (int li = 0; li < nl; ++li) samples[li][r] = evals[li].pair(sym, noise);
                done[r] = 1;
                if (cfg.budget_ms > 0 && elapsed_ms() > cfg.budget_ms) over_budget.store(true);
            };
            auto wall0 = elapsed_ms();
            parallel_replicas(cfg.threads, cfg.replicas, worker);
            auto wall1 = elapsed_ms();

            // partial flush on budget overrun: keep the completed prefix
            int n_done = 0;
            while (n_done < cfg.replicas && done[n_done]) ++n_done;

            for (int li = 0; li < nl; ++li) {
                for (double p : cfg.p_values) {
                    std::vector<double> s(samples[li].begin(), samples[li].begin() + n_done);
                    MomentStat st = p_moment(s, p);
                    ScalingRecord rec;
                    rec.symbol = symbol_name(sym);
                    rec.eps = eps;
                    rec.lambda = cfg.lambda_grid[li];
                    rec.p = p;
                    rec.moment = st.moment;
                    rec.stderr_ = st.se;
                    rec.stderr_ok = st.se_ok;
                    rec.n_replicas = n_done;
                    rec.seed = cfg.master_seed;
                    rec.wall_ms = cfg.record_wall ? (wall1 - wall0) : 0;
                    rec.scaling_regime = cfg.lambda_grid[li] >= 2.0 * mp.eh;
                    records.push_back(std::move(rec));
                }
            }
            if (over_budget.load()) {
                if (!cfg.quiet)
                    std::fprintf(stderr, "budget exceeded; flushed %d replicas for %s eps=%g\n",
                                 n_done, symbol_name(sym).c_str(), eps);
                return records;
            }
        }
    }
    return records;
}

FitResult fit_exponent(const std::vector<ScalingRecord>& records, const std::string& symbol,
                       double eps, double p, double target, double tolerance,
                       bool include_saturation) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : records) {
        if (r.symbol != symbol || std::abs(r.eps - eps) > 1e-12 || std::abs(r.p - p) > 1e-12)
            continue;
        if (!include_saturation && !r.scaling_regime) continue;
        if (r.moment <= 0.0) continue;
        pts.push_back({std::log(r.lambda), std::log(r.moment)});
    }
    if (pts.size() < 3)
        throw GuardError("fit_exponent: need at least 3 scaling-regime points, have " +
                         std::to_string(pts.size()));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(pts.size());
    FitResult fit;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss = 0;
    for (auto [x, y] : pts) {
        double r = y - fit.slope * x - fit.intercept;
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    fit.points_used = static_cast<int>(pts.size());
    fit.target = target;
    fit.tolerance = tolerance;
    fit.pass = std::abs(fit.slope - target) <= tolerance;
    return fit;
}

// ---- identity suite ---------------------------------------------------------------

namespace {

GridFunction random_smooth_function(int arity, CounterRng& rng) {
    struct Wave {
        double a, bt, bx, phase;
    };
    std::vector<std::vector<Wave>> waves(arity);
    for (auto& w : waves)
        for (int j = 0; j < 2; ++j)
            w.push_back(Wave{rng.uniform(-1.0, 1.0), rng.uniform(-3.0, 3.0),
                             rng.uniform(-3.0, 3.0), rng.uniform(0.0, 6.28)});
    return GridFunction{arity, [waves](std::span<const Zpt> z) {
                            double prod = 1.0;
                            for (std::size_t i = 0; i < waves.size(); ++i) {
                                double v = 0.3;
                                for (const auto& w : waves[i])
                                    v += w.a * std::sin(w.bt * z[i].t + w.bx * (z[i].x[0] +
                                                        0.7 * z[i].x[1] + 0.4 * z[i].x[2]) +
                                                        w.phase);
                                prod *= v;
                            }
                            return prod;
                        }};
}

struct SmallInstance {
    LatticeSpec lattice;
    MartingaleSpec spec;
    std::uint64_t path_seed;
};

SmallInstance random_instance(CounterRng& rng, std::uint64_t seed, int idx, bool symmetric) {
    SmallInstance inst;
    inst.lattice.d = (rng.next_u64() % 2 == 0) ? 1 : 3;
    inst.lattice.eps = 1.0 / static_cast<double>(2 + rng.next_u64() % 2);
    inst.spec.k = rng.uniform(-0.4 * inst.lattice.d, 0.3);
    inst.spec.c = symmetric ? rng.uniform(0.5, 1.5) : rng.uniform(0.5, 1.5);
    inst.spec.bracket_density = 1.0;
    inst.spec.model = symmetric ? JumpModel::SymmetricPair : JumpModel::OneSidedCompensated;
    inst.spec.compensator_density =
        symmetric ? 0.0 : inst.spec.bracket_density / inst.spec.c;
    inst.spec.site_rate = inst.spec.bracket_density *
                          std::pow(inst.lattice.eps, -inst.lattice.d - 2.0 * inst.spec.k) /
                          (inst.spec.c * inst.spec.c);
    // aim for ~6 events in total
    double total_rate = inst.spec.site_rate * inst.lattice.site_count();
    inst.lattice.horizon = std::min(1.0, 6.0 / total_rate);
    inst.path_seed = stream_key(seed, idx, 77);
    return inst;
}

MartingalePathSet sample_small_path(const SmallInstance& inst, int max_events) {
    LatticeSpec lat = inst.lattice;
    for (int tries = 0; tries < 12; ++tries) {
        auto path = sample_paths(lat, inst.spec, inst.path_seed);
        if (path.total_events() <= max_events && path.total_events() >= 1) return path;
        lat.horizon *= (path.total_events() > max_events) ? 0.5 : 1.4;
        lat.horizon = std::min(lat.horizon, 1.0);
    }
    return sample_paths(lat, inst.spec, inst.path_seed);
}

} // namespace

IdentityReport run_identity_suite(std::uint64_t seed, const IdentitySuiteParams& params) {
    IdentityReport rep;

    // decomposition: brute-force product integral vs contraction/ordering sum
    for (int i = 0; i < params.n_seeds; ++i) {
        CounterRng rng(seed, i, 1);
        int n = 1 + static_cast<int>(rng.next_u64() % params.max_n);
        auto inst = random_instance(rng, seed, i, /*symmetric=*/true);
        auto path = sample_small_path(inst, 12);
        auto f = random_smooth_function(n, rng);
        double t = path.lattice().horizon;
        double prod = product_integral(f, path, n, t);
        double sum = 0.0, mag = 0.0;
        for (const auto& gamma : contractions(n))
            for (const auto& sigma : orderings(gamma)) {
                double v = iterated_integral(gamma, sigma, f, path, t);
                sum += v;
                mag += std::abs(v);
            }
        double denom = std::max({std::abs(prod), mag, 1e-300});
        rep.decomposition_max_rel = std::max(rep.decomposition_max_rel,
                                             std::abs(prod - sum) / denom);
        ++rep.decomposition_cases;
    }

    // diagonal split vs direct diagonal integral
    for (int i = 0; i < params.diagonal_seeds; ++i) {
        CounterRng rng(seed, i, 2);
        int n = 2 + static_cast<int>(rng.next_u64() % 4);
        auto inst = random_instance(rng, seed, 1000 + i, /*symmetric=*/true);
        auto path = sample_small_path(inst, 40);
        auto f = random_smooth_function(1, rng);
        double t = path.lattice().horizon * 0.9;
        double direct = diagonal_integral(f, path, n, t);
        auto split = diagonal_decomposition(f, path, n, t);
        double denom = std::max({std::abs(direct),
                                 std::abs(split.martingale_part) + std::abs(split.lebesgue_part),
                                 1e-300});
        rep.diagonal_max_rel = std::max(
            rep.diagonal_max_rel,
            std::abs(direct - (split.martingale_part + split.lebesgue_part)) / denom);
        ++rep.diagonal_cases;
    }

    // renormalization split: nil = down + diamond on single even components
    for (int i = 0; i < params.n_seeds / 2; ++i) {
        CounterRng rng(seed, i, 3);
        int n = (i % 2 == 0) ? 2 : 4;
        auto inst = random_instance(rng, seed, 2000 + i, /*symmetric=*/true);
        auto path = sample_small_path(inst, 20);
        auto f = random_smooth_function(n, rng);
        double t = path.lattice().horizon * 0.9;
        Contraction gamma;
        gamma.n = n;
        gamma.components.assign(1, {});
        for (int j = 0; j < n; ++j) gamma.components[0].push_back(j);
        Ordering sigma{std::vector<int>{0}};
        ChaosQuadrature quad;
        quad.step = std::max(1e-6, params.renorm_quad_step_factor * t);
        double nil = renormalized_iterated_integral(gamma, sigma, Labeling::all_nil(1), f, path,
                                                    t, quad);
        double down = renormalized_iterated_integral(
            gamma, sigma, Labeling{{ComponentLabel::Down}}, f, path, t, quad);
        double diam = renormalized_iterated_integral(
            gamma, sigma, Labeling{{ComponentLabel::Diamond}}, f, path, t, quad);
        double denom = std::max({std::abs(nil), std::abs(down) + std::abs(diam), 1e-300});
        rep.renorm_max_rel =
            std::max(rep.renorm_max_rel, std::abs(nil - (down + diam)) / denom);
        ++rep.renorm_cases;
    }
    return rep;
}

// ---- persistence -------------------------------------------------------------------

namespace {
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace

void persist_records(const std::vector<ScalingRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DomainError("persist: cannot open " + path);
    out << "symbol,eps,lambda,p,moment,stderr,n_replicas,seed,wall_ms\n";
    for (const auto& r : records) {
        out << r.symbol << ',' << fmt(r.eps) << ',' << fmt(r.lambda) << ',' << fmt(r.p) << ','
            << fmt(r.moment) << ',' << (r.stderr_ok ? fmt(r.stderr_) : std::string()) << ','
            << r.n_replicas << ',' << r.seed << ',' << r.wall_ms << '\n';
    }
    if (!out) throw DomainError("persist: write failed for " + path);
}

std::vector<ScalingRecord> parse_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("parse_records: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "symbol,eps,lambda,p,moment,stderr,n_replicas,seed,wall_ms")
        throw DomainError("parse_records: bad header in " + path);
    std::vector<ScalingRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (true) {
            auto c = line.find(',', pos);
            cols.push_back(line.substr(pos, c == std::string::npos ? c : c - pos));
            if (c == std::string::npos) break;
            pos = c + 1;
        }
        if (cols.size() != 9) throw DomainError("parse_records: bad row in " + path);
        ScalingRecord r;
        r.symbol = cols[0];
        r.eps = std::stod(cols[1]);
        r.lambda = std::stod(cols[2]);
        r.p = std::stod(cols[3]);
        r.moment = std::stod(cols[4]);
        r.stderr_ok = !cols[5].empty();
        r.stderr_ = r.stderr_ok ? std::stod(cols[5]) : 0.0;
        r.n_replicas = std::stoi(cols[6]);
        r.seed = std::stoull(cols[7]);
        r.wall_ms = std::stoll(cols[8]);
        out.push_back(std::move(r));
    }
    return out;
}

void persist_text(const std::vector<std::string>& lines, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DomainError("persist: cannot open " + path);
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw DomainError("persist: write failed for " + path);
}

// ---- config file -------------------------------------------------------------------

namespace {
std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto c = s.find(',', pos);
        std::string tok = s.substr(pos, c == std::string::npos ? c : c - pos);
        // trim
        while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.front()))) tok.erase(tok.begin());
        while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.pop_back();
        if (!tok.empty()) out.push_back(tok);
        if (c == std::string::npos) break;
        pos = c + 1;
    }
    return out;
}
} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c)) || c == ' ') t += c;
        // trim
        while (!t.empty() && t.front() == ' ') t.erase(t.begin());
        while (!t.empty() && t.back() == ' ') t.pop_back();
        if (t.empty()) continue;
        if (t.front() == '[') {
            auto close = t.find(']');
            if (close == std::string::npos)
                throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
            section = t.substr(1, close - 1);
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = t.substr(0, eq), val = t.substr(eq + 1);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        while (!val.empty() && val.front() == ' ') val.erase(val.begin());

        auto full = section + "." + key;
        if (full == "lattice.eps") {
            cfg.eps_grid.clear();
            for (const auto& s : split_csv(val)) cfg.eps_grid.push_back(std::stod(s));
        } else if (full == "lattice.d") {
            if (std::stoi(val) != 3)
                throw ConfigError("config: the scaling experiment runs on d = 3");
        } else if (full == "kernels.alpha") {
            cfg.alpha = std::stod(val);
        } else if (full == "kernels.eh") {
            cfg.eh_override = std::stod(val);
        } else if (full == "kernels.moll_sharpness") {
            cfg.moll_sharpness = std::stod(val);
        } else if (full == "kernels.kernel_sharpness") {
            cfg.kernel_sharpness = std::stod(val);
        } else if (full == "martingale.preset") {
            if (val != "wiener")
                throw ConfigError("config: unknown martingale preset '" + val + "'");
        } else if (full == "experiment.symbols") {
            cfg.symbols.clear();
            for (const auto& s : split_csv(val)) cfg.symbols.push_back(symbol_from_name(s));
        } else if (full == "experiment.lambda") {
            cfg.lambda_grid.clear();
            for (const auto& s : split_csv(val)) cfg.lambda_grid.push_back(std::stod(s));
        } else if (full == "experiment.p") {
            cfg.p_values.clear();
            for (const auto& s : split_csv(val)) cfg.p_values.push_back(std::stod(s));
        } else if (full == "experiment.replicas") {
            cfg.replicas = std::stoi(val);
        } else if (full == "experiment.seed") {
            cfg.master_seed = std::stoull(val);
        } else if (full == "experiment.out") {
            cfg.out_dir = val;
        } else if (full == "experiment.budget_ms") {
            cfg.budget_ms = std::stoll(val);
        } else if (full == "experiment.threads") {
            cfg.threads = std::stoi(val);
        } else if (full == "experiment.quad_step") {
            cfg.quad_step = std::stod(val);
        } else if (full == "experiment.record_wall") {
            cfg.record_wall = (val == "1" || val == "true");
        } else if (full == "experiment.profile_sharp_t") {
            cfg.profile.sharp_t = std::stod(val);
        } else if (full == "experiment.profile_sharp_x") {
            cfg.profile.sharp_x = std::stod(val);
        } else {
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + full +
                              "'");
        }
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

} // namespace martint
