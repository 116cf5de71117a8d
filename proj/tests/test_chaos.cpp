#include <doctest.h>

#include "martint/chaos.hpp"
#include "martint/rng.hpp"

#include <cmath>

using namespace martint;

namespace {

MartingalePathSet small_symmetric_path(double eps, int d, double k, double c, double horizon,
                                       std::uint64_t seed) {
    LatticeSpec lat{d, eps, horizon};
    MartingaleSpec spec;
    spec.k = k;
    spec.c = c;
    spec.bracket_density = 1.0;
    spec.compensator_density = 0.0;
    spec.model = JumpModel::SymmetricPair;
    spec.site_rate = std::pow(eps, -d - 2.0 * k) / (c * c);
    return sample_paths(lat, spec, seed);
}

GridFunction separable_sin(int arity) {
    return GridFunction{arity, [](std::span<const Zpt> z) {
                            double p = 1.0;
                            for (const auto& zi : z)
                                p *= 0.5 + std::sin(2.0 * zi.t + zi.x[0] + 0.3 * zi.x[1]);
                            return p;
                        }};
}

} // namespace

TEST_CASE("contractions enumerate the Bell numbers in canonical order") {
    CHECK(contractions(1).size() == 1);
    CHECK(contractions(2).size() == 2);
    CHECK(contractions(3).size() == 5);
    CHECK(contractions(4).size() == 15);
    CHECK(contractions(5).size() == 52);
    for (const auto& g : contractions(4)) {
        CHECK_NOTHROW(g.validate());
        for (std::size_t j = 1; j < g.components.size(); ++j)
            CHECK(g.components[j - 1].front() < g.components[j].front());
    }
    CHECK_THROWS_AS(contractions(0), GuardError);
    CHECK_THROWS_AS(contractions(9), GuardError);
}

TEST_CASE("orderings are all bijections and round-trip") {
    Contraction g;
    g.n = 3;
    g.components = {{0}, {1}, {2}};
    auto os = orderings(g);
    CHECK(os.size() == 6);
    for (const auto& o : os) {
        std::vector<int> seen(3, 0);
        for (int c : o.slot_to_component) seen[c]++;
        for (int v : seen) CHECK(v == 1);
    }
    Contraction g1;
    g1.n = 2;
    g1.components = {{0, 1}};
    CHECK(orderings(g1).size() == 1);
}

TEST_CASE("labeling invariant: odd components must be nil") {
    auto path = small_symmetric_path(0.5, 1, -0.25, 1.0, 0.4, 3);
    Contraction g;
    g.n = 3;
    g.components = {{0, 1, 2}};
    Ordering s{{0}};
    auto f = constant_function(3, 1.0);
    CHECK_THROWS_AS(renormalized_iterated_integral(g, s, Labeling{{ComponentLabel::Down}}, f,
                                                   path, 0.4),
                    ConfigError);
}

TEST_CASE("product integral factorizes for product test functions") {
    auto path = small_symmetric_path(0.5, 3, -0.5, 1.0, 0.05, 11);
    GridFunction f1{1, [](std::span<const Zpt> z) { return std::sin(z[0].t) + 1.2; }};
    GridFunction g1{1, [](std::span<const Zpt> z) { return z[0].x[0] + 0.5; }};
    GridFunction fg{2, [](std::span<const Zpt> z) {
                        return (std::sin(z[0].t) + 1.2) * (z[1].x[0] + 0.5);
                    }};
    double t = 0.05;
    double lhs = product_integral(fg, path, 2, t);
    double rhs = product_integral(f1, path, 1, t) * product_integral(g1, path, 1, t);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(product_integral(constant_function(2, 0.0), path, 2, t) == 0.0);
}

TEST_CASE("diagonal integral closed forms") {
    auto path = small_symmetric_path(0.5, 3, -0.5, 1.0, 0.05, 21);
    const double eps = 0.5;
    double t = 0.05;
    std::int64_t count = 0;
    double signed_sum = 0.0;
    for (std::int64_t s = 0; s < path.lattice().site_count(); ++s)
        for (const auto& e : path.events(s))
            if (e.time < t) {
                ++count;
                signed_sum += e.sign;
            }
    const double jump = path.spec().jump_size(eps);

    CHECK(diagonal_integral(constant_function(1, 1.0), path, 2, t) ==
          doctest::Approx(std::pow(eps, 6) * jump * jump * count));
    CHECK(diagonal_integral(constant_function(1, 1.0), path, 3, t) ==
          doctest::Approx(std::pow(eps, 9) * std::pow(jump, 3) * signed_sum));
    CHECK(diagonal_integral(constant_function(1, 1.0), path, 2, 0.0) == 0.0);
}

TEST_CASE("diagonal split sums to the diagonal integral exactly") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto path = small_symmetric_path(0.5, 3, -0.5, 0.8, 0.04, seed);
        auto f = separable_sin(1);
        for (int n : {2, 3, 4, 5}) {
            double direct = diagonal_integral(f, path, n, 0.04);
            auto split = diagonal_decomposition(f, path, n, 0.04);
            double sum = split.martingale_part + split.lebesgue_part;
            double denom =
                std::max({std::abs(direct), std::abs(split.martingale_part), 1e-300});
            CHECK(std::abs(direct - sum) / denom <= 1e-12);
        }
    }
}

TEST_CASE("n=2 diagonal Lebesgue part in closed form") {
    // F = 1: lebesgue part = eps^d * t * site_count * C = t when C = 1
    auto path = small_symmetric_path(0.5, 3, -0.5, 1.0, 0.04, 5);
    auto split = diagonal_decomposition(constant_function(1, 1.0), path, 2, 0.04);
    double expected =
        std::pow(0.5, 3) * 0.04 * static_cast<double>(path.lattice().site_count());
    CHECK(split.lebesgue_part == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("decomposition identity: product equals the contraction/ordering sum") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto path = small_symmetric_path(0.5, 3, -0.5, 1.0, 0.03, 100 + seed);
        if (path.total_events() > 12 || path.total_events() == 0) continue;
        for (int n : {1, 2, 3}) {
            auto f = separable_sin(n);
            double prod = product_integral(f, path, n, 0.03);
            double sum = 0.0, mag = 0.0;
            for (const auto& g : contractions(n))
                for (const auto& s : orderings(g)) {
                    double v = iterated_integral(g, s, f, path, 0.03);
                    sum += v;
                    mag += std::abs(v);
                }
            CHECK(std::abs(prod - sum) / std::max({std::abs(prod), mag, 1e-300}) <= 1e-10);
        }
    }
}

TEST_CASE("full contraction collapses to the diagonal integral") {
    auto path = small_symmetric_path(0.5, 3, -0.5, 1.0, 0.03, 7);
    Contraction g;
    g.n = 3;
    g.components = {{0, 1, 2}};
    Ordering s{{0}};
    GridFunction f3{3, [](std::span<const Zpt> z) { return std::cos(z[0].t + z[0].x[0]); }};
    GridFunction f1{1, [](std::span<const Zpt> z) { return std::cos(z[0].t + z[0].x[0]); }};
    CHECK(iterated_integral(g, s, f3, path, 0.03) ==
          doctest::Approx(diagonal_integral(f1, path, 3, 0.03)).epsilon(1e-12));
}

TEST_CASE("renormalized integrals: all-nil equals the plain iterated integral") {
    auto path = small_symmetric_path(0.5, 3, -0.5, 1.0, 0.03, 13);
    auto f = separable_sin(3);
    for (const auto& g : contractions(3))
        for (const auto& s : orderings(g)) {
            double a = iterated_integral(g, s, f, path, 0.03);
            double b =
                renormalized_iterated_integral(g, s, Labeling::all_nil(g.m()), f, path, 0.03);
            CHECK(a == doctest::Approx(b).epsilon(1e-13));
        }
}

TEST_CASE("renormalization split nil = down + diamond on an even component") {
    // also exercises c != 1, where the split carries the c^{n-2} factor
    for (double c : {1.0, 0.7}) {
        auto path = small_symmetric_path(0.5, 3, -0.5, c, 0.03, 17);
        auto f = separable_sin(2);
        Contraction g;
        g.n = 2;
        g.components = {{0, 1}};
        Ordering s{{0}};
        ChaosQuadrature quad;
        quad.step = 1e-4 * 0.03;
        double nil =
            renormalized_iterated_integral(g, s, Labeling::all_nil(1), f, path, 0.03, quad);
        double down = renormalized_iterated_integral(g, s, Labeling{{ComponentLabel::Down}}, f,
                                                     path, 0.03, quad);
        double diam = renormalized_iterated_integral(g, s, Labeling{{ComponentLabel::Diamond}},
                                                     f, path, 0.03, quad);
        CHECK(std::abs(nil - (down + diam)) /
                  std::max({std::abs(nil), std::abs(down) + std::abs(diam), 1e-300}) <=
              1e-6);
    }
}

TEST_CASE("down component of size 2 with F = 1 has the closed Lebesgue value") {
    // scale c^0 eps^0 times bracket_density * t * (eps^d * sites) = t
    auto path = small_symmetric_path(0.25, 3, -0.5, 1.0, 0.02, 19);
    Contraction g;
    g.n = 2;
    g.components = {{0, 1}};
    Ordering s{{0}};
    double down = renormalized_iterated_integral(g, s, Labeling{{ComponentLabel::Down}},
                                                 constant_function(2, 1.0), path, 0.02);
    CHECK(down == doctest::Approx(0.02).epsilon(1e-9));
}

TEST_CASE("homogeneity and permutation consistency of iterated integrals") {
    auto path = small_symmetric_path(0.5, 3, -0.5, 1.0, 0.03, 23);
    auto f = separable_sin(2);
    for (double lam : {2.0, -3.0}) {
        GridFunction fl{2, [f, lam](std::span<const Zpt> z) { return lam * f(z); }};
        for (const auto& g : contractions(2))
            for (const auto& s : orderings(g)) {
                double a = iterated_integral(g, s, fl, path, 0.03);
                double b = lam * iterated_integral(g, s, f, path, 0.03);
                CHECK(a == doctest::Approx(b).epsilon(1e-12));
            }
    }
    // relabeling variables of F together with gamma leaves the value unchanged
    GridFunction f2{2, [](std::span<const Zpt> z) {
                        return std::sin(z[0].t) * (z[1].x[0] + 2.0);
                    }};
    GridFunction f2_swapped{2, [](std::span<const Zpt> z) {
                                return std::sin(z[1].t) * (z[0].x[0] + 2.0);
                            }};
    Contraction g;
    g.n = 2;
    g.components = {{0}, {1}};
    for (const auto& s : orderings(g)) {
        Ordering swapped{{1 - s.slot_to_component[0], 1 - s.slot_to_component[1]}};
        CHECK(iterated_integral(g, s, f2, path, 0.03) ==
              doctest::Approx(iterated_integral(g, swapped, f2_swapped, path, 0.03))
                  .epsilon(1e-12));
    }
}

TEST_CASE("nested norm closed forms") {
    LatticeSpec lat{3, 0.5, 1.0};
    SUBCASE("m=1, p=2, F=1 gives sqrt(T)") {
        PFunction p{{2}};
        double v = nested_norm(constant_function(1, 1.0), p, lat, 1.0, 0.01);
        CHECK(v == doctest::Approx(1.0).epsilon(1e-9)); // eps^d * sites = 1
        double v2 = nested_norm(constant_function(1, 1.0), p, lat, 0.25, 0.01);
        CHECK(v2 == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("p = inf gives the grid sup") {
        PFunction p{{PFunction::Inf}};
        GridFunction f{1, [](std::span<const Zpt> z) { return z[0].t; }};
        double v = nested_norm(f, p, lat, 1.0, 0.01);
        CHECK(v == doctest::Approx(0.995).epsilon(1e-9));
    }
    SUBCASE("zero function") {
        PFunction p{{1}};
        CHECK(nested_norm(constant_function(1, 0.0), p, lat, 1.0, 0.01) == 0.0);
    }
    SUBCASE("m=2 ordering indicator halves the square") {
        // ||F||_{p=(1,1)} with F = 1: nested integral over s1 < s2 gives T^2/2
        PFunction p{{1, 1}};
        double v = nested_norm(constant_function(2, 1.0), p, lat, 1.0, 0.02);
        CHECK(v == doctest::Approx(0.5).epsilon(0.05));
    }
}

TEST_CASE("exponent algebra base cases") {
    const int d = 3;
    const double k = -0.5;
    for (int n : {1, 2, 3, 4}) {
        Contraction g;
        g.n = n;
        g.components.assign(1, {});
        for (int i = 0; i < n; ++i) g.components[0].push_back(i);
        CHECK(exponent_alpha(g, PFunction{{1}}, d, k) == doctest::Approx((d + k) * (n - 2)));
        CHECK(exponent_alpha(g, PFunction{{2}}, d, k) == doctest::Approx((d + k) * (n - 1)));
        CHECK(exponent_alpha(g, PFunction{{PFunction::Inf}}, d, k) ==
              doctest::Approx((d + k) * n));
        CHECK(exponent_beta(g, PFunction{{PFunction::Inf}}, 4.0) == doctest::Approx(1.0));
    }
    // all components of size 2 with p = 1 everywhere: alpha = 0, beta = 1
    Contraction g2;
    g2.n = 4;
    g2.components = {{0, 1}, {2, 3}};
    CHECK(exponent_alpha(g2, PFunction{{1, 1}}, d, k) == doctest::Approx(0.0));
    CHECK(exponent_beta(g2, PFunction{{1, 1}}, 2.0) == doctest::Approx(1.0));
    // a sup slot at position >= 2 outside the singleton set contributes (p-1)/p
    CHECK(exponent_beta(g2, PFunction{{1, PFunction::Inf}}, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("interval-average bound holds for random smooth functions") {
    // sup |f|^p <= avg |f|^p + p (int |f|^p)^{(p-1)/p} (int |f'|^p)^{1/p}
    const int n_grid = 2000;
    const double h = 1.0 / n_grid;
    for (int trial = 0; trial < 50; ++trial) {
        CounterRng rng(909, trial, 0);
        double a1 = rng.uniform(-2, 2), a2 = rng.uniform(-2, 2), b1 = rng.uniform(0.5, 9),
               b2 = rng.uniform(0.5, 9), ph = rng.uniform(0, 6);
        auto f = [&](double t) { return a1 * std::sin(b1 * t + ph) + a2 * std::cos(b2 * t); };
        auto fp = [&](double t) {
            return a1 * b1 * std::cos(b1 * t + ph) - a2 * b2 * std::sin(b2 * t);
        };
        for (double p : {2.0, 4.0}) {
            double sup = 0.0, ip = 0.0, ipd = 0.0;
            for (int i = 0; i < n_grid; ++i) {
                double t = (i + 0.5) * h;
                sup = std::max(sup, std::pow(std::abs(f(t)), p));
                ip += std::pow(std::abs(f(t)), p) * h;
                ipd += std::pow(std::abs(fp(t)), p) * h;
            }
            double rhs = ip + p * std::pow(ip, (p - 1.0) / p) * std::pow(ipd, 1.0 / p);
            CHECK(sup <= rhs * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("brute-force guards reject oversized instances") {
    auto path = small_symmetric_path(0.25, 3, -0.5, 1.0, 1.0, 31);
    REQUIRE(path.total_events() > 60);
    ChaosQuadrature quad;
    quad.op_guard = 1000;
    CHECK_THROWS_AS(product_integral(constant_function(4, 1.0), path, 4, 1.0, quad), GuardError);
}
