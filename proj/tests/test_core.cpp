#include <doctest.h>

#include "martint/noise.hpp"
#include "martint/rng.hpp"

#include <cmath>
#include <numeric>

using namespace martint;

TEST_CASE("counter rng: streams are order-insensitive and deterministic") {
    CounterRng a(42, 3, 0), b(42, 3, 0);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CounterRng c(42, 4, 0);
    CHECK(a.next_u64() != c.next_u64());
    CounterRng u(7, 0, 0);
    double m = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) m += u.u01();
    CHECK(std::abs(m / n - 0.5) < 0.01);
}

TEST_CASE("lattice indexing round-trips and torus wraps") {
    LatticeSpec lat{3, 0.25, 1.0};
    lat.validate();
    CHECK(lat.side() == 4);
    CHECK(lat.site_count() == 64);
    for (std::int64_t s = 0; s < lat.site_count(); ++s)
        CHECK(lat.site_index(lat.site_coords(s)) == s);
    auto d = lat.torus_diff({0.0, 0.0, 0.0}, {0.75, 0.0, 0.0});
    CHECK(d[0] == doctest::Approx(0.25));
}

TEST_CASE("lattice spec rejects non-integer 1/eps") {
    LatticeSpec lat{3, 0.3, 1.0};
    CHECK_THROWS_AS(lat.validate(), ConfigError);
}

TEST_CASE("martingale spec consistency identity is enforced") {
    LatticeSpec lat{3, 0.25, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.25);
    CHECK_NOTHROW(spec.validate(lat));
    CHECK(spec.site_rate == doctest::Approx(32.0));
    spec.site_rate *= 1.5;
    CHECK_THROWS_WITH_AS(spec.validate(lat),
                         doctest::Contains("site_rate*c^2*eps^(2k)"), ConfigError);
}

TEST_CASE("expected events per site match the Poisson mean") {
    // two clocks of rate 16 each at eps = 1/4 give 32 events per site on [0,1];
    // 64 sites x 16 replicas = 1024 site-samples
    LatticeSpec lat{3, 0.25, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.25);
    double total = 0.0;
    std::int64_t samples = 0;
    for (int rep = 0; rep < 16; ++rep) {
        auto path = sample_paths(lat, spec, 1000 + rep);
        total += static_cast<double>(path.total_events());
        samples += lat.site_count();
    }
    double mean = total / static_cast<double>(samples);
    double sigma = std::sqrt(32.0 / static_cast<double>(samples));
    CHECK(std::abs(mean - 32.0) < 3.0 * sigma);
}

TEST_CASE("zero horizon gives an empty event set") {
    LatticeSpec lat{3, 0.5, 0.0};
    auto spec = MartingaleSpec::wiener_limit(0.5);
    auto path = sample_paths(lat, spec, 9);
    CHECK(path.total_events() == 0);
}

TEST_CASE("same seed reproduces the path bitwise") {
    LatticeSpec lat{3, 0.25, 0.5};
    auto spec = MartingaleSpec::wiener_limit(0.25);
    auto a = sample_paths(lat, spec, 77);
    auto b = sample_paths(lat, spec, 77);
    REQUIRE(a.total_events() == b.total_events());
    for (std::int64_t s = 0; s < lat.site_count(); ++s) {
        const auto& ea = a.events(s);
        const auto& eb = b.events(s);
        REQUIRE(ea.size() == eb.size());
        for (std::size_t i = 0; i < ea.size(); ++i) {
            CHECK(ea[i].time == eb[i].time);
            CHECK(ea[i].sign == eb[i].sign);
        }
    }
}

TEST_CASE("no two events anywhere share a time") {
    LatticeSpec lat{3, 0.25, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.25);
    auto path = sample_paths(lat, spec, 5);
    auto all = path.all_events_sorted();
    for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i].time > all[i - 1].time);
}

TEST_CASE("evaluate: cadlag value and jump rigidity") {
    LatticeSpec lat{3, 0.25, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.25);
    auto path = sample_paths(lat, spec, 123);

    SUBCASE("zero before the first event") {
        for (std::int64_t s = 0; s < lat.site_count(); ++s) {
            const auto& ev = path.events(s);
            if (ev.empty()) continue;
            CHECK(path.evaluate(ev.front().time * 0.5, s) == 0.0);
        }
    }
    SUBCASE("one positive jump has magnitude sqrt(2)") {
        // c eps^k = (1/sqrt 2) * (1/4)^(-1/2) = sqrt 2
        CHECK(spec.jump_size(0.25) == doctest::Approx(std::sqrt(2.0)));
        for (std::int64_t s = 0; s < lat.site_count(); ++s) {
            const auto& ev = path.events(s);
            if (!ev.empty() && ev.front().sign == 1) {
                CHECK(path.evaluate(ev.front().time, s) == doctest::Approx(std::sqrt(2.0)));
                break;
            }
        }
    }
    SUBCASE("every increment is +- c eps^k exactly") {
        for (std::int64_t s = 0; s < lat.site_count(); ++s) {
            double prev = 0.0, prev_t = 0.0;
            for (const auto& e : path.events(s)) {
                double v = path.evaluate(e.time, s);
                CHECK(std::abs(std::abs(v - prev) - spec.jump_size(0.25)) < 1e-12);
                prev = v;
                prev_t = e.time;
            }
            (void)prev_t;
        }
    }
    SUBCASE("t outside the horizon is a domain error") {
        CHECK_THROWS_AS(path.evaluate(1.5, 0), DomainError);
    }
}

TEST_CASE("one-sided path replays as m c eps^k - drift") {
    LatticeSpec lat{1, 0.5, 1.0};
    auto spec = MartingaleSpec::one_sided_unit(0.5, 1, -0.25);
    spec.validate(lat);
    auto path = sample_paths(lat, spec, 30);
    const double jump = spec.jump_size(0.5);
    const double drift = std::pow(0.5, -spec.k - 1.0) * spec.compensator_density;
    for (std::int64_t s = 0; s < lat.site_count(); ++s) {
        double t = 0.83;
        auto m = path.jump_count(0.0, t, s);
        CHECK(path.evaluate(t, s) == doctest::Approx(m * jump - drift * t));
    }
}

TEST_CASE("brackets: predictable is exact, realized counts squared jumps") {
    LatticeSpec lat{3, 0.5, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.5);
    CHECK(predictable_bracket(spec, lat, 1.0) == doctest::Approx(8.0)); // eps^-3
    CHECK(predictable_bracket(spec, lat, 0.0) == 0.0);
    auto path = sample_paths(lat, spec, 8);
    double j2 = spec.jump_size(0.5) * spec.jump_size(0.5);
    for (std::int64_t s = 0; s < lat.site_count(); ++s) {
        CHECK(path.realized_bracket(0.0, s) == 0.0);
        CHECK(path.realized_bracket(1.0, s) ==
              doctest::Approx(j2 * path.jump_count(0.0, 1.0, s)));
    }
}

TEST_CASE("renormalized path: magnitudes, spec consistency, bracket identity") {
    LatticeSpec lat{3, 0.25, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.25);
    auto path = sample_paths(lat, spec, 2024);
    auto bar = path.renormalized();

    // jump magnitude c^2 eps^k = (1/2) * 2 = 1
    CHECK(bar.spec().jump_size(0.25) == doctest::Approx(1.0));
    CHECK_NOTHROW(bar.spec().validate(lat));
    CHECK(bar.spec().compensator_density == doctest::Approx(spec.bracket_density));

    // realized - predictable = eps^k * Mbar on a probe grid
    const double epsk = std::pow(0.25, spec.k);
    for (double t : {0.2, 0.5, 0.9})
        for (std::int64_t s = 0; s < lat.site_count(); s += 7) {
            double lhs = path.realized_bracket(t, s) - predictable_bracket(spec, lat, t);
            CHECK(lhs == doctest::Approx(epsk * bar.evaluate(t, s)).epsilon(1e-12));
        }
}

TEST_CASE("jump window law: mean count over [0, eps^(d+2k) t] is 2t") {
    for (double eps : {0.25, 0.125}) {
        LatticeSpec lat{3, eps, 1.0};
        auto spec = MartingaleSpec::wiener_limit(eps);
        for (double t : {1.0, 2.0}) {
            double window = std::pow(eps, 3.0 + 2.0 * spec.k) * t; // eps^2 t
            LatticeSpec wlat = lat;
            wlat.horizon = window;
            auto path = sample_paths(wlat, spec, 55);
            double mean = static_cast<double>(path.total_events()) /
                          static_cast<double>(lat.site_count());
            double sigma = std::sqrt(2.0 * t / static_cast<double>(lat.site_count()));
            CHECK(std::abs(mean - 2.0 * t) < 4.0 * sigma);
        }
    }
}

TEST_CASE("total variation identity") {
    LatticeSpec lat{3, 0.25, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.25);
    auto path = sample_paths(lat, spec, 4);
    for (std::int64_t s = 0; s < lat.site_count(); s += 5) {
        CHECK(path.jump_count(0.4, 0.3, s) == 0); // empty interval
        CHECK(path.total_variation(1.0, s) ==
              doctest::Approx(spec.jump_size(0.25) * path.jump_count(0.0, 1.0, s)));
    }
}

TEST_CASE("smoothed field: lattice mass and degenerate support") {
    LatticeSpec lat{3, 1.0 / 16, 0.02};
    auto spec = MartingaleSpec::wiener_limit(lat.eps);
    auto path = sample_paths(lat, spec, 99);

    SUBCASE("mass defect small when e >= 4 eps") {
        SmoothedFieldSpec fs;
        fs.alpha = 0.5; // e = 1/4 = 4 eps
        SmoothedField sm(path, fs);
        CHECK(sm.mollifier_lattice_mass_error() < 0.02);
    }
    SUBCASE("single-site support reproduces the path pointwise") {
        SmoothedFieldSpec fs;
        fs.alpha = 1.0; // e = eps: the profile vanishes at the neighbors
        SmoothedField sm(path, fs);
        for (std::int64_t s = 0; s < lat.site_count(); s += 41)
            CHECK(sm(0.015, s) == doctest::Approx(path.evaluate(0.015, s)));
    }
    SUBCASE("t = 0 is zero everywhere") {
        SmoothedFieldSpec fs;
        fs.alpha = 0.5;
        SmoothedField sm(path, fs);
        for (std::int64_t s = 0; s < lat.site_count(); s += 101) CHECK(sm(0.0, s) == 0.0);
    }
}

TEST_CASE("pairing with test functions") {
    LatticeSpec lat{3, 0.25, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.25);
    auto path = sample_paths(lat, spec, 17);

    SUBCASE("zero test function") {
        PairTestFunction z{[](double, const Vec3&) { return 0.0; }, 0.0, 1.0};
        CHECK(pair_with_test(path, z, 1.0, 1e-3) == 0.0);
    }
    SUBCASE("unit test function gives the signed jump sum") {
        PairTestFunction one{[](double, const Vec3&) { return 1.0; }, 0.0, 1.0};
        double got = pair_with_test(path, one, 1.0, 1e-3);
        double want = 0.0;
        const double epsd = std::pow(0.25, 3);
        for (std::int64_t s = 0; s < lat.site_count(); ++s)
            for (const auto& e : path.events(s)) want += epsd * e.sign * spec.jump_size(0.25);
        CHECK(got == doctest::Approx(want));
    }
    SUBCASE("support escaping the horizon is a domain error") {
        PairTestFunction bad{[](double, const Vec3&) { return 1.0; }, 0.0, 2.0};
        CHECK_THROWS_AS(pair_with_test(path, bad, 1.0, 1e-3), DomainError);
    }
}

TEST_CASE("empirical BDG bound with a generous constant") {
    // p in {2,4}: E_p[sup |M|] <= 10 (E_p <M>_T^{1/2} + c eps^k)
    LatticeSpec lat{3, 0.5, 1.0};
    auto spec = MartingaleSpec::wiener_limit(0.5);
    spec.validate(lat);
    const int reps = 500;
    std::vector<double> sup2(reps), sup4(reps);
    for (int r = 0; r < reps; ++r) {
        auto path = sample_paths(lat, spec, 300 + r);
        double m = 0.0;
        for (const auto& e : path.events(0)) {
            double v = std::abs(path.evaluate(e.time, 0));
            m = std::max(m, v);
        }
        sup2[r] = m * m;
        sup4[r] = m * m * m * m;
    }
    double e2 = std::sqrt(std::accumulate(sup2.begin(), sup2.end(), 0.0) / reps);
    double e4 = std::pow(std::accumulate(sup4.begin(), sup4.end(), 0.0) / reps, 0.25);
    double bracket_half = std::sqrt(predictable_bracket(spec, lat, 1.0));
    double rhs = 10.0 * (bracket_half + spec.jump_size(0.25));
    CHECK(e2 <= rhs);
    CHECK(e4 <= rhs);
}
