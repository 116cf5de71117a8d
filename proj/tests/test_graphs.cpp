#include <doctest.h>

#include "martint/graphs.hpp"

#include <cmath>

using namespace martint;

namespace {

DiagramGraph psi_graph() {
    DiagramGraph g;
    g.vertices = {{"root", VertexKind::Star}, {"testpt", VertexKind::Up}, {"u1", VertexKind::Var}};
    g.edges = {{0, 1, 0.0, 0}, {2, 1, 3.0, 0}};
    return g;
}

DiagramGraph psi2_graph() {
    DiagramGraph g;
    g.vertices = {{"root", VertexKind::Star},
                  {"testpt", VertexKind::Up},
                  {"u1", VertexKind::Var},
                  {"u2", VertexKind::Var}};
    g.edges = {{0, 1, 0.0, 0}, {2, 1, 3.0, 0}, {3, 1, 3.0, 0}};
    return g;
}

DiagramGraph chain_graph(int r) {
    DiagramGraph g;
    g.vertices = {{"root", VertexKind::Star},
                  {"testpt", VertexKind::Up},
                  {"w", VertexKind::Internal},
                  {"u1", VertexKind::Var}};
    g.edges = {{0, 1, 0.0, 0}, {2, 1, 5.0, r}, {3, 2, 3.0, 0}};
    return g;
}

Contraction trivial_gamma(int n) {
    Contraction g;
    g.n = n;
    for (int i = 0; i < n; ++i) g.components.push_back({i});
    return g;
}

Contraction merged_gamma(int n) {
    Contraction g;
    g.n = n;
    g.components.assign(1, {});
    for (int i = 0; i < n; ++i) g.components[0].push_back(i);
    return g;
}

} // namespace

TEST_CASE("graph validation verdicts") {
    SUBCASE("the one-leg diagram passes") { CHECK(validate_graph(psi_graph()).pass()); }
    SUBCASE("self-loops fail the loopless rule") {
        auto g = psi_graph();
        g.edges.push_back({2, 2, 1.0, 0});
        auto rep = validate_graph(g);
        CHECK_FALSE(rep.pass());
        CHECK_FALSE(rep.find("loopless")->pass);
    }
    SUBCASE("edges into variable vertices fail") {
        auto g = psi_graph();
        g.edges.push_back({1, 2, 1.0, 0});
        auto rep = validate_graph(g);
        CHECK_FALSE(rep.find("var-outgoing-only")->pass);
    }
    SUBCASE("two positive-r edges at a vertex fail") {
        auto g = psi2_graph();
        g.vertices.push_back({"w", VertexKind::Internal});
        g.edges.push_back({2, 4, 1.0, 1});
        g.edges.push_back({3, 4, 1.0, 1});
        auto rep = validate_graph(g);
        CHECK_FALSE(rep.find("positive-r-isolated")->pass);
    }
    SUBCASE("negative-r edges must be detached") {
        auto g = chain_graph(-1);
        auto rep = validate_graph(g);
        CHECK_FALSE(rep.find("negative-r-detached")->pass);
    }
    SUBCASE("the star edge must carry (0,0)") {
        auto g = psi_graph();
        g.edges[0].a = 1.0;
        CHECK_FALSE(validate_graph(g).find("star-edge")->pass);
    }
}

TEST_CASE("contraction of the two-leg diagram") {
    auto g = psi2_graph();
    SUBCASE("identity contraction keeps the multigraph") {
        auto cg = contract_graph(g, trivial_gamma(2), Labeling::all_nil(2));
        CHECK(cg.n_vertices == 4);
        CHECK(cg.multi.size() == 3);
        CHECK(cg.collapsed.size() == 3);
        CHECK(cg.component_in_gamma(0));
        CHECK(cg.component_in_gamma(1));
    }
    SUBCASE("merging both legs sums the parallel labels") {
        auto cg = contract_graph(g, merged_gamma(2), Labeling{{ComponentLabel::Diamond}});
        CHECK(cg.n_vertices == 3);
        CHECK(cg.multi.size() == 3);
        CHECK(cg.collapsed.size() == 2);
        double amax = 0.0;
        for (const auto& e : cg.collapsed) amax = std::max(amax, e.a);
        CHECK(amax == doctest::Approx(6.0));
        CHECK(cg.component_in_gamma(0)); // diamond label puts it in the set
    }
    SUBCASE("merged pair without diamond label leaves the martingale set") {
        auto cg = contract_graph(g, merged_gamma(2), Labeling::all_nil(1));
        CHECK_FALSE(cg.component_in_gamma(0));
    }
}

TEST_CASE("contraction assumption verdicts reproduce the worked diagrams") {
    SUBCASE("one-leg diagram passes with nu = -1/2") {
        auto cg = contract_graph(psi_graph(), trivial_gamma(1), Labeling::all_nil(1));
        CHECK(check_contraction_assumption(cg).pass());
        CHECK(nu_gamma(cg) == doctest::Approx(-0.5));
    }
    SUBCASE("two-leg diagram passes with nu = -1") {
        auto cg = contract_graph(psi2_graph(), trivial_gamma(2), Labeling::all_nil(2));
        CHECK(check_contraction_assumption(cg).pass());
        CHECK(nu_gamma(cg) == doctest::Approx(-1.0));
    }
    SUBCASE("fully contracted two-leg diagram fails item 1") {
        auto cg = contract_graph(psi2_graph(), merged_gamma(2), Labeling{{ComponentLabel::Diamond}});
        auto rep = check_contraction_assumption(cg);
        CHECK_FALSE(rep.pass());
        CHECK_FALSE(rep.find("item1-edge-singularity")->pass);
    }
    SUBCASE("five-kernel chain edge fails item 1 before renormalization") {
        auto cg = contract_graph(chain_graph(0), trivial_gamma(1), Labeling::all_nil(1));
        auto rep = check_contraction_assumption(cg);
        CHECK_FALSE(rep.find("item1-edge-singularity")->pass);
    }
    SUBCASE("the r = -1 chain edge passes the contraction assumption") {
        auto cg = contract_graph(chain_graph(-1), trivial_gamma(1), Labeling::all_nil(1));
        CHECK(check_contraction_assumption(cg).pass());
    }
}

TEST_CASE("nu is monotone in the edge labels and bounded below") {
    auto cg = contract_graph(psi2_graph(), trivial_gamma(2), Labeling::all_nil(2));
    double nu0 = nu_gamma(cg);
    CHECK(nu0 >= -5.0 * cg.n_vertices);
    auto g2 = psi2_graph();
    g2.edges[1].a += 0.5;
    auto cg2 = contract_graph(g2, trivial_gamma(2), Labeling::all_nil(2));
    CHECK(nu_gamma(cg2) < nu0);
}

TEST_CASE("adding an isolated vertex never flips interior subset verdicts") {
    auto g = psi2_graph();
    auto cg = contract_graph(g, trivial_gamma(2), Labeling::all_nil(2));
    REQUIRE(check_contraction_assumption(cg).find("item2-interior-subsets")->pass);
    g.vertices.push_back({"iso", VertexKind::Internal});
    auto cg2 = contract_graph(g, trivial_gamma(2), Labeling::all_nil(2));
    CHECK(check_contraction_assumption(cg2).find("item2-interior-subsets")->pass);
}

TEST_CASE("delta exponents") {
    auto cg = contract_graph(psi_graph(), trivial_gamma(1), Labeling::all_nil(1));
    CHECK(delta_gamma(cg, PFunction{{2}}) == doctest::Approx(0.0));
    CHECK(delta_gamma(cg, PFunction{{PFunction::Inf}}) == doctest::Approx(2.5));
    auto cg2 = contract_graph(psi2_graph(), merged_gamma(2), Labeling::all_nil(1));
    // vertex outside the martingale set: p=2 and p=inf pick up eh powers
    CHECK(delta_gamma(cg2, PFunction{{2}}) == doctest::Approx(2.5));
    CHECK(delta_gamma(cg2, PFunction{{PFunction::Inf}}) == doctest::Approx(5.0));
}

TEST_CASE("admissible p assignments") {
    SUBCASE("a martingale-set component excludes p = 1") {
        auto cg = contract_graph(psi_graph(), trivial_gamma(1), Labeling::all_nil(1));
        auto ps = admissible_p_functions(cg);
        REQUIRE(ps.size() == 2);
        CHECK(ps[0].p[0] != 1);
        CHECK(ps[1].p[0] != 1);
    }
    SUBCASE("a down-labelled pair admits only p = 1") {
        auto cg = contract_graph(psi2_graph(), merged_gamma(2), Labeling{{ComponentLabel::Down}});
        auto ps = admissible_p_functions(cg);
        REQUIRE(ps.size() == 1);
        CHECK(ps[0].p[0] == 1);
    }
    SUBCASE("no variable vertices leave the single empty assignment") {
        DiagramGraph g;
        g.vertices = {{"root", VertexKind::Star}, {"testpt", VertexKind::Up}};
        g.edges = {{0, 1, 0.0, 0}};
        Contraction empty;
        empty.n = 0;
        auto cg = contract_graph(g, empty, Labeling::all_nil(0));
        auto ps = admissible_p_functions(cg);
        REQUIRE(ps.size() == 1);
        CHECK(ps[0].m() == 0);
    }
}

TEST_CASE("predicted bound matches the worked scalings") {
    SUBCASE("one-leg diagram: (lambda v eh)^(-1/2) (1 + eps^(5/2-kappa) eh^(-5/2))") {
        auto cg = contract_graph(psi_graph(), trivial_gamma(1), Labeling::all_nil(1));
        double lambda = 0.5, eps = 0.125, eh = 0.25, kappa = 0.01;
        auto b = predicted_bound(cg, lambda, eps, eh, kappa);
        CHECK(b.nu == doctest::Approx(-0.5));
        REQUIRE(b.terms.size() == 2);
        double expect = std::pow(lambda, -0.5) *
                        (1.0 + std::pow(eps, 2.5 - kappa) * std::pow(eh, -2.5));
        CHECK(b.total == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("softened contracted pair scales as eps^(2a - 7/2)") {
        for (double a : {2.0, 2.2, 2.4}) {
            DiagramGraph g = psi2_graph();
            g.edges[1].a = a;
            g.edges[2].a = a;
            auto cg = contract_graph(g, merged_gamma(2), Labeling{{ComponentLabel::Diamond}});
            REQUIRE(check_contraction_assumption(cg).pass()); // a < 5/2
            double eps = 0.125, eh = 0.25, lambda = 0.5;
            // leading term: p = 2 on the single component; with the softening
            // prefactor eps^{2(a-3)} the total eps power is 2a - 7/2
            auto b1 = predicted_bound(cg, lambda, eps, eh);
            auto b2 = predicted_bound(cg, lambda, eps / 2, eh);
            double lead1 = 0.0, lead2 = 0.0;
            for (std::size_t i = 0; i < b1.terms.size(); ++i)
                if (!b1.terms[i].has_inf) {
                    lead1 = b1.terms[i].value * std::pow(eps, 2.0 * (a - 3.0));
                    lead2 = b2.terms[i].value * std::pow(eps / 2, 2.0 * (a - 3.0));
                }
            double slope = std::log(lead1 / lead2) / std::log(2.0);
            CHECK(slope == doctest::Approx(2.0 * a - 3.5));
        }
    }
    SUBCASE("nu >= 0 is a hypothesis error") {
        DiagramGraph g = psi_graph();
        g.edges[1].a = 1.0; // nu = 5 - 2.5 - 1 > 0
        auto cg = contract_graph(g, trivial_gamma(1), Labeling::all_nil(1));
        CHECK_THROWS_AS(predicted_bound(cg, 0.5, 0.125, 0.25), DomainError);
    }
    SUBCASE("as eps -> 0 the bound converges to the inf-free alpha = 0 terms") {
        auto cg = contract_graph(psi_graph(), trivial_gamma(1), Labeling::all_nil(1));
        double lambda = 0.5, eh = 0.25;
        double prev = 1e300;
        for (double eps : {0.125, 0.0625, 0.03125}) {
            auto b = predicted_bound(cg, lambda, eps, eh);
            double limit = std::pow(std::max(lambda, eh), b.nu);
            CHECK(std::abs(b.total - limit) < prev);
            prev = std::abs(b.total - limit);
        }
    }
}

TEST_CASE("sup-assignment alpha floor from the exponent formulas") {
    // for admissible p with a sup slot, alpha >= d + k; likewise whenever a
    // component has size >= 3 (exhaustive over m <= 4)
    const int d = 3;
    const double k = -0.5;
    for (int n = 1; n <= 4; ++n) {
        for (const auto& gamma : contractions(n)) {
            auto singles = singleton_components(gamma);
            for (const auto& p : all_p_functions(gamma.m())) {
                bool admissible = true;
                for (int j = 0; j < gamma.m() && admissible; ++j)
                    if (p.p[j] == 1 &&
                        std::find(singles.begin(), singles.end(), j) != singles.end())
                        admissible = false;
                if (!admissible) continue;
                bool has_inf = std::any_of(p.p.begin(), p.p.end(),
                                           [](int v) { return v == PFunction::Inf; });
                bool has_big = std::any_of(gamma.components.begin(), gamma.components.end(),
                                           [](const auto& c) { return c.size() >= 3; });
                double alpha = exponent_alpha(gamma, p, d, k);
                if (has_inf) CHECK(alpha >= d + k - 1e-12);
                if (has_big) CHECK(alpha >= d + k - 1e-12);
            }
        }
    }
}

TEST_CASE("fixture parsing") {
    SUBCASE("golden fixtures load and reproduce the verdicts") {
        auto fx = load_graph_fixture(std::string(FIXTURES_DIR) + "/psi.graph");
        auto cg = contract_graph(fx.graph, fx.gamma, fx.labels);
        CHECK(nu_gamma(cg) == doctest::Approx(-0.5));
        auto fx2 = load_graph_fixture(std::string(FIXTURES_DIR) + "/psi2_cherry.graph");
        CHECK(fx2.gamma.m() == 1);
        CHECK(fx2.labels.labels[0] == ComponentLabel::Diamond);
    }
    SUBCASE("unknown directives are rejected with a line number") {
        CHECK_THROWS_WITH_AS(parse_graph_fixture("vertex a star\nfrobnicate b\n"),
                             doctest::Contains("line 2"), ConfigError);
    }
    SUBCASE("unknown vertex kinds and labels are rejected") {
        CHECK_THROWS_AS(parse_graph_fixture("vertex a blob\n"), ConfigError);
        CHECK_THROWS_AS(
            parse_graph_fixture("vertex a star\nvertex b up\nvertex c var\nlabel 1 maybe\n"),
            ConfigError);
    }
    SUBCASE("singletons are implied for unmentioned variables") {
        auto fx = parse_graph_fixture("vertex a star\nvertex b up\nvertex u var\nvertex v var\n"
                                      "edge a b a=0 r=0\nedge u b a=1 r=0\nedge v b a=1 r=0\n");
        CHECK(fx.gamma.m() == 2);
    }
}
