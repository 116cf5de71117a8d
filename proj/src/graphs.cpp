#include "martint/graphs.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace martint {

int DiagramGraph::star() const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
        if (vertices[i].kind == VertexKind::Star) return static_cast<int>(i);
    return -1;
}

int DiagramGraph::up() const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
        if (vertices[i].kind == VertexKind::Up) return static_cast<int>(i);
    return -1;
}

std::vector<int> DiagramGraph::var_vertices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < vertices.size(); ++i)
        if (vertices[i].kind == VertexKind::Var) out.push_back(static_cast<int>(i));
    return out;
}

int DiagramGraph::vertex_index(const std::string& name) const {
    for (std::size_t i = 0; i < vertices.size(); ++i)
        if (vertices[i].name == name) return static_cast<int>(i);
    return -1;
}

CheckReport validate_graph(const DiagramGraph& g) {
    CheckReport rep;
    auto add = [&](const std::string& rule, bool pass, const std::string& detail = "") {
        rep.items.push_back(CheckItem{rule, pass, detail});
    };

    int star = g.star(), up = g.up();
    add("one-star", star >= 0, star < 0 ? "no star vertex" : "");
    add("one-up", up >= 0, up < 0 ? "no up vertex" : "");
    if (star < 0 || up < 0) return rep;

    bool loop_ok = true;
    std::string loop_detail;
    for (const auto& e : g.edges)
        if (e.from == e.to) {
            loop_ok = false;
            loop_detail = "self-loop at " + g.vertices[e.from].name;
        }
    add("loopless", loop_ok, loop_detail);

    // weak connectivity
    {
        std::vector<char> seen(g.vertices.size(), 0);
        std::vector<int> stack{star};
        seen[star] = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (const auto& e : g.edges) {
                int o = -1;
                if (e.from == v) o = e.to;
                if (e.to == v) o = e.from;
                if (o >= 0 && !seen[o]) {
                    seen[o] = 1;
                    stack.push_back(o);
                }
            }
        }
        bool conn = std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
        add("weakly-connected", conn, conn ? "" : "unreachable vertex present");
    }

    // the star edge: exactly one outgoing, to the up vertex, label (0,0)
    {
        int out_deg = 0, target = -1;
        double a = -1;
        int r = 0;
        for (const auto& e : g.edges)
            if (e.from == star) {
                ++out_deg;
                target = e.to;
                a = e.a;
                r = e.r;
            }
        bool ok = out_deg == 1 && target == up && a == 0.0 && r == 0;
        add("star-edge", ok,
            ok ? "" : "star must have exactly one outgoing edge, to the up vertex, labelled (0,0)");
    }

    // var vertices: only outgoing edges
    {
        bool ok = true;
        std::string detail;
        for (const auto& e : g.edges)
            if (g.vertices[e.to].kind == VertexKind::Var) {
                ok = false;
                detail = "edge into variable vertex " + g.vertices[e.to].name;
            }
        add("var-outgoing-only", ok, detail);
    }

    // every edge containing star has r = 0
    {
        bool ok = true;
        std::string detail;
        for (const auto& e : g.edges)
            if ((e.from == star || e.to == star) && e.r != 0) {
                ok = false;
                detail = "edge " + g.vertices[e.from].name + "->" + g.vertices[e.to].name;
            }
        add("star-edges-r0", ok, detail);
    }

    // at most one positive-r edge incident per vertex
    {
        std::vector<int> pos_count(g.vertices.size(), 0);
        for (const auto& e : g.edges)
            if (e.r > 0) {
                ++pos_count[e.from];
                ++pos_count[e.to];
            }
        bool ok = true;
        std::string detail;
        for (std::size_t v = 0; v < g.vertices.size(); ++v)
            if (pos_count[v] > 1) {
                ok = false;
                detail = "vertex " + g.vertices[v].name;
            }
        add("positive-r-isolated", ok, detail);
    }

    // negative-r edges have otherwise isolated endpoints
    {
        bool ok = true;
        std::string detail;
        for (std::size_t i = 0; i < g.edges.size(); ++i) {
            if (g.edges[i].r >= 0) continue;
            for (std::size_t j = 0; j < g.edges.size(); ++j) {
                if (i == j) continue;
                const auto& e = g.edges[i];
                const auto& f = g.edges[j];
                if (f.from == e.from || f.to == e.from || f.from == e.to || f.to == e.to) {
                    ok = false;
                    detail = "negative edge " + g.vertices[e.from].name + "->" +
                             g.vertices[e.to].name + " shares vertex with another edge";
                }
            }
        }
        add("negative-r-detached", ok, detail);
    }

    // labels: a >= 0
    {
        bool ok = true;
        for (const auto& e : g.edges)
            if (e.a < 0.0) ok = false;
        add("nonnegative-a", ok);
    }
    return rep;
}

ContractedGraph contract_graph(const DiagramGraph& g, const Contraction& gamma,
                               const Labeling& labels, int s_total) {
    auto vars = g.var_vertices();
    gamma.validate();
    if (gamma.n != static_cast<int>(vars.size()))
        throw ConfigError("contract_graph: contraction does not cover the variable vertices");
    if (static_cast<int>(labels.labels.size()) != gamma.m())
        throw ConfigError("contract_graph: labeling size mismatch");

    ContractedGraph cg;
    cg.base = g;
    cg.gamma = gamma;
    cg.labels = labels;
    cg.s_total = s_total;
    cg.vertex_map.assign(g.vertices.size(), -1);

    // non-var vertices map to themselves first, then one vertex per component
    for (std::size_t v = 0; v < g.vertices.size(); ++v)
        if (g.vertices[v].kind != VertexKind::Var) {
            cg.vertex_map[v] = cg.n_vertices;
            cg.kinds.push_back(g.vertices[v].kind);
            ++cg.n_vertices;
        }
    cg.component_vertex.resize(gamma.m());
    for (int j = 0; j < gamma.m(); ++j) {
        cg.component_vertex[j] = cg.n_vertices;
        cg.kinds.push_back(VertexKind::Var);
        for (int i : gamma.components[j]) cg.vertex_map[vars[i]] = cg.n_vertices;
        ++cg.n_vertices;
    }
    cg.star = cg.vertex_map[g.star()];
    cg.up = cg.vertex_map[g.up()];

    for (const auto& e : g.edges)
        cg.multi.push_back(DiagramEdge{cg.vertex_map[e.from], cg.vertex_map[e.to], e.a, e.r});

    // collapse parallel edges; sum a, keep the unique nonzero r
    std::map<std::pair<int, int>, DiagramEdge> simple;
    for (const auto& e : cg.multi) {
        auto key = std::make_pair(e.from, e.to);
        auto it = simple.find(key);
        if (it == simple.end()) {
            simple[key] = e;
        } else {
            it->second.a += e.a;
            if (e.r != 0) {
                if (it->second.r != 0 && it->second.r != e.r)
                    throw ConfigError("contract_graph: conflicting renormalization orders on "
                                      "parallel edges");
                it->second.r = e.r;
            }
        }
    }
    for (auto& [k, e] : simple) cg.collapsed.push_back(e);

    cg.in_gamma_set.assign(cg.n_vertices, 0);
    for (int j = 0; j < gamma.m(); ++j) {
        bool singleton = gamma.components[j].size() == 1;
        bool diamond = labels.labels[j] == ComponentLabel::Diamond;
        if (singleton || diamond) cg.in_gamma_set[cg.component_vertex[j]] = 1;
    }
    return cg;
}

namespace {

struct SubsetSums {
    double internal_a = 0.0;       // sum of a over edges inside the subset
    double up_pos_a_r = 0.0;       // sum over positive edges leaving: a + r - 1
    double down_pos_r = 0.0;       // sum over positive edges entering: r
    double incident_no_posdown_a = 0.0;
    double up_pos_r = 0.0;
    double down_pos_rm1 = 0.0;
};

SubsetSums subset_sums(const ContractedGraph& cg, const std::vector<char>& in) {
    SubsetSums s;
    for (const auto& e : cg.collapsed) {
        bool f = in[e.from], t = in[e.to];
        bool incident = f || t;
        if (f && t) s.internal_a += e.a;
        if (e.r > 0) {
            if (f) {
                s.up_pos_a_r += e.a + e.r - 1;
                s.up_pos_r += e.r;
            }
            if (t) {
                s.down_pos_r += e.r;
                s.down_pos_rm1 += e.r - 1;
            }
        }
        bool pos_down = (e.r > 0) && t;
        if (incident && !pos_down) s.incident_no_posdown_a += e.a;
    }
    return s;
}

std::string subset_name(const ContractedGraph& cg, const std::vector<char>& in) {
    std::string s = "{";
    for (int v = 0; v < cg.n_vertices; ++v)
        if (in[v]) {
            if (s.size() > 1) s += ",";
            s += std::to_string(v);
        }
    return s + "}";
}

} // namespace

CheckReport check_contraction_assumption(const ContractedGraph& cg) {
    if (cg.n_vertices > 12) throw GuardError("check_contraction_assumption: more than 12 vertices");
    CheckReport rep;
    const double shalf = cg.s_total / 2.0;

    // item 1: per collapsed edge
    {
        bool ok = true;
        std::string detail;
        for (const auto& e : cg.collapsed) {
            double lhs = e.a + std::min(e.r, 0);
            if (!(lhs < cg.s_total)) {
                ok = false;
                detail = "edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                         ": a_hat + (r and 0) = " + std::to_string(lhs);
            }
        }
        rep.items.push_back(CheckItem{"item1-edge-singularity", ok, detail});
    }

    bool ok2 = true, ok3 = true, ok4 = true;
    std::string d2, d3, d4;
    std::vector<char> in(cg.n_vertices, 0);
    const int n = cg.n_vertices;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        int size = 0, gamma_count = 0;
        bool has_star = false, has_up = false;
        for (int v = 0; v < n; ++v) {
            bool inside = (mask >> v) & 1;
            in[v] = inside;
            if (inside) {
                ++size;
                if (cg.in_gamma_set[v]) ++gamma_count;
                if (v == cg.star) has_star = true;
                if (v == cg.up) has_up = true;
            }
        }
        auto s = subset_sums(cg, in);

        if (!has_star && size >= 3) {
            double rhs = (2.0 * size - gamma_count - 1.0 - (gamma_count == 0 ? 1.0 : 0.0)) * shalf;
            if (!(s.internal_a < rhs) && ok2) {
                ok2 = false;
                d2 = "subset " + subset_name(cg, in) + ": " + std::to_string(s.internal_a) +
                     " !< " + std::to_string(rhs);
            }
        }
        if (has_star && size >= 2) {
            double lhs = s.internal_a + s.up_pos_a_r - s.down_pos_r;
            double rhs = (2.0 * size - gamma_count) * shalf;
            if (!(lhs < rhs) && ok3) {
                ok3 = false;
                d3 = "subset " + subset_name(cg, in) + ": " + std::to_string(lhs) + " !< " +
                     std::to_string(rhs);
            }
        }
        if (!has_star && !has_up && size >= 1) {
            double lhs = s.incident_no_posdown_a + s.up_pos_r - s.down_pos_rm1;
            double rhs = (2.0 * size - gamma_count) * shalf;
            if (!(lhs > rhs) && ok4) {
                ok4 = false;
                d4 = "subset " + subset_name(cg, in) + ": " + std::to_string(lhs) + " !> " +
                     std::to_string(rhs);
            }
        }
    }
    rep.items.push_back(CheckItem{"item2-interior-subsets", ok2, d2});
    rep.items.push_back(CheckItem{"item3-star-subsets", ok3, d3});
    rep.items.push_back(CheckItem{"item4-integrability", ok4, d4});
    return rep;
}

double nu_gamma(const ContractedGraph& cg) {
    int n_free = 0;
    for (int v = 0; v < cg.n_vertices; ++v)
        if (v != cg.star && v != cg.up) ++n_free;
    int gamma_size = 0;
    for (int v = 0; v < cg.n_vertices; ++v)
        if (cg.in_gamma_set[v]) ++gamma_size;
    double a_sum = 0.0;
    for (const auto& e : cg.collapsed) a_sum += e.a;
    return cg.s_total * n_free - 0.5 * cg.s_total * gamma_size - a_sum;
}

double delta_gamma(const ContractedGraph& cg, const PFunction& p) {
    if (p.m() != cg.gamma.m()) throw ConfigError("delta_gamma: p-function size mismatch");
    int inf_out = 0, inf_in = 0, two_out = 0;
    for (int j = 0; j < p.m(); ++j) {
        bool in_gamma = cg.component_in_gamma(j);
        if (p.p[j] == PFunction::Inf) {
            if (in_gamma)
                ++inf_in;
            else
                ++inf_out;
        } else if (p.p[j] == 2 && !in_gamma) {
            ++two_out;
        }
    }
    return 0.5 * cg.s_total * (2 * inf_out + inf_in + two_out);
}

std::vector<PFunction> admissible_p_functions(const ContractedGraph& cg) {
    const int m = cg.gamma.m();
    if (m > 8) throw GuardError("admissible_p_functions: more than 8 components");
    std::vector<PFunction> out;
    for (auto& p : all_p_functions(m)) {
        bool ok = true;
        for (int j = 0; j < m && ok; ++j) {
            if (p.p[j] == 1 && cg.component_in_gamma(j)) ok = false;
            if (cg.labels.labels[j] == ComponentLabel::Down && p.p[j] != 1) ok = false;
        }
        if (ok) out.push_back(std::move(p));
    }
    return out;
}

PredictedBound predicted_bound(const ContractedGraph& cg, double lambda, double eps, double eh,
                               double kappa, int d, double k) {
    PredictedBound out;
    out.nu = nu_gamma(cg);
    if (!(out.nu < 0.0))
        throw DomainError("predicted_bound: nu_gamma must be negative, got " +
                          std::to_string(out.nu));
    const double le = std::max(lambda, eh);
    double total = 0.0;
    for (const auto& p : admissible_p_functions(cg)) {
        BoundTerm term;
        term.p = p;
        term.alpha = exponent_alpha(cg.gamma, p, d, k);
        term.delta = delta_gamma(cg, p);
        term.has_inf =
            std::any_of(p.p.begin(), p.p.end(), [](int v) { return v == PFunction::Inf; });
        double ae = term.alpha - (term.has_inf ? kappa : 0.0);
        term.value = std::pow(le, out.nu) * std::pow(eps, ae) * std::pow(eh, -term.delta);
        total += term.value;
        out.terms.push_back(std::move(term));
    }
    out.total = total;
    return out;
}

// ---- fixtures ------------------------------------------------------------------

GraphFixture parse_graph_fixture(const std::string& text) {
    GraphFixture fx;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::vector<int>> contract_lines; // var indices (within var order)
    std::vector<std::pair<int, ComponentLabel>> label_lines;

    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word) || word[0] == '#') continue;
        if (word == "vertex") {
            std::string name, kind;
            if (!(ls >> name >> kind))
                throw ConfigError("line " + std::to_string(lineno) + ": vertex needs name and kind");
            VertexKind k;
            if (kind == "star")
                k = VertexKind::Star;
            else if (kind == "up")
                k = VertexKind::Up;
            else if (kind == "var")
                k = VertexKind::Var;
            else if (kind == "internal")
                k = VertexKind::Internal;
            else
                throw ConfigError("line " + std::to_string(lineno) + ": unknown vertex kind '" +
                                  kind + "'");
            fx.graph.vertices.push_back(DiagramVertex{name, k});
        } else if (word == "edge") {
            std::string from, to, akv, rkv;
            if (!(ls >> from >> to >> akv >> rkv))
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": edge needs <from> <to> a=<real> r=<int>");
            int fi = fx.graph.vertex_index(from), ti = fx.graph.vertex_index(to);
            if (fi < 0 || ti < 0)
                throw ConfigError("line " + std::to_string(lineno) + ": unknown vertex in edge");
            if (akv.rfind("a=", 0) != 0 || rkv.rfind("r=", 0) != 0)
                throw ConfigError("line " + std::to_string(lineno) + ": expected a=<real> r=<int>");
            DiagramEdge e;
            e.from = fi;
            e.to = ti;
            e.a = std::stod(akv.substr(2));
            e.r = std::stoi(rkv.substr(2));
            fx.graph.edges.push_back(e);
        } else if (word == "contract") {
            std::vector<int> comp;
            std::string name;
            auto vars = fx.graph.var_vertices();
            while (ls >> name) {
                int vi = fx.graph.vertex_index(name);
                if (vi < 0)
                    throw ConfigError("line " + std::to_string(lineno) + ": unknown vertex '" +
                                      name + "'");
                auto it = std::find(vars.begin(), vars.end(), vi);
                if (it == vars.end())
                    throw ConfigError("line " + std::to_string(lineno) + ": '" + name +
                                      "' is not a variable vertex");
                comp.push_back(static_cast<int>(it - vars.begin()));
            }
            if (comp.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty contract line");
            contract_lines.push_back(std::move(comp));
        } else if (word == "label") {
            int idx;
            std::string lab;
            if (!(ls >> idx >> lab))
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": label needs <component-index> <nil|down|diamond>");
            ComponentLabel l;
            if (lab == "nil")
                l = ComponentLabel::Nil;
            else if (lab == "down")
                l = ComponentLabel::Down;
            else if (lab == "diamond")
                l = ComponentLabel::Diamond;
            else
                throw ConfigError("line " + std::to_string(lineno) + ": unknown label '" + lab +
                                  "'");
            label_lines.push_back({idx, l});
        } else {
            throw ConfigError("line " + std::to_string(lineno) + ": unknown directive '" + word +
                              "'");
        }
    }

    // assemble the contraction: explicit components plus singletons, sorted by
    // least element
    const int nv = static_cast<int>(fx.graph.var_vertices().size());
    std::vector<int> assigned(nv, 0);
    std::vector<std::vector<int>> comps;
    for (auto& c : contract_lines) {
        std::sort(c.begin(), c.end());
        for (int i : c) {
            if (assigned[i]) throw ConfigError("contract lines overlap");
            assigned[i] = 1;
        }
        comps.push_back(c);
    }
    for (int i = 0; i < nv; ++i)
        if (!assigned[i]) comps.push_back({i});
    std::sort(comps.begin(), comps.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    fx.gamma.n = nv;
    fx.gamma.components = std::move(comps);
    fx.labels = Labeling::all_nil(fx.gamma.m());
    for (auto [idx, l] : label_lines) {
        if (idx < 1 || idx > fx.gamma.m())
            throw ConfigError("label component index " + std::to_string(idx) + " out of range");
        fx.labels.labels[idx - 1] = l;
    }
    return fx;
}

GraphFixture load_graph_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open graph fixture: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_graph_fixture(ss.str());
}

} // namespace martint
