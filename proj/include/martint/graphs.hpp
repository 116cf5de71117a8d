#pragma once

#include "martint/chaos.hpp"

#include <string>
#include <vector>

namespace martint {

enum class VertexKind { Star, Up, Var, Internal };

struct DiagramVertex {
    std::string name;
    VertexKind kind;
};

struct DiagramEdge {
    int from = -1, to = -1;
    double a = 0.0;
    int r = 0;
};

struct DiagramGraph {
    std::vector<DiagramVertex> vertices;
    std::vector<DiagramEdge> edges;

    int star() const;
    int up() const;
    std::vector<int> var_vertices() const; // in declaration order
    int vertex_index(const std::string& name) const;
};

struct CheckItem {
    std::string rule;
    bool pass = true;
    std::string detail;
};

struct CheckReport {
    std::vector<CheckItem> items;
    bool pass() const {
        for (const auto& i : items)
            if (!i.pass) return false;
        return true;
    }
    const CheckItem* find(const std::string& rule) const {
        for (const auto& i : items)
            if (i.rule == rule) return &i;
        return nullptr;
    }
};

// structural checks plus the label constraints on (a_e, r_e)
CheckReport validate_graph(const DiagramGraph& g);

struct ContractedGraph {
    DiagramGraph base;
    Contraction gamma;   // over the var vertices of base (by var order)
    Labeling labels;     // per component
    std::vector<int> vertex_map;        // base vertex -> contracted vertex
    int n_vertices = 0;
    std::vector<VertexKind> kinds;      // contracted vertex kinds
    int star = -1, up = -1;
    std::vector<int> component_vertex;  // component j -> contracted vertex
    std::vector<DiagramEdge> multi;     // contracted multigraph edges
    std::vector<DiagramEdge> collapsed; // simple graph, a-labels summed
    std::vector<char> in_gamma_set;     // contracted vertex in the martingale set
    int s_total = 5;                    // |s| = d + 2

    bool component_in_gamma(int j) const { return in_gamma_set[component_vertex[j]] != 0; }
};

ContractedGraph contract_graph(const DiagramGraph& g, const Contraction& gamma,
                               const Labeling& labels, int s_total = 5);

// the four subset inequalities on the collapsed simple graph
CheckReport check_contraction_assumption(const ContractedGraph& cg);

double nu_gamma(const ContractedGraph& cg);
double delta_gamma(const ContractedGraph& cg, const PFunction& p);

// all p in {1,2,inf}^m with p^-1(1) disjoint from the martingale set and the
// Down-labelled components forced into p^-1(1)
std::vector<PFunction> admissible_p_functions(const ContractedGraph& cg);

struct BoundTerm {
    PFunction p;
    double alpha = 0.0;
    double delta = 0.0;
    bool has_inf = false;
    double value = 0.0;
};

struct PredictedBound {
    double nu = 0.0;
    std::vector<BoundTerm> terms;
    double total = 0.0;
};

// right-hand side of the master moment bound with unit constants: sum over
// admissible p of (lambda v eh)^nu eps^(alpha - kappa 1_inf) eh^(-delta)
PredictedBound predicted_bound(const ContractedGraph& cg, double lambda, double eps, double eh,
                               double kappa = 0.01, int d = 3, double k = -0.5);

// --- fixture format -----------------------------------------------------------

struct GraphFixture {
    DiagramGraph graph;
    Contraction gamma;  // singletons for var vertices not mentioned
    Labeling labels;    // nil unless overridden
};

GraphFixture parse_graph_fixture(const std::string& text);
GraphFixture load_graph_fixture(const std::string& path);

} // namespace martint
