#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gbeta/diagnostics.hpp"
#include "gbeta/experiment.hpp"
#include "gbeta/graph.hpp"
#include "gbeta/model.hpp"
#include "gbeta/population.hpp"

namespace gbeta {

using nlohmann::json;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Population schema: {"n_nodes": int, "subpops": [[int,...],...]}, 1-based.
inline json population_to_json(const Population& pop) {
    return json{{"n_nodes", pop.n_nodes()}, {"subpops", pop.subpops()}};
}

inline Population population_from_json(const json& j) {
    if (!j.contains("n_nodes") || !j.contains("subpops"))
        throw IoError("population json needs n_nodes and subpops");
    return Population(j.at("subpops").get<std::vector<std::vector<int>>>(),
                      j.at("n_nodes").get<int>());
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "beta") return Variant::beta;
    if (s == "brokerage") return Variant::brokerage;
    if (s == "sparse_brokerage") return Variant::sparse_brokerage;
    if (s == "size_dependent") return Variant::size_dependent;
    throw IoError("unknown model variant '" + s + "'");
}

// ModelSpec schema: {"variant": ..., "alpha": float?, "population": {...}}.
inline json model_to_json(const ModelSpec& m) {
    json j{{"variant", variant_name(m.variant())},
           {"population", population_to_json(m.population())}};
    if (m.variant() == Variant::sparse_brokerage) j["alpha"] = m.alpha();
    return j;
}

inline ModelSpec model_from_json(const json& j) {
    Variant v = variant_from_string(j.at("variant").get<std::string>());
    double alpha = j.value("alpha", 0.0);
    return ModelSpec(v, population_from_json(j.at("population")), alpha);
}

// Theta is a flat array: degree parameters first, brokerage last.
inline json theta_to_json(const Theta& t) { return json(t.v); }
inline Theta theta_from_json(const json& j) { return Theta(j.get<std::vector<double>>()); }

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    in >> j;
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

// --------------------------------------------------------------------------
// Graph interchange: edge-list CSV with header i,j (1-based, i < j) plus a
// sidecar JSON {"n_nodes": N} at <csv path>.json.
// --------------------------------------------------------------------------

inline std::string graph_sidecar_path(const std::string& csv_path) { return csv_path + ".json"; }

inline void save_graph_csv(const std::string& csv_path, const Graph& g) {
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot write " + csv_path);
    out << "i,j\n";
    const EdgeIndex& idx = g.index();
    for (std::int64_t m = 0; m < idx.total(); ++m)
        if (g.edge(m)) {
            auto [i, j] = idx.pair(m);
            out << i << ',' << j << '\n';
        }
    write_json_file(graph_sidecar_path(csv_path), json{{"n_nodes", g.n_nodes()}});
}

inline Graph load_graph_csv(const std::string& csv_path, int n_nodes) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(csv_path + ": empty file");
    if (line != "i,j" && line != "i,j\r") throw IoError(csv_path + ": expected header 'i,j'");
    Graph g(n_nodes);
    std::set<std::int64_t> seen;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::istringstream row(line);
        int i = 0, j = 0;
        char comma = 0;
        if (!(row >> i >> comma >> j) || comma != ',')
            throw IoError(csv_path + ": bad row at line " + std::to_string(lineno));
        if (i == j) throw IoError(csv_path + ": self-loop at line " + std::to_string(lineno));
        if (i < 1 || j < 1 || i > n_nodes || j > n_nodes)
            throw IoError(csv_path + ": node id out of range at line " + std::to_string(lineno));
        std::int64_t m = g.index().linear(i, j);
        if (!seen.insert(m).second)
            throw IoError(csv_path + ": duplicate edge at line " + std::to_string(lineno));
        g.set_edge(m, true);
    }
    return g;
}

inline Graph load_graph_csv(const std::string& csv_path) {
    json side = read_json_file(graph_sidecar_path(csv_path));
    return load_graph_csv(csv_path, side.at("n_nodes").get<int>());
}

// --------------------------------------------------------------------------
// Reports
// --------------------------------------------------------------------------

inline json finite_or_string(double v) {
    if (std::isfinite(v)) return json(v);
    return json(v > 0 ? "+inf" : "-inf");
}

inline json dependence_report_to_json(const DependenceReport& rep) {
    json j{{"d_max", rep.d_max},
           {"pi_star_bound", rep.pi_star},
           {"psi_bound", rep.psi.analytic},
           {"psi_empirical_max_flip", rep.psi.empirical_max_flip}};
    if (rep.assumption_b) {
        const AssumptionBReport& b = *rep.assumption_b;
        j["assumption_b1"] = json{{"status", b.b1_holds ? "holds_with" : "violated"},
                                  {"violated_distances", b.b1_violated_l},
                                  {"counts_by_distance", b.counts},
                                  {"envelope_raw", b.b1_envelope_raw},
                                  {"envelope_absorbed", b.b1_envelope_absorbed}};
        j["assumption_b2"] = json{{"tree", b.b2_tree},
                                  {"growth_log_ratio", b.b2_growth_log_ratio},
                                  {"growth_witness", b.b2_growth_witness}};
    }
    if (rep.coupling_bound_valid)
        j["coupling_norm_bound"] = finite_or_string(rep.coupling_bound);
    else
        j["coupling_norm_bound_error"] = rep.coupling_bound_error;
    if (rep.mc_coupling) {
        json rows = json::array();
        for (int i = 0; i < rep.mc_coupling->m_total; ++i) {
            json row = json::array();
            for (int jj = 0; jj < rep.mc_coupling->m_total; ++jj)
                row.push_back(rep.mc_coupling->entry(i, jj));
            rows.push_back(row);
        }
        j["mc_coupling_matrix"] = rows;
        j["mc_coupling_exhaustive"] = rep.mc_coupling->exhaustive;
    }
    return j;
}

inline json summary_to_json(const RateSummary& s) {
    json rows = json::array();
    for (const PerNSummary& r : s.rows) {
        rows.push_back(json{{"n", r.n},
                            {"trials", r.trials},
                            {"converged", r.converged},
                            {"min3_violations", r.min3_violations},
                            {"convergence_rate", r.convergence_rate},
                            {"median_error_sup", r.median_error_sup},
                            {"q1_error_sup", r.q1_error_sup},
                            {"q3_error_sup", r.q3_error_sup},
                            {"median_error_degrees", r.median_error_degrees},
                            {"median_error_brokerage", r.median_error_brokerage},
                            {"median_wall_ms", r.median_wall_ms},
                            {"rate_r", r.rate_r}});
    }
    return json{{"per_n", rows},
                {"r_max_over_min", s.r_max_over_min},
                {"rate_consistent", s.rate_consistent}};
}

inline std::vector<TrialRecord> read_trials_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    std::vector<TrialRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        TrialRecord t;
        char c;
        int conv;
        if (!(row >> t.n >> c >> t.rep >> c >> t.seed >> c >> conv >> c >> t.error_sup >> c >>
              t.error_degrees >> c >> t.error_brokerage >> c >> t.iterations >> c >> t.wall_ms))
            throw IoError(path + ": bad row '" + line + "'");
        t.converged = conv != 0;
        out.push_back(t);
    }
    return out;
}

}  // namespace gbeta
