// SPDX-License-Identifier: Apache-2.0
//
// cfduplex: cell-free MIMO uplink/downlink spectral-efficiency simulator
// Copyright (C) 2026 the cfduplex authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

#pragma once

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfduplex/geometry.hpp"

namespace cfduplex {

// ---------------------------------------------------------------------------
// Serving clusters
// ---------------------------------------------------------------------------

// Cluster radius: large enough that every UE reaches at least one AP, and that
// an AP at the radius still sees the minimum post-combining pilot SNR under
// the single-slope reference law with the pilot SNR anchored at d0:
//   N * snr_p * (d/d0)^-PL = gamma_min  =>  d = d0 * (N*snr_p/gamma_min)^(1/PL)
// The optional r_o_scale stretches the radius; coverage of every UE is always
// preserved (the max-min AP distance is a hard floor).
inline double compute_r_o(const NetworkGeometry &geom, const SystemConfig &cfg) {
    double max_min_d = 0.0;
    for (int k = 0; k < cfg.num_ues; ++k) {
        double dmin = std::numeric_limits<double>::infinity();
        for (int m = 0; m < cfg.num_aps; ++m)
            dmin = std::min(dmin, geom.ap_ue_dist(m, k));
        max_min_d = std::max(max_min_d, dmin);
    }
    const double snr_ratio = cfg.antennas_per_ap * db_to_lin(cfg.pilot_snr_db) /
                             db_to_lin(cfg.gamma_min_db);
    const double d_snr =
        cfg.simple_pl.d0_m * std::pow(snr_ratio, 1.0 / cfg.simple_pl.exponent);
    return std::max(max_min_d, std::max(max_min_d, d_snr) * cfg.r_o_scale);
}

struct ConnectivityGraph {
    double r_o = 0.0;
    std::vector<std::vector<int>> ue_aps; // per UE: serving APs (ascending)
    std::vector<std::vector<int>> ap_ues; // per AP: served UEs (ascending)
};

inline ConnectivityGraph build_connectivity(const NetworkGeometry &geom,
                                            const SystemConfig &cfg,
                                            double r_o_override = -1.0) {
    ConnectivityGraph c;
    c.r_o = r_o_override > 0.0 ? r_o_override : compute_r_o(geom, cfg);
    c.ue_aps.assign(cfg.num_ues, {});
    c.ap_ues.assign(cfg.num_aps, {});
    for (int m = 0; m < cfg.num_aps; ++m)
        for (int k = 0; k < cfg.num_ues; ++k)
            if (geom.ap_ue_dist(m, k) <= c.r_o) {
                c.ue_aps[k].push_back(m);
                c.ap_ues[m].push_back(k);
            }
    for (int k = 0; k < cfg.num_ues; ++k)
        if (c.ue_aps[k].empty())
            throw std::runtime_error("connectivity: UE " + std::to_string(k) +
                                     " has no serving AP at radius " +
                                     std::to_string(c.r_o));
    return c;
}

// ---------------------------------------------------------------------------
// Conflict graph
// ---------------------------------------------------------------------------

// Vertices are UEs; an edge joins two UEs whose serving clusters intersect.
struct ConflictGraph {
    int n = 0;
    std::vector<std::vector<int>> adj; // sorted, no self loops
    int degree(int v) const { return static_cast<int>(adj[v].size()); }
    bool has_edge(int a, int b) const {
        return std::binary_search(adj[a].begin(), adj[a].end(), b);
    }
    int max_degree() const {
        int d = 0;
        for (int v = 0; v < n; ++v) d = std::max(d, degree(v));
        return d;
    }
};

inline ConflictGraph conflict_graph(const ConnectivityGraph &conn) {
    ConflictGraph g;
    g.n = static_cast<int>(conn.ue_aps.size());
    g.adj.assign(g.n, {});
    // Every pair served by a common AP conflicts; union over APs.
    for (const auto &ues : conn.ap_ues)
        for (std::size_t i = 0; i < ues.size(); ++i)
            for (std::size_t j = i + 1; j < ues.size(); ++j) {
                g.adj[ues[i]].push_back(ues[j]);
                g.adj[ues[j]].push_back(ues[i]);
            }
    for (auto &lst : g.adj) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }
    return g;
}

// ---------------------------------------------------------------------------
// Pilot assignment
// ---------------------------------------------------------------------------

struct PilotAssignment {
    int tau_p = 0;             // number of pilots used
    std::vector<int> pilot_of; // per UE, 0-based pilot index in [0, tau_p)

    bool shares_pilot(int a, int b) const { return pilot_of[a] == pilot_of[b]; }

    // UEs on the same pilot as k, excluding k itself.
    std::vector<int> copilots(int k) const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(pilot_of.size()); ++i)
            if (i != k && pilot_of[i] == pilot_of[k]) out.push_back(i);
        return out;
    }
};

// Greedy saturation-order coloring of the conflict graph. Vertex choice:
// highest saturation (distinct neighbor colors), then highest degree, then a
// seeded random pick. Color choice: among colors absent from the neighborhood
// prefer the least-used one (ties to the lowest index); open a new color only
// when none fits. The color count is the pilot length tau_p.
inline PilotAssignment color_graph(const ConflictGraph &g, std::uint64_t seed) {
    const int n = g.n;
    PilotAssignment pa;
    pa.pilot_of.assign(n, -1);
    if (n == 0) return pa;

    Rng rng(derive_seed(seed, 0, /*stream=*/3));
    std::vector<std::vector<bool>> neigh_color(n); // [v][c]: c seen among neighbors
    std::vector<int> saturation(n, 0);
    std::vector<int> usage; // per color
    int colors = 0;

    for (int step = 0; step < n; ++step) {
        // Stage 1: pick the vertex to color.
        int best_sat = -1, best_deg = -1;
        std::vector<int> ties;
        for (int v = 0; v < n; ++v) {
            if (pa.pilot_of[v] >= 0) continue;
            const int s = saturation[v], d = g.degree(v);
            if (s > best_sat || (s == best_sat && d > best_deg)) {
                best_sat = s;
                best_deg = d;
                ties.assign(1, v);
            } else if (s == best_sat && d == best_deg) {
                ties.push_back(v);
            }
        }
        const int v = ties.size() == 1 ? ties[0] : ties[rng.index(ties.size())];

        // Stage 2: pick its color.
        int chosen = -1, chosen_usage = -1;
        for (int c = 0; c < colors; ++c) {
            if (c < static_cast<int>(neigh_color[v].size()) && neigh_color[v][c])
                continue;
            if (chosen < 0 || usage[c] < chosen_usage) {
                chosen = c;
                chosen_usage = usage[c];
            }
        }
        if (chosen < 0) {
            chosen = colors++;
            usage.push_back(0);
        }
        pa.pilot_of[v] = chosen;
        ++usage[chosen];
        for (int u : g.adj[v]) {
            if (pa.pilot_of[u] >= 0) continue;
            if (static_cast<int>(neigh_color[u].size()) <= chosen)
                neigh_color[u].resize(chosen + 1, false);
            if (!neigh_color[u][chosen]) {
                neigh_color[u][chosen] = true;
                ++saturation[u];
            }
        }
    }
    pa.tau_p = colors;
    return pa;
}

// True when every UE holds a pilot and no AP serves two UEs on the same pilot.
inline bool verify_assignment(const PilotAssignment &pa,
                              const ConnectivityGraph &conn) {
    const int n = static_cast<int>(pa.pilot_of.size());
    if (n != static_cast<int>(conn.ue_aps.size())) return false;
    for (int k = 0; k < n; ++k)
        if (pa.pilot_of[k] < 0 || pa.pilot_of[k] >= pa.tau_p) return false;
    for (const auto &ues : conn.ap_ues) {
        std::vector<int> seen;
        for (int k : ues) {
            if (std::find(seen.begin(), seen.end(), pa.pilot_of[k]) != seen.end())
                return false;
            seen.push_back(pa.pilot_of[k]);
        }
    }
    return true;
}

// Baselines for comparison arms.
inline PilotAssignment random_assignment(int num_ues, int tau_p,
                                         std::uint64_t seed) {
    PilotAssignment pa;
    pa.tau_p = tau_p;
    pa.pilot_of.resize(num_ues);
    Rng rng(derive_seed(seed, 0, /*stream=*/4));
    for (int k = 0; k < num_ues; ++k)
        pa.pilot_of[k] = static_cast<int>(rng.index(tau_p));
    return pa;
}

inline PilotAssignment orthogonal_assignment(int num_ues) {
    PilotAssignment pa;
    pa.tau_p = num_ues;
    pa.pilot_of.resize(num_ues);
    for (int k = 0; k < num_ues; ++k) pa.pilot_of[k] = k;
    return pa;
}

// Unit-norm DFT pilot book (tau_p x tau_p, orthonormal columns). Only the
// Monte Carlo validation path materializes actual pilot sequences.
inline Eigen::MatrixXcd pilot_book(int tau_p) {
    Eigen::MatrixXcd phi(tau_p, tau_p);
    const double w = 2.0 * M_PI / tau_p;
    for (int t = 0; t < tau_p; ++t)
        for (int l = 0; l < tau_p; ++l)
            phi(t, l) = std::polar(1.0 / std::sqrt(double(tau_p)), -w * t * l);
    return phi;
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

// CSV `ue,pilot` with 0-based UE ids and 1-based pilot ids.
inline void write_pilots_csv(std::ostream &os, const PilotAssignment &pa) {
    os << "ue,pilot\n";
    for (std::size_t k = 0; k < pa.pilot_of.size(); ++k)
        os << k << "," << pa.pilot_of[k] + 1 << "\n";
}

// One `a b` pair per line, a < b.
inline void write_conflict_edges(std::ostream &os, const ConflictGraph &g) {
    for (int a = 0; a < g.n; ++a)
        for (int b : g.adj[a])
            if (a < b) os << a << " " << b << "\n";
}

} // namespace cfduplex
