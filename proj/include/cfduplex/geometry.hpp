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
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "cfduplex/config.hpp"
#include "cfduplex/rng.hpp"

namespace cfduplex {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct NetworkGeometry {
    MatrixXd ap_xy; // M x 2
    MatrixXd ue_xy; // K x 2
    std::vector<int> ul_ues; // ascending UE indices transmitting uplink
    std::vector<int> dl_ues; // ascending UE indices receiving downlink
    std::vector<bool> is_ul; // per-UE direction flag

    double ap_ue_dist(int m, int k) const {
        return std::max(kMinDistanceM, (ap_xy.row(m) - ue_xy.row(k)).norm());
    }
    double ap_ap_dist(int m, int j) const {
        return std::max(kMinDistanceM, (ap_xy.row(m) - ap_xy.row(j)).norm());
    }
    double ue_ue_dist(int a, int b) const {
        return std::max(kMinDistanceM, (ue_xy.row(a) - ue_xy.row(b)).norm());
    }
};

// APs on a ceil(sqrt(M))-column grid, filled row-major, each AP at its cell
// center; UEs i.i.d. uniform over the square. The first floor(ul_fraction*K)
// entries of a seeded shuffle become uplink UEs, the rest downlink.
inline NetworkGeometry generate_geometry(const SystemConfig &cfg,
                                         std::uint64_t seed) {
    const int m_total = cfg.num_aps;
    const int k_total = cfg.num_ues;
    const int cols = static_cast<int>(std::ceil(std::sqrt(double(m_total))));
    const int rows = (m_total + cols - 1) / cols;
    const double sx = cfg.area_side_m / cols;
    const double sy = cfg.area_side_m / rows;

    NetworkGeometry g;
    g.ap_xy.resize(m_total, 2);
    for (int m = 0; m < m_total; ++m) {
        const int r = m / cols, c = m % cols;
        g.ap_xy(m, 0) = (c + 0.5) * sx;
        g.ap_xy(m, 1) = (r + 0.5) * sy;
    }

    Rng rng(derive_seed(seed, 0, /*stream=*/1));
    g.ue_xy.resize(k_total, 2);
    for (int k = 0; k < k_total; ++k) {
        g.ue_xy(k, 0) = rng.uniform(0.0, cfg.area_side_m);
        g.ue_xy(k, 1) = rng.uniform(0.0, cfg.area_side_m);
    }

    std::vector<int> order(k_total);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const int n_ul = cfg.num_ul_ues();
    g.is_ul.assign(k_total, false);
    for (int i = 0; i < n_ul; ++i) g.is_ul[order[i]] = true;
    for (int k = 0; k < k_total; ++k)
        (g.is_ul[k] ? g.ul_ues : g.dl_ues).push_back(k);
    return g;
}

// ---------------------------------------------------------------------------
// Large-scale gains
// ---------------------------------------------------------------------------

struct LargeScaleGains {
    MatrixXd beta;     // M x K link gains (half-duplex array)
    MatrixXd beta_ul;  // M x K gains seen by the receive array (full duplex)
    MatrixXd beta_dl;  // M x K gains seen by the transmit array (full duplex)
    MatrixXd zeta_inap; // M x M AP->AP residual levels; diagonal zero
    VectorXd zeta_si;   // per-AP self-interference residual level
    MatrixXd eps_ue;    // K x K UE->UE cross gains (row: victim, col: source)
    MatrixXd dist_ap_ue; // M x K distances [m]
};

// Shadowed three-slope gains plus flat (optionally distance-scaled) cross-link
// levels. Shadowing is drawn i.i.d. per (m, k) in row-major order and applied
// on the far slope only, unless shadow_all_slopes is set. The two arrays of a
// full-duplex AP are co-located, so beta_ul and beta_dl share one realization.
inline LargeScaleGains large_scale_fading(const NetworkGeometry &geom,
                                          const SystemConfig &cfg,
                                          std::uint64_t seed) {
    const int m_total = cfg.num_aps;
    const int k_total = cfg.num_ues;
    LargeScaleGains g;
    g.beta.resize(m_total, k_total);
    g.dist_ap_ue.resize(m_total, k_total);

    Rng rng(derive_seed(seed, 0, /*stream=*/2));
    for (int m = 0; m < m_total; ++m) {
        for (int k = 0; k < k_total; ++k) {
            const double d = geom.ap_ue_dist(m, k);
            g.dist_ap_ue(m, k) = d;
            double pl_db = three_slope_pl_db(d, cfg.pathloss_threeslope);
            const bool shadowed = cfg.shadow_all_slopes || d > cfg.pathloss_threeslope.d1_m;
            if (shadowed && cfg.shadow_sigma_db > 0.0)
                pl_db += cfg.shadow_sigma_db * rng.normal();
            g.beta(m, k) = db_to_lin(pl_db);
        }
    }
    g.beta_ul = g.beta;
    g.beta_dl = g.beta;

    const double n0 = cfg.noise_w();
    const double inap_level = db_to_lin(cfg.inai_rel_noise_db) * n0;
    g.zeta_inap = MatrixXd::Zero(m_total, m_total);
    if (m_total > 1) {
        double ref_gain = 0.0;
        if (cfg.inai_distance_scaled) {
            // Normalize by the mean pairwise path-loss gain so the configured
            // level still describes the average AP pair.
            int cnt = 0;
            for (int m = 0; m < m_total; ++m)
                for (int j = 0; j < m_total; ++j)
                    if (j != m) {
                        ref_gain += db_to_lin(
                            three_slope_pl_db(geom.ap_ap_dist(m, j), cfg.pathloss_threeslope));
                        ++cnt;
                    }
            ref_gain /= cnt;
        }
        for (int m = 0; m < m_total; ++m)
            for (int j = 0; j < m_total; ++j) {
                if (j == m) continue;
                double level = inap_level;
                if (cfg.inai_distance_scaled)
                    level *= db_to_lin(three_slope_pl_db(geom.ap_ap_dist(m, j),
                                                         cfg.pathloss_threeslope)) /
                             ref_gain;
                g.zeta_inap(m, j) = level;
            }
    }
    g.zeta_si = VectorXd::Constant(m_total, db_to_lin(cfg.irai_rel_noise_db) * n0);

    // UE->UE cross gains follow the same slope law without shadowing.
    g.eps_ue = MatrixXd::Zero(k_total, k_total);
    for (int a = 0; a < k_total; ++a)
        for (int b = 0; b < k_total; ++b) {
            if (a == b) continue;
            g.eps_ue(a, b) =
                db_to_lin(three_slope_pl_db(geom.ue_ue_dist(a, b), cfg.pathloss_threeslope));
        }
    return g;
}

} // namespace cfduplex
