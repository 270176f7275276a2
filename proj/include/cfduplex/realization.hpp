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

#include <vector>

#include <Eigen/Dense>

#include "cfduplex/estimation.hpp"

namespace cfduplex {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// One antenna array's view of a fading realization. Estimates follow from the
// processed pilot observations z, so co-pilot estimates are exactly parallel
// (the property the coherent interference terms rest on):
//   z_m[:, l] = sum_{k: pilot(k)=l} sqrt(tau_p E_p,k) f_mk + CN(0, N0 I)
//   f_hat_mk  = sqrt(tau_p E_p,k) beta_mk c_mk z_m[:, pilot(k)]
struct ArrayRealization {
    std::vector<MatrixXcd> f;     // per AP: antennas x K true channels
    std::vector<MatrixXcd> z;     // per AP: antennas x tau_p pilot observations
    std::vector<MatrixXcd> f_hat; // per AP: antennas x K MMSE estimates
};

// Fading draws for one coherence block. The receive-side and transmit-side
// arrays are drawn independently: in half duplex an AP is only ever read on
// one of the two (the UL/DL AP sets are disjoint), and in full duplex they are
// physically distinct arrays.
struct ChannelRealization {
    int n_rx = 0, n_tx = 0;
    ArrayRealization rx; // source for UL combining
    ArrayRealization tx; // source for DL precoding
    std::vector<MatrixXcd> g_inap; // index m*M+j: AP j -> AP m, n_rx x n_tx
    std::vector<MatrixXcd> g_si;   // per AP self-interference, full duplex only
    MatrixXcd g_ue;                // K x K UE->UE scalars (victim row, source col)
};

namespace detail {

inline void draw_array(ArrayRealization &ar, const Eigen::MatrixXd &beta,
                       const EstimateStats &st, const PilotAssignment &pilots,
                       const SystemConfig &cfg, int n_ant, Rng &rng) {
    const int m_total = static_cast<int>(beta.rows());
    const int k_total = static_cast<int>(beta.cols());
    const double n0 = cfg.noise_w();
    ar.f.resize(m_total);
    ar.z.resize(m_total);
    ar.f_hat.resize(m_total);
    for (int m = 0; m < m_total; ++m) {
        MatrixXcd &f = ar.f[m];
        f.resize(n_ant, k_total);
        for (int k = 0; k < k_total; ++k)
            for (int a = 0; a < n_ant; ++a) f(a, k) = rng.cnormal(beta(m, k));
        MatrixXcd &z = ar.z[m];
        z.resize(n_ant, pilots.tau_p);
        for (int l = 0; l < pilots.tau_p; ++l)
            for (int a = 0; a < n_ant; ++a) z(a, l) = rng.cnormal(n0);
        for (int k = 0; k < k_total; ++k)
            z.col(pilots.pilot_of[k]) +=
                std::sqrt(double(pilots.tau_p) * cfg.pilot_power_w(k)) * f.col(k);
        MatrixXcd &fh = ar.f_hat[m];
        fh.resize(n_ant, k_total);
        for (int k = 0; k < k_total; ++k)
            fh.col(k) = std::sqrt(double(pilots.tau_p) * cfg.pilot_power_w(k)) *
                        beta(m, k) * st.c(m, k) * z.col(pilots.pilot_of[k]);
    }
}

} // namespace detail

inline ChannelRealization draw_realization(const DuplexStats &stats,
                                           const LargeScaleGains &gains,
                                           const PilotAssignment &pilots,
                                           const SystemConfig &cfg,
                                           DuplexMode mode, std::uint64_t seed) {
    ChannelRealization r;
    r.n_rx = mode == DuplexMode::fd ? cfg.n_rx : cfg.antennas_per_ap;
    r.n_tx = mode == DuplexMode::fd ? cfg.n_tx : cfg.antennas_per_ap;
    Rng rng(seed);

    detail::draw_array(r.rx, mode == DuplexMode::fd ? gains.beta_ul : gains.beta,
                       stats.ul, pilots, cfg, r.n_rx, rng);
    detail::draw_array(r.tx, mode == DuplexMode::fd ? gains.beta_dl : gains.beta,
                       stats.dl, pilots, cfg, r.n_tx, rng);

    const int m_total = cfg.num_aps;
    r.g_inap.assign(std::size_t(m_total) * m_total, MatrixXcd());
    for (int m = 0; m < m_total; ++m)
        for (int j = 0; j < m_total; ++j) {
            if (j == m) continue;
            MatrixXcd &g = r.g_inap[std::size_t(m) * m_total + j];
            g.resize(r.n_rx, r.n_tx);
            for (int b = 0; b < r.n_tx; ++b)
                for (int a = 0; a < r.n_rx; ++a)
                    g(a, b) = rng.cnormal(gains.zeta_inap(m, j));
        }
    if (mode == DuplexMode::fd) {
        r.g_si.resize(m_total);
        for (int m = 0; m < m_total; ++m) {
            r.g_si[m].resize(r.n_rx, r.n_tx);
            for (int b = 0; b < r.n_tx; ++b)
                for (int a = 0; a < r.n_rx; ++a)
                    r.g_si[m](a, b) = rng.cnormal(gains.zeta_si(m));
        }
    }

    const int k_total = cfg.num_ues;
    r.g_ue.resize(k_total, k_total);
    r.g_ue.setZero();
    for (int a = 0; a < k_total; ++a)
        for (int b = 0; b < k_total; ++b)
            if (a != b) r.g_ue(a, b) = rng.cnormal(gains.eps_ue(a, b));
    return r;
}

} // namespace cfduplex
