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

#include <stdexcept>

#include <Eigen/Dense>

#include "cfduplex/config.hpp"
#include "cfduplex/pilot.hpp"

namespace cfduplex {

// Per-link MMSE estimation statistics. With pilot-group sum
//   S_mk = tau_p * sum_{n in P(k)} E_p,n * beta_mn + N0
// the scaling coefficient is c_mk = 1/S_mk, the estimate variance is
// alpha2_mk = c_mk * tau_p * E_p,k * beta_mk^2, and resid = beta - alpha2 is
// the estimation-error variance. All matrices are M x K.
struct EstimateStats {
    Eigen::MatrixXd c;
    Eigen::MatrixXd alpha2;
    Eigen::MatrixXd alpha;  // elementwise sqrt(alpha2), the coherent amplitude
    Eigen::MatrixXd resid;  // beta - alpha2 >= 0
};

inline EstimateStats estimation_coefficients(const Eigen::MatrixXd &beta,
                                             const PilotAssignment &pilots,
                                             const SystemConfig &cfg) {
    const int m_total = static_cast<int>(beta.rows());
    const int k_total = static_cast<int>(beta.cols());
    if (static_cast<int>(pilots.pilot_of.size()) != k_total)
        throw std::invalid_argument("estimation: pilot table does not match K");
    if (!beta.allFinite())
        throw std::invalid_argument("estimation: non-finite link gains");

    // Pilot-group received power per (AP, pilot), shared by all group members.
    Eigen::MatrixXd group(m_total, pilots.tau_p);
    group.setConstant(cfg.noise_w());
    for (int k = 0; k < k_total; ++k)
        group.col(pilots.pilot_of[k]) +=
            pilots.tau_p * cfg.pilot_power_w(k) * beta.col(k);

    EstimateStats st;
    st.c.resize(m_total, k_total);
    st.alpha2.resize(m_total, k_total);
    for (int k = 0; k < k_total; ++k) {
        const double ep = pilots.tau_p * cfg.pilot_power_w(k);
        st.c.col(k) = group.col(pilots.pilot_of[k]).cwiseInverse();
        st.alpha2.col(k) =
            ep * st.c.col(k).cwiseProduct(beta.col(k).cwiseProduct(beta.col(k)));
    }
    st.alpha = st.alpha2.cwiseSqrt();
    st.resid = (beta - st.alpha2).cwiseMax(0.0);
    return st;
}

// Normalized estimation error (beta - alpha2)/beta in [0, 1], per link.
inline Eigen::MatrixXd nmse(const EstimateStats &st, const Eigen::MatrixXd &beta) {
    return st.resid.cwiseQuotient(beta.cwiseMax(1e-300));
}

// Stats for the receiving and transmitting arrays. Half duplex has one array,
// so both members are computed from the same gains; full duplex evaluates the
// two arrays' gains separately.
struct DuplexStats {
    EstimateStats ul;
    EstimateStats dl;
};

enum class DuplexMode { dtdd, fd };

inline DuplexStats make_duplex_stats(const LargeScaleGains &gains,
                                     const PilotAssignment &pilots,
                                     const SystemConfig &cfg, DuplexMode mode) {
    DuplexStats ds;
    if (mode == DuplexMode::dtdd) {
        ds.ul = estimation_coefficients(gains.beta, pilots, cfg);
        ds.dl = ds.ul;
    } else {
        ds.ul = estimation_coefficients(gains.beta_ul, pilots, cfg);
        ds.dl = estimation_coefficients(gains.beta_dl, pilots, cfg);
    }
    return ds;
}

} // namespace cfduplex
