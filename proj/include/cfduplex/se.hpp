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

#include <complex>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cfduplex/estimation.hpp"
#include "cfduplex/geometry.hpp"

namespace cfduplex {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// ---------------------------------------------------------------------------
// Duplexing arrangement and power state
// ---------------------------------------------------------------------------

// Which APs listen / transmit, and which UEs are uplink / downlink. Half
// duplex (dynamic TDD) keeps the AP sets disjoint; full duplex has every AP in
// both sets and adds residual self-interference.
struct DuplexConfig {
    DuplexMode mode = DuplexMode::dtdd;
    std::vector<int> ul_aps; // ascending AP ids
    std::vector<int> dl_aps; // ascending AP ids
    std::vector<int> ul_ues; // ascending UE ids
    std::vector<int> dl_ues; // ascending UE ids

    int n_ul_antennas(const SystemConfig &cfg) const {
        return mode == DuplexMode::fd ? cfg.n_rx : cfg.antennas_per_ap;
    }
    int n_dl_antennas(const SystemConfig &cfg) const {
        return mode == DuplexMode::fd ? cfg.n_tx : cfg.antennas_per_ap;
    }
};

inline DuplexConfig make_dtdd(std::vector<int> ul_aps, std::vector<int> dl_aps,
                              const NetworkGeometry &geom) {
    DuplexConfig d;
    d.mode = DuplexMode::dtdd;
    d.ul_aps = std::move(ul_aps);
    d.dl_aps = std::move(dl_aps);
    std::sort(d.ul_aps.begin(), d.ul_aps.end());
    std::sort(d.dl_aps.begin(), d.dl_aps.end());
    d.ul_ues = geom.ul_ues;
    d.dl_ues = geom.dl_ues;
    return d;
}

inline DuplexConfig make_fd(int num_aps, const NetworkGeometry &geom) {
    DuplexConfig d;
    d.mode = DuplexMode::fd;
    d.ul_aps.resize(num_aps);
    std::iota(d.ul_aps.begin(), d.ul_aps.end(), 0);
    d.dl_aps = d.ul_aps;
    d.ul_ues = geom.ul_ues;
    d.dl_ues = geom.dl_ues;
    return d;
}

// UL transmit powers (per UL UE, watts) and the DL power-split matrix kappa
// (|dl_aps| x |dl_ues|; row j must satisfy ||kappa_j||^2 <= 1). e_d is the
// per-AP DL budget.
struct PowerAllocation {
    Eigen::VectorXd e_u;
    Eigen::MatrixXd kappa;
    double e_d = 0.0;
};

// Full budget uplink, uniform downlink split: kappa_jn = 1/sqrt(|dl_ues|).
inline PowerAllocation equal_power(const DuplexConfig &dux,
                                   const SystemConfig &cfg) {
    PowerAllocation p;
    p.e_u = Eigen::VectorXd::Constant(dux.ul_ues.size(), cfg.ul_power_max);
    p.e_d = cfg.dl_power_total;
    const int nd = static_cast<int>(dux.dl_ues.size());
    p.kappa = Eigen::MatrixXd::Constant(dux.dl_aps.size(), nd,
                                        nd > 0 ? 1.0 / std::sqrt(double(nd)) : 0.0);
    return p;
}

// Central combining weights, one column per UL UE over the UL APs.
struct UplinkWeights {
    MatrixXcd w; // |ul_aps| x |ul_ues|
};

inline UplinkWeights equal_weights(const DuplexConfig &dux) {
    UplinkWeights w;
    const double v = dux.ul_aps.empty() ? 0.0 : 1.0 / double(dux.ul_aps.size());
    w.w = MatrixXcd::Constant(dux.ul_aps.size(), dux.ul_ues.size(), v);
    return w;
}

// ---------------------------------------------------------------------------
// Uplink SINR (ZF combining, MMSE weighting at the CPU)
// ---------------------------------------------------------------------------

// Denominator components are kept separate so tests and the Monte Carlo
// oracle can compare them term by term. All entries are indexed by position
// in dux.ul_ues. `feasible` is false when the receive array cannot zero-force
// the pilot span (antennas <= tau_p); SINRs are zero in that case.
struct UlSinrTerms {
    Eigen::VectorXd signal, est, mui, iap, noise, sinr;
    bool feasible = true;
};

namespace detail {

// Sum of DL leakage levels seen by each UL AP: for AP m (global id),
//   s_m = sum_{j in dl_aps, j != m} zeta_inap(m, j) * ||kappa_j||^2
//       + [full duplex] zeta_si(m) * ||kappa_m||^2.
// The per-AP row norms of kappa carry the DL UEs' power split.
inline Eigen::VectorXd dl_leakage_per_ap(const LargeScaleGains &gains,
                                         const DuplexConfig &dux,
                                         const PowerAllocation &pw) {
    Eigen::VectorXd row2 = pw.kappa.rowwise().squaredNorm();
    Eigen::VectorXd s(dux.ul_aps.size());
    for (std::size_t mi = 0; mi < dux.ul_aps.size(); ++mi) {
        const int m = dux.ul_aps[mi];
        double acc = 0.0;
        for (std::size_t ji = 0; ji < dux.dl_aps.size(); ++ji) {
            const int j = dux.dl_aps[ji];
            if (j == m) {
                if (dux.mode == DuplexMode::fd)
                    acc += gains.zeta_si(m) * row2(ji);
            } else {
                acc += gains.zeta_inap(m, j) * row2(ji);
            }
        }
        s(mi) = acc;
    }
    return s;
}

} // namespace detail

inline UlSinrTerms ul_sinr_zf(const DuplexStats &stats,
                              const LargeScaleGains &gains,
                              const PilotAssignment &pilots,
                              const DuplexConfig &dux,
                              const PowerAllocation &pw,
                              const UplinkWeights &weights,
                              const SystemConfig &cfg) {
    const int ku = static_cast<int>(dux.ul_ues.size());
    const int mu = static_cast<int>(dux.ul_aps.size());
    UlSinrTerms t;
    t.signal = t.est = t.mui = t.iap = t.noise = t.sinr = Eigen::VectorXd::Zero(ku);
    if (ku == 0 || mu == 0) return t;

    const int n_rx = dux.n_ul_antennas(cfg);
    const int zf_dim = n_rx - pilots.tau_p;
    if (zf_dim < 1) {
        t.feasible = false;
        return t;
    }
    const int n_tx = dux.n_dl_antennas(cfg);
    const double n0 = cfg.noise_w();
    const Eigen::MatrixXd &alpha2 = stats.ul.alpha2;
    const Eigen::MatrixXd &alpha = stats.ul.alpha;
    const Eigen::MatrixXd &resid = stats.ul.resid;
    const Eigen::VectorXd leak = detail::dl_leakage_per_ap(gains, dux, pw);

    for (int ki = 0; ki < ku; ++ki) {
        const int k = dux.ul_ues[ki];
        const VectorXcd wk = weights.w.col(ki);
        std::complex<double> coh = 0.0;
        double est = 0.0, iap = 0.0, noise = 0.0;
        for (int mi = 0; mi < mu; ++mi) {
            const int m = dux.ul_aps[mi];
            const double a2 = alpha2(m, k);
            const double w2 = std::norm(wk(mi));
            coh += std::conj(wk(mi)) * a2;
            double err = 0.0;
            for (int kj = 0; kj < ku; ++kj)
                err += pw.e_u(kj) * resid(m, dux.ul_ues[kj]);
            est += w2 * a2 * err;
            iap += w2 * a2 * leak(mi);
            noise += w2 * a2;
        }
        t.signal(ki) = zf_dim * pw.e_u(ki) * std::norm(coh);
        t.est(ki) = est;
        t.iap(ki) = n_tx * pw.e_d * iap;
        t.noise(ki) = n0 * noise;

        // Coherent co-pilot interference: the combiner of k applied to the
        // estimate of a same-pilot UE i has the deterministic cross gain
        // alpha_mk * alpha_mi, summed over the UL APs.
        double mui = 0.0;
        for (int kj = 0; kj < ku; ++kj) {
            const int i = dux.ul_ues[kj];
            if (i == k || !pilots.shares_pilot(i, k)) continue;
            std::complex<double> cross = 0.0;
            for (int mi = 0; mi < mu; ++mi) {
                const int m = dux.ul_aps[mi];
                cross += std::conj(wk(mi)) * alpha(m, k) * alpha(m, i);
            }
            mui += pw.e_u(kj) * std::norm(cross);
        }
        t.mui(ki) = zf_dim * mui;

        const double den = t.est(ki) + t.mui(ki) + t.iap(ki) + t.noise(ki);
        t.sinr(ki) = den > 0.0 ? t.signal(ki) / den : 0.0;
    }
    return t;
}

// SINR-optimal combining weights per UL UE: w_k = E_k * R_k^{-1} u_k with
// u_k the coherent gain vector [alpha2_mk]_m and R_k the interference
// covariance (co-pilot rank-one terms plus the diagonal estimation-error,
// cross-link and noise terms, scaled to the zero-forcing dimension).
inline UplinkWeights optimal_weights_zf(const DuplexStats &stats,
                                        const LargeScaleGains &gains,
                                        const PilotAssignment &pilots,
                                        const DuplexConfig &dux,
                                        const PowerAllocation &pw,
                                        const SystemConfig &cfg) {
    const int ku = static_cast<int>(dux.ul_ues.size());
    const int mu = static_cast<int>(dux.ul_aps.size());
    UplinkWeights out;
    out.w = MatrixXcd::Zero(mu, ku);
    if (ku == 0 || mu == 0) return out;

    const int n_rx = dux.n_ul_antennas(cfg);
    const int zf_dim = n_rx - pilots.tau_p;
    if (zf_dim < 1) return equal_weights(dux);
    const int n_tx = dux.n_dl_antennas(cfg);
    const double n0 = cfg.noise_w();
    const Eigen::MatrixXd &alpha2 = stats.ul.alpha2;
    const Eigen::MatrixXd &alpha = stats.ul.alpha;
    const Eigen::MatrixXd &resid = stats.ul.resid;
    const Eigen::VectorXd leak = detail::dl_leakage_per_ap(gains, dux, pw);

    for (int ki = 0; ki < ku; ++ki) {
        const int k = dux.ul_ues[ki];
        Eigen::MatrixXd r = Eigen::MatrixXd::Zero(mu, mu);
        Eigen::VectorXd u(mu);
        for (int mi = 0; mi < mu; ++mi) {
            const int m = dux.ul_aps[mi];
            const double a2 = alpha2(m, k);
            u(mi) = a2;
            double err = 0.0;
            for (int kj = 0; kj < ku; ++kj)
                err += pw.e_u(kj) * resid(m, dux.ul_ues[kj]);
            r(mi, mi) = (a2 * (err + n0) + n_tx * pw.e_d * a2 * leak(mi)) / zf_dim;
        }
        for (int kj = 0; kj < ku; ++kj) {
            const int i = dux.ul_ues[kj];
            if (i == k || !pilots.shares_pilot(i, k)) continue;
            Eigen::VectorXd g(mu);
            for (int mi = 0; mi < mu; ++mi) {
                const int m = dux.ul_aps[mi];
                g(mi) = alpha(m, k) * alpha(m, i);
            }
            r += pw.e_u(kj) * g * g.transpose();
        }
        // Scale-normalize before factorizing; weights are scale free.
        const double s = r.diagonal().maxCoeff();
        if (!(s > 0.0) || !r.allFinite()) {
            out.w.col(ki).setConstant(1.0 / mu);
            continue;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(r / s);
        Eigen::VectorXd w = ldlt.solve(u / s);
        if (ldlt.info() != Eigen::Success || !w.allFinite()) {
            out.w.col(ki).setConstant(1.0 / mu);
            continue;
        }
        out.w.col(ki) = (pw.e_u(ki) * w).cast<std::complex<double>>();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Downlink SINR (ZF precoding)
// ---------------------------------------------------------------------------

struct DlSinrTerms {
    Eigen::VectorXd signal, est, mui, iue, sinr;
    double noise = 0.0; // common N0 term
    bool feasible = true;
};

inline DlSinrTerms dl_sinr_zf(const DuplexStats &stats,
                              const LargeScaleGains &gains,
                              const PilotAssignment &pilots,
                              const DuplexConfig &dux,
                              const PowerAllocation &pw,
                              const SystemConfig &cfg) {
    const int kd = static_cast<int>(dux.dl_ues.size());
    const int md = static_cast<int>(dux.dl_aps.size());
    DlSinrTerms t;
    t.signal = t.est = t.mui = t.iue = t.sinr = Eigen::VectorXd::Zero(kd);
    t.noise = cfg.noise_w();
    if (kd == 0 || md == 0) return t;

    const int n_tx = dux.n_dl_antennas(cfg);
    const int zf_dim = n_tx - pilots.tau_p;
    if (zf_dim < 1) {
        t.feasible = false;
        return t;
    }
    const Eigen::MatrixXd &alpha = stats.dl.alpha;
    const Eigen::MatrixXd &resid = stats.dl.resid;
    const Eigen::VectorXd row2 = pw.kappa.rowwise().squaredNorm();

    for (int ni = 0; ni < kd; ++ni) {
        const int n = dux.dl_ues[ni];
        double coh = 0.0, err = 0.0;
        for (int ji = 0; ji < md; ++ji) {
            const int j = dux.dl_aps[ji];
            coh += pw.kappa(ji, ni) * alpha(j, n);
            err += row2(ji) * resid(j, n);
        }
        t.signal(ni) = zf_dim * pw.e_d * coh * coh;
        t.est(ni) = pw.e_d * err;

        double mui = 0.0;
        for (int qi = 0; qi < kd; ++qi) {
            const int q = dux.dl_ues[qi];
            if (q == n || !pilots.shares_pilot(q, n)) continue;
            double cross = 0.0;
            for (int ji = 0; ji < md; ++ji)
                cross += pw.kappa(ji, qi) * alpha(dux.dl_aps[ji], n);
            mui += cross * cross;
        }
        t.mui(ni) = zf_dim * pw.e_d * mui;

        double iue = 0.0;
        for (std::size_t kj = 0; kj < dux.ul_ues.size(); ++kj)
            iue += pw.e_u(kj) * gains.eps_ue(n, dux.ul_ues[kj]);
        t.iue(ni) = iue;

        const double den = t.est(ni) + t.mui(ni) + t.iue(ni) + t.noise;
        t.sinr(ni) = den > 0.0 ? t.signal(ni) / den : 0.0;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Spectral efficiency
// ---------------------------------------------------------------------------

struct SEReport {
    double prelog = 0.0; // (tau - tau_p)/tau
    int tau_p = 0;
    std::vector<int> ul_ues, dl_ues;       // global UE ids
    Eigen::VectorXd ul_sinr, dl_sinr;      // linear SINRs
    Eigen::VectorXd ul_se, dl_se;          // bits/s/Hz, pre-log included
    double ul_sum = 0.0, dl_sum = 0.0, sum_se = 0.0;
    bool ul_feasible = true, dl_feasible = true;
};

inline SEReport make_se_report(const UlSinrTerms &ul, const DlSinrTerms &dl,
                               const DuplexConfig &dux,
                               const PilotAssignment &pilots,
                               const SystemConfig &cfg) {
    SEReport r;
    r.tau_p = pilots.tau_p;
    r.prelog = std::max(0.0, double(cfg.coherence_len - pilots.tau_p) /
                                 double(cfg.coherence_len));
    r.ul_ues = dux.ul_ues;
    r.dl_ues = dux.dl_ues;
    r.ul_sinr = ul.sinr;
    r.dl_sinr = dl.sinr;
    r.ul_feasible = ul.feasible;
    r.dl_feasible = dl.feasible;
    r.ul_se = (r.ul_sinr.array() + 1.0).log() / std::log(2.0) * r.prelog;
    r.dl_se = (r.dl_sinr.array() + 1.0).log() / std::log(2.0) * r.prelog;
    r.ul_sum = r.ul_se.sum();
    r.dl_sum = r.dl_se.sum();
    r.sum_se = r.ul_sum + r.dl_sum;
    return r;
}

// Convenience: closed-form sum SE of a given arrangement and power state.
inline SEReport evaluate_se(const DuplexStats &stats, const LargeScaleGains &gains,
                            const PilotAssignment &pilots, const DuplexConfig &dux,
                            const PowerAllocation &pw, const UplinkWeights &weights,
                            const SystemConfig &cfg) {
    const UlSinrTerms ul = ul_sinr_zf(stats, gains, pilots, dux, pw, weights, cfg);
    const DlSinrTerms dl = dl_sinr_zf(stats, gains, pilots, dux, pw, cfg);
    return make_se_report(ul, dl, dux, pilots, cfg);
}

inline nlohmann::json se_report_to_json(const SEReport &r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["prelog"] = r.prelog;
    j["tau_p"] = r.tau_p;
    j["ul_ues"] = r.ul_ues;
    j["dl_ues"] = r.dl_ues;
    j["ul_sinr"] = std::vector<double>(r.ul_sinr.begin(), r.ul_sinr.end());
    j["dl_sinr"] = std::vector<double>(r.dl_sinr.begin(), r.dl_sinr.end());
    j["ul_se"] = std::vector<double>(r.ul_se.begin(), r.ul_se.end());
    j["dl_se"] = std::vector<double>(r.dl_se.begin(), r.dl_se.end());
    j["ul_sum_se"] = r.ul_sum;
    j["dl_sum_se"] = r.dl_sum;
    j["sum_se"] = r.sum_se;
    j["ul_feasible"] = r.ul_feasible;
    j["dl_feasible"] = r.dl_feasible;
    return j;
}

// CSV rows `trial,ue,direction,sinr,se` (header written by the caller once).
inline void write_se_csv_rows(std::ostream &os, const SEReport &r, long trial) {
    for (std::size_t i = 0; i < r.ul_ues.size(); ++i)
        os << trial << "," << r.ul_ues[i] << ",ul," << r.ul_sinr(i) << ","
           << r.ul_se(i) << "\n";
    for (std::size_t i = 0; i < r.dl_ues.size(); ++i)
        os << trial << "," << r.dl_ues[i] << ",dl," << r.dl_sinr(i) << ","
           << r.dl_se(i) << "\n";
}

inline void write_se_csv_header(std::ostream &os) {
    os << "trial,ue,direction,sinr,se\n";
}

} // namespace cfduplex
