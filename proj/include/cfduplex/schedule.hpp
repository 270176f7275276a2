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

// Assignment of each AP to uplink reception or downlink transmission for the
// dynamic-TDD operating mode. Greedy assignment repeatedly scores every still
// unscheduled AP on both sides given the committed sets and commits the
// single best (AP, side) pair, so M APs cost O(M^2) candidate evaluations;
// exhaustive search enumerates every partition as a small-network reference.

#include "cfduplex/powerctl.hpp"

namespace cfduplex {

enum class ScheduleEval {
    full, // candidate scoring runs the full power-control alternation
    cheap // candidate scoring uses equal power with optimized combining
};

struct ScheduleResult {
    std::vector<int> ul_aps, dl_aps;
    std::vector<int> is_dl;        // per AP: 0 = uplink, 1 = downlink
    std::vector<double> se_trace;  // committed sum SE after each AP decision
    JointPowerResult joint;        // final full solve on the chosen partition
    double sum_se = 0.0;
    std::uint64_t evaluations = 0; // candidate scorings performed
};

namespace detail {

struct CandidateScore {
    double sum_se = 0.0;
    JointPowerResult joint; // populated only for full evaluations
};

inline CandidateScore score_partition(const std::vector<int> &ul_aps,
                                      const std::vector<int> &dl_aps,
                                      const NetworkGeometry &geom,
                                      const DuplexStats &stats,
                                      const LargeScaleGains &gains,
                                      const PilotAssignment &pilots,
                                      const SystemConfig &cfg, ScheduleEval eval,
                                      const std::optional<PowerAllocation> &warm) {
    const DuplexConfig dux = make_dtdd(ul_aps, dl_aps, geom);
    CandidateScore sc;
    if (eval == ScheduleEval::cheap) {
        const PowerAllocation pw = equal_power(dux, cfg);
        const UplinkWeights w =
            optimal_weights_zf(stats, gains, pilots, dux, pw, cfg);
        sc.sum_se = evaluate_se(stats, gains, pilots, dux, pw, w, cfg).sum_se;
        return sc;
    }
    AlternateOptions opts;
    opts.init = warm;
    sc.joint = alternate_ul_dl(stats, gains, pilots, dux, cfg, opts);
    sc.sum_se = sc.joint.report.sum_se;
    return sc;
}

// Extend a committed power allocation to a partition with one more AP. The
// per-UE uplink powers carry over unchanged; a new downlink AP starts with a
// zero precoder row so the previous operating point is reproduced exactly.
inline PowerAllocation pad_warm_start(const PowerAllocation &committed,
                                      bool new_ap_is_dl, int new_dl_pos) {
    PowerAllocation pw = committed;
    if (new_ap_is_dl && pw.kappa.cols() > 0) {
        Eigen::MatrixXd padded(pw.kappa.rows() + 1, pw.kappa.cols());
        padded.topRows(new_dl_pos) = pw.kappa.topRows(new_dl_pos);
        padded.row(new_dl_pos).setZero();
        padded.bottomRows(pw.kappa.rows() - new_dl_pos) =
            pw.kappa.bottomRows(pw.kappa.rows() - new_dl_pos);
        pw.kappa = std::move(padded);
    }
    return pw;
}

} // namespace detail

// Greedy incremental assignment. Each round scores every unscheduled AP as an
// uplink candidate and as a downlink candidate with the committed sets held
// fixed, then commits the pair with the largest optimized sum SE; on ties the
// uplink branch (and the lower AP index) wins. In full mode the candidate
// alternation is warm-started from the committed powers, which makes the
// committed-SE trace non-decreasing: the previous operating point stays
// reachable for every candidate.
inline ScheduleResult greedy_mode_select(const NetworkGeometry &geom,
                                         const DuplexStats &stats,
                                         const LargeScaleGains &gains,
                                         const PilotAssignment &pilots,
                                         const SystemConfig &cfg,
                                         ScheduleEval eval = ScheduleEval::full) {
    const int m_total = static_cast<int>(geom.ap_xy.rows());
    ScheduleResult res;
    res.is_dl.assign(m_total, 0);

    const bool no_ul = geom.ul_ues.empty();
    const bool no_dl = geom.dl_ues.empty();
    std::optional<PowerAllocation> warm;
    if (no_ul || no_dl) {
        // One-sided traffic: every AP serves the only populated direction.
        for (int m = 0; m < m_total; ++m) {
            res.is_dl[m] = no_ul ? 1 : 0;
            (no_ul ? res.dl_aps : res.ul_aps).push_back(m);
        }
    } else {
        std::vector<int> pending(m_total);
        std::iota(pending.begin(), pending.end(), 0);
        while (!pending.empty()) {
            double best_se = -std::numeric_limits<double>::infinity();
            std::size_t best_pos = 0;
            bool best_is_dl = false;
            detail::CandidateScore best_sc;
            for (std::size_t pi = 0; pi < pending.size(); ++pi) {
                const int m = pending[pi];
                std::vector<int> ul_try = res.ul_aps, dl_try = res.dl_aps;
                ul_try.push_back(m);
                dl_try.push_back(m);
                std::optional<PowerAllocation> warm_ul, warm_dl;
                if (warm) {
                    warm_ul = detail::pad_warm_start(*warm, false, 0);
                    int pos = 0;
                    for (int j : res.dl_aps) pos += j < m ? 1 : 0;
                    warm_dl = detail::pad_warm_start(*warm, true, pos);
                }
                auto as_ul = detail::score_partition(ul_try, res.dl_aps, geom,
                                                     stats, gains, pilots, cfg,
                                                     eval, warm_ul);
                auto as_dl = detail::score_partition(res.ul_aps, dl_try, geom,
                                                     stats, gains, pilots, cfg,
                                                     eval, warm_dl);
                res.evaluations += 2;
                if (as_ul.sum_se > best_se) {
                    best_se = as_ul.sum_se;
                    best_pos = pi;
                    best_is_dl = false;
                    best_sc = std::move(as_ul);
                }
                if (as_dl.sum_se > best_se) {
                    best_se = as_dl.sum_se;
                    best_pos = pi;
                    best_is_dl = true;
                    best_sc = std::move(as_dl);
                }
            }
            const int m = pending[best_pos];
            (best_is_dl ? res.dl_aps : res.ul_aps).push_back(m);
            std::sort((best_is_dl ? res.dl_aps : res.ul_aps).begin(),
                      (best_is_dl ? res.dl_aps : res.ul_aps).end());
            res.is_dl[m] = best_is_dl ? 1 : 0;
            res.se_trace.push_back(best_se);
            if (eval == ScheduleEval::full) warm = best_sc.joint.power;
            pending.erase(pending.begin() + best_pos);
        }
    }

    const DuplexConfig dux = make_dtdd(res.ul_aps, res.dl_aps, geom);
    // Resolve the chosen partition from the committed powers so the final
    // operating point keeps everything the candidate scoring already found.
    AlternateOptions opts;
    opts.init = warm;
    res.joint = alternate_ul_dl(stats, gains, pilots, dux, cfg, opts);
    res.sum_se = res.joint.report.sum_se;
    return res;
}

// Exhaustive reference: scores every UL/DL partition of the APs. Partitions
// that starve a populated direction of all APs are still scored (they are
// simply poor), so the maximum is taken over the complete space. Guarded to
// small networks.
inline ScheduleResult exhaustive_mode_select(const NetworkGeometry &geom,
                                             const DuplexStats &stats,
                                             const LargeScaleGains &gains,
                                             const PilotAssignment &pilots,
                                             const SystemConfig &cfg,
                                             ScheduleEval eval = ScheduleEval::full,
                                             int max_aps = 10) {
    const int m_total = static_cast<int>(geom.ap_xy.rows());
    if (m_total > max_aps)
        throw std::invalid_argument(
            "exhaustive_mode_select: network too large to enumerate");
    ScheduleResult res;
    res.is_dl.assign(m_total, 0);
    double best = -std::numeric_limits<double>::infinity();
    std::uint64_t best_mask = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << m_total); ++mask) {
        std::vector<int> ul, dl;
        for (int m = 0; m < m_total; ++m)
            ((mask >> m) & 1u ? dl : ul).push_back(m);
        const auto sc = detail::score_partition(ul, dl, geom, stats, gains,
                                                pilots, cfg, eval, {});
        ++res.evaluations;
        if (sc.sum_se > best) {
            best = sc.sum_se;
            best_mask = mask;
        }
    }
    for (int m = 0; m < m_total; ++m)
        ((best_mask >> m) & 1u ? res.dl_aps : res.ul_aps).push_back(m);
    for (int m : res.dl_aps) res.is_dl[m] = 1;
    const DuplexConfig dux = make_dtdd(res.ul_aps, res.dl_aps, geom);
    res.joint = alternate_ul_dl(stats, gains, pilots, dux, cfg);
    res.sum_se = res.joint.report.sum_se;
    return res;
}

inline void write_schedule_csv(std::ostream &os, const ScheduleResult &res) {
    os << "ap,mode\n";
    for (std::size_t m = 0; m < res.is_dl.size(); ++m)
        os << m << ',' << (res.is_dl[m] ? "dl" : "ul") << '\n';
}

inline void write_se_trace_csv(std::ostream &os, const std::vector<double> &trace) {
    os << "step,sum_se\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        os << i << ',' << trace[i] << '\n';
}

} // namespace cfduplex
