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

// Sum-SE power control via fractional programming. Both directions follow the
// same pattern: introduce per-UE SINR auxiliaries (varpi), decouple the ratio
// with a quadratic transform (varpi_tilde), then solve the remaining concave
// power step in closed form (uplink) or as a QCQP via consensus ADMM
// (downlink, per-AP sum-power constraints). Objectives are in nats; each
// update is an exact block maximization, so the objective trace never
// decreases (the ADMM step is safeguarded to preserve this under its finite
// consensus tolerance).

#include <optional>

#include "cfduplex/se.hpp"

namespace cfduplex {

// ---------------------------------------------------------------------------
// Uplink
// ---------------------------------------------------------------------------

// The UL SINR of UE k is a linear-fractional function of the power vector:
//   G_k(E) = a(k) E_k,   I_k(E) = sum_k' cross(k, k') E_k' + sigma(k).
// cross collects estimation-error leakage plus (for co-pilot pairs) the
// coherent cross gain; sigma holds the power-independent AP->AP and noise
// floor for the fixed DL split.
struct UlFpCoefficients {
    Eigen::VectorXd a;
    Eigen::MatrixXd cross;
    Eigen::VectorXd sigma;
};

inline UlFpCoefficients build_ul_fp(const DuplexStats &stats,
                                    const LargeScaleGains &gains,
                                    const PilotAssignment &pilots,
                                    const DuplexConfig &dux,
                                    const UplinkWeights &weights,
                                    const PowerAllocation &pw,
                                    const SystemConfig &cfg) {
    const int ku = static_cast<int>(dux.ul_ues.size());
    const int mu = static_cast<int>(dux.ul_aps.size());
    UlFpCoefficients co;
    co.a = Eigen::VectorXd::Zero(ku);
    co.cross = Eigen::MatrixXd::Zero(ku, ku);
    co.sigma = Eigen::VectorXd::Zero(ku);
    if (ku == 0 || mu == 0) return co;
    const int zf_dim = dux.n_ul_antennas(cfg) - pilots.tau_p;
    if (zf_dim < 1) return co;
    const int n_tx = dux.n_dl_antennas(cfg);
    const double n0 = cfg.noise_w();
    const Eigen::VectorXd leak = detail::dl_leakage_per_ap(gains, dux, pw);

    for (int ki = 0; ki < ku; ++ki) {
        const int k = dux.ul_ues[ki];
        std::complex<double> coh = 0.0;
        double floor = 0.0;
        for (int mi = 0; mi < mu; ++mi) {
            const int m = dux.ul_aps[mi];
            const double a2 = stats.ul.alpha2(m, k);
            const double w2 = std::norm(weights.w(mi, ki));
            coh += std::conj(weights.w(mi, ki)) * a2;
            floor += w2 * a2 * (n_tx * pw.e_d * leak(mi) + n0);
            for (int kj = 0; kj < ku; ++kj)
                co.cross(ki, kj) += w2 * a2 * stats.ul.resid(m, dux.ul_ues[kj]);
        }
        co.a(ki) = zf_dim * std::norm(coh);
        co.sigma(ki) = floor;
        for (int kj = 0; kj < ku; ++kj) {
            const int i = dux.ul_ues[kj];
            if (i == k || !pilots.shares_pilot(i, k)) continue;
            std::complex<double> cross = 0.0;
            for (int mi = 0; mi < mu; ++mi) {
                const int m = dux.ul_aps[mi];
                cross += std::conj(weights.w(mi, ki)) * stats.ul.alpha(m, k) *
                         stats.ul.alpha(m, i);
            }
            co.cross(ki, kj) += zf_dim * std::norm(cross);
        }
    }
    return co;
}

// Lagrange-dual reformulation value at (E, varpi); equals sum log(1+SINR)
// whenever varpi holds the exact SINRs.
inline double ul_fp_objective(const UlFpCoefficients &co, const Eigen::VectorXd &e,
                              const Eigen::VectorXd &varpi) {
    const Eigen::VectorXd g = co.a.cwiseProduct(e);
    const Eigen::VectorXd i = co.cross * e + co.sigma;
    double f = 0.0;
    for (int k = 0; k < e.size(); ++k) {
        const double den = g(k) + i(k);
        f += std::log1p(varpi(k)) - varpi(k) +
             (den > 0.0 ? (1.0 + varpi(k)) * g(k) / den : 0.0);
    }
    return f;
}

// Quadratic-transform surrogate (concave in E for fixed auxiliaries).
inline double ul_fp_surrogate(const UlFpCoefficients &co, const Eigen::VectorXd &e,
                              const Eigen::VectorXd &varpi,
                              const Eigen::VectorXd &varpi_tilde) {
    const Eigen::VectorXd g = co.a.cwiseProduct(e);
    const Eigen::VectorXd i = co.cross * e + co.sigma;
    double f = 0.0;
    for (int k = 0; k < e.size(); ++k)
        f += std::log1p(varpi(k)) - varpi(k) +
             2.0 * varpi_tilde(k) * std::sqrt((1.0 + varpi(k)) * g(k)) -
             varpi_tilde(k) * varpi_tilde(k) * (g(k) + i(k));
    return f;
}

// Stationary power step of the surrogate, clamped to [0, e_max]. D_k weights
// every appearance of E_k across the quadratic terms; the coherent co-pilot
// coefficient enters only for pairs that actually share a pilot.
inline Eigen::VectorXd ul_fp_power_step(const UlFpCoefficients &co,
                                        const Eigen::VectorXd &varpi,
                                        const Eigen::VectorXd &varpi_tilde,
                                        double e_max) {
    const int ku = static_cast<int>(varpi.size());
    const Eigen::VectorXd w2 = varpi_tilde.cwiseProduct(varpi_tilde);
    Eigen::VectorXd e(ku);
    for (int k = 0; k < ku; ++k) {
        const double d = w2(k) * co.a(k) + w2.dot(co.cross.col(k));
        const double num = w2(k) * (1.0 + varpi(k)) * co.a(k);
        e(k) = d > 0.0 ? std::clamp(num / (d * d), 0.0, e_max) : 0.0;
    }
    return e;
}

struct UlPowerResult {
    Eigen::VectorXd e_u, varpi, varpi_tilde;
    std::vector<double> objective_trace; // one entry per FP iteration
    bool converged = false;
    int iters = 0;
};

inline UlPowerResult ul_power_control(const DuplexStats &stats,
                                      const LargeScaleGains &gains,
                                      const PilotAssignment &pilots,
                                      const DuplexConfig &dux,
                                      const UplinkWeights &weights,
                                      const PowerAllocation &pw_fixed_dl,
                                      const SystemConfig &cfg,
                                      std::optional<Eigen::VectorXd> init = {}) {
    const int ku = static_cast<int>(dux.ul_ues.size());
    UlPowerResult res;
    res.e_u = res.varpi = res.varpi_tilde = Eigen::VectorXd::Zero(ku);
    if (ku == 0 || dux.ul_aps.empty()) {
        res.converged = true;
        return res;
    }
    const UlFpCoefficients co =
        build_ul_fp(stats, gains, pilots, dux, weights, pw_fixed_dl, cfg);
    if (co.a.maxCoeff() <= 0.0) { // degenerate gains: nothing to optimize
        res.converged = true;
        return res;
    }

    Eigen::VectorXd e = Eigen::VectorXd::Constant(ku, cfg.ul_power_max);
    if (init) e = init->cwiseMax(0.0).cwiseMin(cfg.ul_power_max);
    double f_prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < cfg.fp_max_iter; ++it) {
        const Eigen::VectorXd g = co.a.cwiseProduct(e);
        const Eigen::VectorXd i = co.cross * e + co.sigma;
        for (int k = 0; k < ku; ++k) {
            res.varpi(k) = i(k) > 0.0 ? g(k) / i(k) : 0.0;
            const double den = g(k) + i(k);
            res.varpi_tilde(k) =
                den > 0.0 ? std::sqrt((1.0 + res.varpi(k)) * g(k)) / den : 0.0;
        }
        e = ul_fp_power_step(co, res.varpi, res.varpi_tilde, cfg.ul_power_max);
        const double f = ul_fp_objective(co, e, res.varpi);
        if (!std::isfinite(f) || !e.allFinite())
            throw std::runtime_error("ul_power_control: non-finite iterate");
        res.objective_trace.push_back(f);
        res.iters = it + 1;
        if (it > 0 && std::abs(f - f_prev) <= cfg.delta_u) {
            res.converged = true;
            break;
        }
        f_prev = f;
    }
    res.e_u = e;
    return res;
}

// ---------------------------------------------------------------------------
// Downlink QCQP
// ---------------------------------------------------------------------------

// Interference structure of the DL SINRs as quadratic forms in the columns of
// kappa. i_nq describes what UE n receives from the stream directed at UE q
// (coherent rank-one part only when they share a pilot); g holds the coherent
// gain vectors; sigma_eff the UL-UE leakage plus noise floor.
struct QcqpProblem {
    std::vector<Eigen::MatrixXd> i_nq; // kd*kd blocks of size md x md
    Eigen::MatrixXd g;                 // md x kd
    Eigen::VectorXd sigma_eff;         // kd
    double e_d = 0.0;
    int md = 0, kd = 0;

    const Eigen::MatrixXd &inq(int n, int q) const { return i_nq[std::size_t(n) * kd + q]; }

    // Per-UE total received power (excluding sigma): e_d * sum_q k_q^T I_nq k_q.
    Eigen::VectorXd quad(const Eigen::MatrixXd &kappa) const {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(kd);
        for (int n = 0; n < kd; ++n)
            for (int q = 0; q < kd; ++q)
                t(n) += e_d * kappa.col(q).dot(inq(n, q) * kappa.col(q));
        return t;
    }
    Eigen::VectorXd gain(const Eigen::MatrixXd &kappa) const {
        Eigen::VectorXd s(kd);
        for (int n = 0; n < kd; ++n) s(n) = g.col(n).dot(kappa.col(n));
        return s;
    }
    Eigen::VectorXd sinr(const Eigen::MatrixXd &kappa) const {
        const Eigen::VectorXd t = quad(kappa), s = gain(kappa);
        Eigen::VectorXd out(kd);
        for (int n = 0; n < kd; ++n) {
            const double den = t(n) - s(n) * s(n) + sigma_eff(n);
            out(n) = den > 0.0 ? s(n) * s(n) / den : 0.0;
        }
        return out;
    }
};

inline QcqpProblem build_qcqp(const DuplexStats &stats, const LargeScaleGains &gains,
                              const PilotAssignment &pilots, const DuplexConfig &dux,
                              const Eigen::VectorXd &e_u_fixed,
                              const SystemConfig &cfg) {
    QcqpProblem p;
    p.md = static_cast<int>(dux.dl_aps.size());
    p.kd = static_cast<int>(dux.dl_ues.size());
    p.e_d = cfg.dl_power_total;
    p.g = Eigen::MatrixXd::Zero(p.md, p.kd);
    p.sigma_eff = Eigen::VectorXd::Zero(p.kd);
    p.i_nq.assign(std::size_t(p.kd) * p.kd, Eigen::MatrixXd());
    if (p.md == 0 || p.kd == 0) return p;
    const int zf_dim = dux.n_dl_antennas(cfg) - pilots.tau_p;
    if (zf_dim < 1) return p;

    for (int ni = 0; ni < p.kd; ++ni) {
        const int n = dux.dl_ues[ni];
        Eigen::VectorXd alpha_n(p.md), resid_n(p.md);
        for (int ji = 0; ji < p.md; ++ji) {
            alpha_n(ji) = stats.dl.alpha(dux.dl_aps[ji], n);
            resid_n(ji) = stats.dl.resid(dux.dl_aps[ji], n);
        }
        p.g.col(ni) = std::sqrt(double(zf_dim) * p.e_d) * alpha_n;
        for (int qi = 0; qi < p.kd; ++qi) {
            const int q = dux.dl_ues[qi];
            Eigen::MatrixXd m = resid_n.asDiagonal();
            if (pilots.shares_pilot(n, q))
                m += zf_dim * (alpha_n * alpha_n.transpose());
            p.i_nq[std::size_t(ni) * p.kd + qi] = std::move(m);
        }
        double iue = 0.0;
        for (std::size_t kj = 0; kj < dux.ul_ues.size(); ++kj)
            iue += e_u_fixed(kj) * gains.eps_ue(n, dux.ul_ues[kj]);
        p.sigma_eff(ni) = iue + cfg.noise_w();
    }
    return p;
}

// Concave surrogate maximized by the ADMM power step (fixed auxiliaries).
inline double qcqp_objective(const QcqpProblem &p, const Eigen::VectorXd &varpi,
                             const Eigen::VectorXd &varpi_tilde,
                             const Eigen::MatrixXd &kappa) {
    const Eigen::VectorXd t = p.quad(kappa), s = p.gain(kappa);
    double f = 0.0;
    for (int n = 0; n < p.kd; ++n)
        f += 2.0 * varpi_tilde(n) * std::sqrt(1.0 + varpi(n)) * s(n) -
             varpi_tilde(n) * varpi_tilde(n) * (t(n) + p.sigma_eff(n));
    return f;
}

struct AdmmResult {
    Eigen::MatrixXd kappa; // projected iterate: feasible by construction
    std::vector<double> residual_trace;
    bool converged = false;
    int iters = 0;
};

// Consensus ADMM for the per-AP-constrained QCQP. kappa_init must be feasible
// (it seeds the consensus variable); the dual starts at zero. The split
// variable is projected row-wise onto the unit ball, and the returned kappa is
// that projected iterate, so the result always satisfies the power budgets.
inline AdmmResult admm_qcqp(const QcqpProblem &p, const Eigen::VectorXd &varpi,
                            const Eigen::VectorXd &varpi_tilde,
                            const Eigen::MatrixXd &kappa_init,
                            const SystemConfig &cfg) {
    AdmmResult res;
    if (p.kd == 0 || p.md == 0) {
        res.kappa = kappa_init;
        res.converged = true;
        return res;
    }
    const Eigen::VectorXd w2 = varpi_tilde.cwiseProduct(varpi_tilde);

    // The configured penalty is relative to the quadratic scale of the
    // surrogate. The auxiliary weights renormalize the physical units, so
    // instances posed in watts and instances posed at unit scale end up with
    // similar curvature, and an absolute penalty would stall the consensus
    // steps whenever the guess missed that curvature by orders of magnitude.
    // The average eigenvalue of the heaviest normal matrix, estimated from
    // traces, anchors the scale.
    double quad_scale = 0.0;
    for (int n = 0; n < p.kd; ++n) {
        double tr = 0.0;
        for (int np = 0; np < p.kd; ++np)
            tr += p.e_d * w2(np) * p.inq(np, n).trace();
        quad_scale = std::max(quad_scale, tr / p.md);
    }
    const double rho =
        quad_scale > 0.0 ? cfg.admm_penalty * quad_scale : cfg.admm_penalty;

    // Per-column normal matrices: A_n = e_d * sum_n' w2_n' I_n'n + (rho/2) I.
    std::vector<Eigen::LLT<Eigen::MatrixXd>> fact;
    fact.reserve(p.kd);
    for (int n = 0; n < p.kd; ++n) {
        Eigen::MatrixXd a =
            (rho / 2.0) * Eigen::MatrixXd::Identity(p.md, p.md);
        for (int np = 0; np < p.kd; ++np) a += p.e_d * w2(np) * p.inq(np, n);
        fact.emplace_back(a);
        if (fact.back().info() != Eigen::Success)
            throw std::runtime_error("admm_qcqp: normal matrix not positive definite");
    }

    Eigen::MatrixXd kappa = kappa_init;
    Eigen::MatrixXd pi = kappa_init;
    Eigen::MatrixXd dual = Eigen::MatrixXd::Zero(p.md, p.kd);
    for (int it = 0; it < cfg.admm_max_iter; ++it) {
        for (int n = 0; n < p.kd; ++n) {
            const Eigen::VectorXd b =
                varpi_tilde(n) * std::sqrt(1.0 + varpi(n)) * p.g.col(n) +
                (rho / 2.0) * (pi.col(n) + dual.col(n));
            kappa.col(n) = fact[n].solve(b);
        }
        for (int j = 0; j < p.md; ++j) {
            Eigen::RowVectorXd row = kappa.row(j) - dual.row(j);
            const double nrm = row.norm();
            pi.row(j) = nrm > 1.0 ? Eigen::RowVectorXd(row / nrm) : row;
        }
        dual += pi - kappa;
        const double resid = (kappa - pi).colwise().norm().maxCoeff();
        res.residual_trace.push_back(resid);
        res.iters = it + 1;
        if (!kappa.allFinite())
            throw std::runtime_error("admm_qcqp: non-finite iterate");
        if (resid < cfg.delta_admm) {
            res.converged = true;
            break;
        }
    }
    res.kappa = pi;
    return res;
}

struct DlPowerResult {
    Eigen::MatrixXd kappa;
    Eigen::VectorXd varpi, varpi_tilde;
    std::vector<double> objective_trace;
    bool converged = false;
    bool feasible = true; // false when the transmit array cannot zero-force
    int iters = 0;
    int admm_iters_total = 0;
};

inline double dl_fp_objective(const QcqpProblem &p, const Eigen::MatrixXd &kappa,
                              const Eigen::VectorXd &varpi) {
    const Eigen::VectorXd t = p.quad(kappa), s = p.gain(kappa);
    double f = 0.0;
    for (int n = 0; n < p.kd; ++n) {
        const double den = t(n) + p.sigma_eff(n);
        f += std::log1p(varpi(n)) - varpi(n) +
             (den > 0.0 ? (1.0 + varpi(n)) * s(n) * s(n) / den : 0.0);
    }
    return f;
}

inline DlPowerResult dl_power_control(const DuplexStats &stats,
                                      const LargeScaleGains &gains,
                                      const PilotAssignment &pilots,
                                      const DuplexConfig &dux,
                                      const Eigen::VectorXd &e_u_fixed,
                                      const SystemConfig &cfg,
                                      std::optional<Eigen::MatrixXd> init = {}) {
    const int kd = static_cast<int>(dux.dl_ues.size());
    const int md = static_cast<int>(dux.dl_aps.size());
    DlPowerResult res;
    res.varpi = res.varpi_tilde = Eigen::VectorXd::Zero(kd);
    res.kappa = Eigen::MatrixXd::Zero(md, kd);
    if (kd == 0 || md == 0) {
        res.converged = true;
        return res;
    }
    if (dux.n_dl_antennas(cfg) - pilots.tau_p < 1) {
        res.feasible = false;
        res.converged = true;
        return res;
    }
    const QcqpProblem prob = build_qcqp(stats, gains, pilots, dux, e_u_fixed, cfg);

    Eigen::MatrixXd kappa =
        init ? *init
             : Eigen::MatrixXd::Constant(md, kd, 1.0 / std::sqrt(double(kd)));
    // A zero-gain stream is a fixed point of the quadratic transform: its
    // auxiliaries vanish, and the consensus step then reproduces the zero
    // column. A warm start must not pin a stream off forever, so such columns
    // restart from the uniform profile (rows rescaled to stay feasible).
    {
        const Eigen::VectorXd s = prob.gain(kappa);
        for (int n = 0; n < kd; ++n)
            if (s(n) <= 0.0)
                kappa.col(n).setConstant(1.0 / std::sqrt(double(kd)));
        for (int j = 0; j < md; ++j) {
            const double nrm = kappa.row(j).norm();
            if (nrm > 1.0) kappa.row(j) /= nrm;
        }
    }
    double f_prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < cfg.fp_max_iter; ++it) {
        const Eigen::VectorXd t = prob.quad(kappa), s = prob.gain(kappa);
        for (int n = 0; n < kd; ++n) {
            const double i_n = t(n) - s(n) * s(n) + prob.sigma_eff(n);
            res.varpi(n) = i_n > 0.0 ? s(n) * s(n) / i_n : 0.0;
            const double den = t(n) + prob.sigma_eff(n);
            res.varpi_tilde(n) =
                den > 0.0 ? std::sqrt(1.0 + res.varpi(n)) * s(n) / den : 0.0;
        }
        const AdmmResult step =
            admm_qcqp(prob, res.varpi, res.varpi_tilde, kappa, cfg);
        res.admm_iters_total += step.iters;
        // Keep-best safeguard: a truncated consensus solve must not lower the
        // surrogate, or the outer objective could dip below its guarantee.
        if (qcqp_objective(prob, res.varpi, res.varpi_tilde, step.kappa) >=
            qcqp_objective(prob, res.varpi, res.varpi_tilde, kappa))
            kappa = step.kappa;
        const double f = dl_fp_objective(prob, kappa, res.varpi);
        if (!std::isfinite(f))
            throw std::runtime_error("dl_power_control: non-finite objective");
        res.objective_trace.push_back(f);
        res.iters = it + 1;
        if (it > 0 && std::abs(f - f_prev) <= cfg.delta_d) {
            res.converged = true;
            break;
        }
        f_prev = f;
    }
    res.kappa = kappa;
    return res;
}

// ---------------------------------------------------------------------------
// UL/DL alternation
// ---------------------------------------------------------------------------

struct AlternateOptions {
    bool refine_weights = true;   // recompute combining weights on each pass
    bool optimal_weights = true;  // false: keep equal weighting throughout
    std::optional<PowerAllocation> init; // warm start (defaults to full/uniform)
};

struct JointPowerResult {
    PowerAllocation power;
    UplinkWeights weights;
    SEReport report;                  // best-seen state
    std::vector<double> sum_se_trace; // bits/s/Hz after each evaluation
    bool converged = false;
    int outer_iters = 0;
};

// Alternates weight refresh, UL power FP and DL power FP. The two directions
// are coupled (UE->UE leakage depends on UL powers, AP->AP leakage on the DL
// split), so the outer sum SE need not be monotone; the best evaluated state
// is tracked and returned.
inline JointPowerResult alternate_ul_dl(const DuplexStats &stats,
                                        const LargeScaleGains &gains,
                                        const PilotAssignment &pilots,
                                        const DuplexConfig &dux,
                                        const SystemConfig &cfg,
                                        const AlternateOptions &opts = {}) {
    JointPowerResult out;
    PowerAllocation pw = opts.init ? *opts.init : equal_power(dux, cfg);
    UplinkWeights w = equal_weights(dux);
    const double tol = std::max(cfg.delta_u, cfg.delta_d);

    double prev = std::numeric_limits<double>::quiet_NaN();
    double best = -std::numeric_limits<double>::infinity();
    auto consider = [&](const PowerAllocation &p, const UplinkWeights &wt) {
        const SEReport r = evaluate_se(stats, gains, pilots, dux, p, wt, cfg);
        out.sum_se_trace.push_back(r.sum_se);
        if (r.sum_se > best) {
            best = r.sum_se;
            out.power = p;
            out.weights = wt;
            out.report = r;
        }
        return r.sum_se;
    };

    for (int it = 0; it < cfg.outer_max_iter; ++it) {
        if (opts.optimal_weights && (opts.refine_weights || it == 0))
            w = optimal_weights_zf(stats, gains, pilots, dux, pw, cfg);
        consider(pw, w);
        if (!dux.ul_ues.empty() && !dux.ul_aps.empty()) {
            const UlPowerResult ul = ul_power_control(stats, gains, pilots, dux, w,
                                                      pw, cfg, pw.e_u);
            pw.e_u = ul.e_u;
        }
        if (!dux.dl_ues.empty() && !dux.dl_aps.empty()) {
            const DlPowerResult dl = dl_power_control(stats, gains, pilots, dux,
                                                      pw.e_u, cfg, pw.kappa);
            pw.kappa = dl.kappa;
        }
        const double now = consider(pw, w);
        out.outer_iters = it + 1;
        if (it > 0 && std::abs(now - prev) < tol) {
            out.converged = true;
            break;
        }
        prev = now;
    }
    return out;
}

} // namespace cfduplex
