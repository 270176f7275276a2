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

// Monte Carlo validation of the closed-form SINRs. This path never reuses the
// closed forms: it draws fading realizations, builds the actual combiners and
// precoders, and estimates the numerator/denominator expectations by sample
// means (use-and-forget, not per-realization SINR averaging). Conventions the
// closed forms rely on and the oracle reproduces explicitly:
//  - downlink precoding uses the conjugated zero-forcing direction so the
//    reciprocal channel f^T p carries a nonzero coherent gain;
//  - the AP->AP and self-interference paths carry the full array factor: the
//    leaking precoder enters them scaled by sqrt(n_tx).

#include <complex>

#include "cfduplex/realization.hpp"
#include "cfduplex/se.hpp"
#include "cfduplex/stats.hpp"

namespace cfduplex {

struct McOptions {
    long trials = 100000;
    std::uint64_t seed = 1;
    int threads = 1;
    long block = 512; // accumulation block; part of the deterministic layout
    enum class Combiner { zf, mmse } combiner = Combiner::zf;
    enum class Precoder { zf, rzf } precoder = Precoder::zf;
};

namespace detail {

// Zero-forcing directions per AP: V = Z (Z^H Z)^{-1}, one column per pilot.
inline MatrixXcd zf_directions(const MatrixXcd &z) {
    const MatrixXcd gram = z.adjoint() * z;
    return z * gram.llt().solve(MatrixXcd::Identity(gram.rows(), gram.cols()));
}

// Combining vectors for every (UL AP, UL UE) pair.
inline std::vector<MatrixXcd> build_ul_combiners(
    const ChannelRealization &real, const DuplexStats &stats,
    const LargeScaleGains &gains, const PilotAssignment &pilots,
    const DuplexConfig &dux, const PowerAllocation &pw, const SystemConfig &cfg,
    McOptions::Combiner kind) {
    const Eigen::MatrixXd &beta =
        dux.mode == DuplexMode::fd ? gains.beta_ul : gains.beta;
    const int ku = static_cast<int>(dux.ul_ues.size());
    const double n0 = cfg.noise_w();
    std::vector<MatrixXcd> v(dux.ul_aps.size());
    const Eigen::VectorXd leak = detail::dl_leakage_per_ap(gains, dux, pw);
    const int n_tx = dux.n_dl_antennas(cfg);

    for (std::size_t mi = 0; mi < dux.ul_aps.size(); ++mi) {
        const int m = dux.ul_aps[mi];
        v[mi].resize(real.n_rx, ku);
        if (kind == McOptions::Combiner::zf) {
            const MatrixXcd dirs = zf_directions(real.rx.z[m]);
            for (int ki = 0; ki < ku; ++ki) {
                const int k = dux.ul_ues[ki];
                const double gamma =
                    std::sqrt(double(pilots.tau_p) * cfg.pilot_power_w(k)) * beta(m, k);
                v[mi].col(ki) = gamma * dirs.col(pilots.pilot_of[k]);
            }
        } else {
            // Local MMSE: R = sum_k' E_k'(f_hat f_hat^H + resid I)
            //                + (n_tx E_d leak_m + N0) I, then v = R^{-1} f_hat.
            MatrixXcd r0 = MatrixXcd::Zero(real.n_rx, real.n_rx);
            double diag = n_tx * pw.e_d * leak(mi) + n0;
            for (int ki = 0; ki < ku; ++ki) {
                const int k = dux.ul_ues[ki];
                const auto fh = real.rx.f_hat[m].col(k);
                r0 += pw.e_u(ki) * (fh * fh.adjoint());
                diag += pw.e_u(ki) * stats.ul.resid(m, k);
            }
            r0 += diag * MatrixXcd::Identity(real.n_rx, real.n_rx);
            Eigen::LLT<MatrixXcd> llt(r0);
            for (int ki = 0; ki < ku; ++ki)
                v[mi].col(ki) = llt.solve(real.rx.f_hat[m].col(dux.ul_ues[ki]));
        }
    }
    return v;
}

// Precoding vectors for every (DL AP, DL UE) pair, unit average (ZF) or unit
// instantaneous (RZF) norm.
inline std::vector<MatrixXcd> build_dl_precoders(const ChannelRealization &real,
                                                 const DuplexStats &stats,
                                                 const PilotAssignment &pilots,
                                                 const DuplexConfig &dux,
                                                 const SystemConfig &cfg,
                                                 McOptions::Precoder kind) {
    const int kd = static_cast<int>(dux.dl_ues.size());
    const int zf_dim = real.n_tx - pilots.tau_p;
    const double n0 = cfg.noise_w();
    std::vector<MatrixXcd> p(dux.dl_aps.size());
    for (std::size_t ji = 0; ji < dux.dl_aps.size(); ++ji) {
        const int j = dux.dl_aps[ji];
        p[ji].resize(real.n_tx, kd);
        if (kind == McOptions::Precoder::zf) {
            const MatrixXcd dirs = zf_directions(real.tx.z[j]);
            for (int ni = 0; ni < kd; ++ni) {
                const int n = dux.dl_ues[ni];
                const double scale =
                    std::sqrt(stats.dl.c(j, n) / zf_dim); // E||Z(Z^H Z)^{-1}e||^2 = c/(n_tx - tau_p)
                p[ji].col(ni) = dirs.col(pilots.pilot_of[n]).conjugate() / scale;
            }
        } else {
            // Regularized ZF with uniform per-UE share of the AP budget.
            const double e_dn = kd > 0 ? cfg.dl_power_total / kd : 0.0;
            MatrixXcd r0 = MatrixXcd::Zero(real.n_tx, real.n_tx);
            double diag = n0;
            for (int ni = 0; ni < kd; ++ni) {
                const int n = dux.dl_ues[ni];
                const auto fh = real.tx.f_hat[j].col(n);
                r0 += e_dn * (fh * fh.adjoint());
                diag += e_dn * stats.dl.resid(j, n);
            }
            r0 += diag * MatrixXcd::Identity(real.n_tx, real.n_tx);
            Eigen::LLT<MatrixXcd> llt(r0);
            for (int ni = 0; ni < kd; ++ni) {
                VectorXcd dir = llt.solve(real.tx.f_hat[j].col(dux.dl_ues[ni]));
                const double nrm = dir.norm();
                p[ji].col(ni) = nrm > 0 ? VectorXcd(dir.conjugate() / nrm)
                                        : VectorXcd::Zero(real.n_tx);
            }
        }
    }
    return p;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Uplink oracle
// ---------------------------------------------------------------------------

// Components are reported on the same scale as UlSinrTerms so they compare
// term by term.
inline UlSinrTerms mc_ul_sinr(const DuplexStats &stats, const LargeScaleGains &gains,
                              const PilotAssignment &pilots, const DuplexConfig &dux,
                              const PowerAllocation &pw, const UplinkWeights &weights,
                              const SystemConfig &cfg, const McOptions &opt) {
    const int ku = static_cast<int>(dux.ul_ues.size());
    const int mu = static_cast<int>(dux.ul_aps.size());
    UlSinrTerms out;
    out.signal = out.est = out.mui = out.iap = out.noise = out.sinr =
        Eigen::VectorXd::Zero(ku);
    if (ku == 0 || mu == 0) return out;
    const int zf_dim = dux.n_ul_antennas(cfg) - pilots.tau_p;
    if (zf_dim < 1) {
        out.feasible = false;
        return out;
    }
    const int n_tx = dux.n_dl_antennas(cfg);
    const int kd = static_cast<int>(dux.dl_ues.size());

    struct Acc {
        Eigen::MatrixXcd mean_u;  // (k, i): sum of w_k-projected u_ki
        Eigen::MatrixXd abs2_u;   // (k, i): sum of |.|^2
        Eigen::VectorXd iap;      // per k: sum over DL UEs of |leak|^2
        Eigen::VectorXd vnorm;    // per k: sum_m |w_mk|^2 ||v_mk||^2
        Acc operator+(const Acc &o) const {
            return {mean_u + o.mean_u, abs2_u + o.abs2_u, iap + o.iap,
                    vnorm + o.vnorm};
        }
    };
    const Acc zero{Eigen::MatrixXcd::Zero(ku, ku), Eigen::MatrixXd::Zero(ku, ku),
                   Eigen::VectorXd::Zero(ku), Eigen::VectorXd::Zero(ku)};
    const std::size_t n_blocks =
        static_cast<std::size_t>((opt.trials + opt.block - 1) / opt.block);
    std::vector<Acc> parts(n_blocks, zero);

    parallel_blocks(opt.trials, opt.block, opt.threads, [&](std::size_t b, long t0,
                                                            long t1) {
        Acc acc = zero;
        for (long t = t0; t < t1; ++t) {
            const ChannelRealization real = draw_realization(
                stats, gains, pilots, cfg, dux.mode, derive_seed(opt.seed, t, 10));
            const auto v = detail::build_ul_combiners(real, stats, gains, pilots,
                                                      dux, pw, cfg, opt.combiner);
            const auto p = detail::build_dl_precoders(real, stats, pilots, dux, cfg,
                                                      opt.precoder);
            for (int ki = 0; ki < ku; ++ki) {
                // w_k-projected effective channels to every UL UE.
                for (int ii = 0; ii < ku; ++ii) {
                    const int i = dux.ul_ues[ii];
                    std::complex<double> u = 0.0;
                    for (int mi = 0; mi < mu; ++mi)
                        u += std::conj(weights.w(mi, ki)) *
                             v[mi].col(ki).dot(real.rx.f[dux.ul_aps[mi]].col(i));
                    acc.mean_u(ki, ii) += u;
                    acc.abs2_u(ki, ii) += std::norm(u);
                }
                // Cross-link leakage from every DL UE's precoded stream.
                for (int ni = 0; ni < kd; ++ni) {
                    std::complex<double> a = 0.0;
                    for (int mi = 0; mi < mu; ++mi) {
                        const int m = dux.ul_aps[mi];
                        std::complex<double> per_ap = 0.0;
                        for (std::size_t ji = 0; ji < dux.dl_aps.size(); ++ji) {
                            const int j = dux.dl_aps[ji];
                            const MatrixXcd *g = nullptr;
                            if (j == m) {
                                if (dux.mode == DuplexMode::fd) g = &real.g_si[m];
                            } else {
                                g = &real.g_inap[std::size_t(m) * cfg.num_aps + j];
                            }
                            if (!g) continue;
                            per_ap += pw.kappa(ji, ni) *
                                      v[mi].col(ki).dot((*g) * p[ji].col(ni));
                        }
                        a += std::conj(weights.w(mi, ki)) * per_ap;
                    }
                    acc.iap(ki) += std::norm(a) * n_tx; // sqrt(n_tx) path scale
                }
                for (int mi = 0; mi < mu; ++mi)
                    acc.vnorm(ki) += std::norm(weights.w(mi, ki)) *
                                     v[mi].col(ki).squaredNorm();
            }
        }
        parts[b] = acc;
    });

    const Acc total = pairwise_reduce(std::move(parts));
    const double inv_t = 1.0 / double(opt.trials);
    const double n0 = cfg.noise_w();
    for (int ki = 0; ki < ku; ++ki) {
        const int k = dux.ul_ues[ki];
        double est = 0.0, mui = 0.0;
        for (int ii = 0; ii < ku; ++ii) {
            const int i = dux.ul_ues[ii];
            const double coh = std::norm(total.mean_u(ki, ii) * inv_t);
            const double pwr = total.abs2_u(ki, ii) * inv_t;
            est += pw.e_u(ii) * (pwr - coh);
            if (i != k && pilots.shares_pilot(i, k)) mui += pw.e_u(ii) * coh;
        }
        out.signal(ki) =
            zf_dim * pw.e_u(ki) * std::norm(total.mean_u(ki, ki) * inv_t);
        out.est(ki) = zf_dim * est;
        out.mui(ki) = zf_dim * mui;
        out.iap(ki) = zf_dim * pw.e_d * total.iap(ki) * inv_t;
        out.noise(ki) = zf_dim * n0 * total.vnorm(ki) * inv_t;
        const double den = out.est(ki) + out.mui(ki) + out.iap(ki) + out.noise(ki);
        out.sinr(ki) = den > 0.0 ? out.signal(ki) / den : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Downlink oracle
// ---------------------------------------------------------------------------

inline DlSinrTerms mc_dl_sinr(const DuplexStats &stats, const LargeScaleGains &gains,
                              const PilotAssignment &pilots, const DuplexConfig &dux,
                              const PowerAllocation &pw, const SystemConfig &cfg,
                              const McOptions &opt) {
    const int kd = static_cast<int>(dux.dl_ues.size());
    const int md = static_cast<int>(dux.dl_aps.size());
    DlSinrTerms out;
    out.signal = out.est = out.mui = out.iue = out.sinr = Eigen::VectorXd::Zero(kd);
    out.noise = cfg.noise_w();
    if (kd == 0 || md == 0) return out;
    if (dux.n_dl_antennas(cfg) - pilots.tau_p < 1) {
        out.feasible = false;
        return out;
    }
    const int ku = static_cast<int>(dux.ul_ues.size());

    struct Acc {
        Eigen::MatrixXcd mean_t; // (n, q)
        Eigen::MatrixXd abs2_t;  // (n, q)
        Eigen::VectorXd iue;     // per n
        Acc operator+(const Acc &o) const {
            return {mean_t + o.mean_t, abs2_t + o.abs2_t, iue + o.iue};
        }
    };
    const Acc zero{Eigen::MatrixXcd::Zero(kd, kd), Eigen::MatrixXd::Zero(kd, kd),
                   Eigen::VectorXd::Zero(kd)};
    const std::size_t n_blocks =
        static_cast<std::size_t>((opt.trials + opt.block - 1) / opt.block);
    std::vector<Acc> parts(n_blocks, zero);

    parallel_blocks(opt.trials, opt.block, opt.threads, [&](std::size_t b, long t0,
                                                            long t1) {
        Acc acc = zero;
        for (long t = t0; t < t1; ++t) {
            const ChannelRealization real = draw_realization(
                stats, gains, pilots, cfg, dux.mode, derive_seed(opt.seed, t, 10));
            const auto p = detail::build_dl_precoders(real, stats, pilots, dux, cfg,
                                                      opt.precoder);
            for (int ni = 0; ni < kd; ++ni) {
                const int n = dux.dl_ues[ni];
                for (int qi = 0; qi < kd; ++qi) {
                    std::complex<double> tt = 0.0;
                    for (int ji = 0; ji < md; ++ji) {
                        const int j = dux.dl_aps[ji];
                        tt += pw.kappa(ji, qi) * (real.tx.f[j].col(n).transpose() *
                                                  p[ji].col(qi))(0, 0);
                    }
                    acc.mean_t(ni, qi) += tt;
                    acc.abs2_t(ni, qi) += std::norm(tt);
                }
                for (int kj = 0; kj < ku; ++kj)
                    acc.iue(ni) +=
                        pw.e_u(kj) * std::norm(real.g_ue(n, dux.ul_ues[kj]));
            }
        }
        parts[b] = acc;
    });

    const Acc total = pairwise_reduce(std::move(parts));
    const double inv_t = 1.0 / double(opt.trials);
    for (int ni = 0; ni < kd; ++ni) {
        const int n = dux.dl_ues[ni];
        double est = 0.0, mui = 0.0;
        for (int qi = 0; qi < kd; ++qi) {
            const int q = dux.dl_ues[qi];
            const double coh = std::norm(total.mean_t(ni, qi) * inv_t);
            const double pwr = total.abs2_t(ni, qi) * inv_t;
            est += pwr - coh;
            if (q != n && pilots.shares_pilot(q, n)) mui += coh;
        }
        out.signal(ni) = pw.e_d * std::norm(total.mean_t(ni, ni) * inv_t);
        out.est(ni) = pw.e_d * est;
        out.mui(ni) = pw.e_d * mui;
        out.iue(ni) = total.iue(ni) * inv_t;
        const double den = out.est(ni) + out.mui(ni) + out.iue(ni) + out.noise;
        out.sinr(ni) = den > 0.0 ? out.signal(ni) / den : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sample-estimated optimal weights
// ---------------------------------------------------------------------------

// Estimates the per-UE interference covariance and coherent-gain vector from
// realizations and solves w_k = R_k^{-1} E[u_kk]; converges (up to scale) to
// the closed-form optimal weights.
inline UplinkWeights mc_optimal_weights(const DuplexStats &stats,
                                        const LargeScaleGains &gains,
                                        const PilotAssignment &pilots,
                                        const DuplexConfig &dux,
                                        const PowerAllocation &pw,
                                        const SystemConfig &cfg,
                                        const McOptions &opt) {
    const int ku = static_cast<int>(dux.ul_ues.size());
    const int mu = static_cast<int>(dux.ul_aps.size());
    UplinkWeights out;
    out.w = MatrixXcd::Zero(mu, ku);
    if (ku == 0 || mu == 0) return out;
    const int kd = static_cast<int>(dux.dl_ues.size());
    const int n_tx = dux.n_dl_antennas(cfg);

    struct Acc {
        std::vector<MatrixXcd> r;   // per k: interference second moments
        MatrixXcd mean_u;           // (m, k) coherent gains
        Eigen::MatrixXd vnorm;      // (m, k) combiner norms
        Acc operator+(const Acc &o) const {
            Acc s = *this;
            for (std::size_t i = 0; i < r.size(); ++i) s.r[i] += o.r[i];
            s.mean_u += o.mean_u;
            s.vnorm += o.vnorm;
            return s;
        }
    };
    Acc zero;
    zero.r.assign(ku, MatrixXcd::Zero(mu, mu));
    zero.mean_u = MatrixXcd::Zero(mu, ku);
    zero.vnorm = Eigen::MatrixXd::Zero(mu, ku);
    const std::size_t n_blocks =
        static_cast<std::size_t>((opt.trials + opt.block - 1) / opt.block);
    std::vector<Acc> parts(n_blocks, zero);

    parallel_blocks(opt.trials, opt.block, opt.threads, [&](std::size_t b, long t0,
                                                            long t1) {
        Acc acc = zero;
        VectorXcd u(mu), a(mu);
        for (long t = t0; t < t1; ++t) {
            const ChannelRealization real = draw_realization(
                stats, gains, pilots, cfg, dux.mode, derive_seed(opt.seed, t, 10));
            const auto v = detail::build_ul_combiners(real, stats, gains, pilots,
                                                      dux, pw, cfg, opt.combiner);
            const auto p = detail::build_dl_precoders(real, stats, pilots, dux, cfg,
                                                      opt.precoder);
            for (int ki = 0; ki < ku; ++ki) {
                for (int ii = 0; ii < ku; ++ii) {
                    const int i = dux.ul_ues[ii];
                    for (int mi = 0; mi < mu; ++mi)
                        u(mi) = v[mi].col(ki).dot(real.rx.f[dux.ul_aps[mi]].col(i));
                    acc.r[ki] += pw.e_u(ii) * (u * u.adjoint());
                    if (ii == ki) acc.mean_u.col(ki) += u;
                }
                for (int ni = 0; ni < kd; ++ni) {
                    for (int mi = 0; mi < mu; ++mi) {
                        const int m = dux.ul_aps[mi];
                        std::complex<double> per_ap = 0.0;
                        for (std::size_t ji = 0; ji < dux.dl_aps.size(); ++ji) {
                            const int j = dux.dl_aps[ji];
                            const MatrixXcd *g = nullptr;
                            if (j == m) {
                                if (dux.mode == DuplexMode::fd) g = &real.g_si[m];
                            } else {
                                g = &real.g_inap[std::size_t(m) * cfg.num_aps + j];
                            }
                            per_ap = g ? per_ap + pw.kappa(ji, ni) *
                                                      v[mi].col(ki).dot((*g) * p[ji].col(ni))
                                       : per_ap;
                        }
                        a(mi) = std::sqrt(double(n_tx)) * per_ap;
                    }
                    acc.r[ki] += pw.e_d * (a * a.adjoint());
                }
                for (int mi = 0; mi < mu; ++mi)
                    acc.vnorm(mi, ki) += v[mi].col(ki).squaredNorm();
            }
        }
        parts[b] = acc;
    });

    const Acc total = pairwise_reduce(std::move(parts));
    const double inv_t = 1.0 / double(opt.trials);
    const double n0 = cfg.noise_w();
    for (int ki = 0; ki < ku; ++ki) {
        const VectorXcd ubar = total.mean_u.col(ki) * inv_t;
        MatrixXcd r = total.r[ki] * inv_t;
        r -= pw.e_u(ki) * (ubar * ubar.adjoint()); // remove the own-signal mean
        for (int mi = 0; mi < mu; ++mi)
            r(mi, mi) += n0 * total.vnorm(mi, ki) * inv_t;
        const double s = r.diagonal().real().maxCoeff();
        if (!(s > 0.0)) {
            out.w.col(ki).setConstant(1.0 / mu);
            continue;
        }
        out.w.col(ki) = (r / s).ldlt().solve(ubar / s);
    }
    return out;
}

} // namespace cfduplex
