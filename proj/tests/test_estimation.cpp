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

#include <catch2/catch_amalgamated.hpp>

#include "cfduplex/realization.hpp"

using namespace cfduplex;
using Catch::Approx;

namespace {

// Config whose pilot transmit power comes out at exactly 1 W and whose noise
// floor is 1 W, so hand calculations stay in unit quantities.
SystemConfig unit_config() {
    SystemConfig cfg;
    cfg.noise_power_dbm = 30.0; // 1 W
    cfg.pilot_snr_db =
        three_slope_pl_db(cfg.simple_pl.d0_m, cfg.pathloss_threeslope);
    cfg.shadow_sigma_db = 0.0;
    return cfg;
}

} // namespace

TEST_CASE("estimation coefficients in unit quantities") {
    SystemConfig cfg = unit_config();
    REQUIRE(cfg.noise_w() == Approx(1.0));
    REQUIRE(cfg.pilot_power_w(0) == Approx(1.0));

    PilotAssignment lone;
    lone.tau_p = 1;
    lone.pilot_of = {0};
    Eigen::MatrixXd beta(1, 1);
    beta << 1.0;

    // tau_p=1, E_p=1, beta=1, N0=1, nobody else on the pilot:
    // c = 1/(1+1), alpha^2 = c, residual = 1 - c.
    auto st = estimation_coefficients(beta, lone, cfg);
    CHECK(st.c(0, 0) == Approx(0.5));
    CHECK(st.alpha2(0, 0) == Approx(0.5));
    CHECK(st.resid(0, 0) == Approx(0.5));
    CHECK(nmse(st, beta)(0, 0) == Approx(0.5));

    // An equal-gain co-pilot UE pushes c to 1/(2+1) and alpha^2 with it.
    PilotAssignment shared;
    shared.tau_p = 1;
    shared.pilot_of = {0, 0};
    Eigen::MatrixXd beta2(1, 2);
    beta2 << 1.0, 1.0;
    auto st2 = estimation_coefficients(beta2, shared, cfg);
    CHECK(st2.c(0, 0) == Approx(1.0 / 3.0));
    CHECK(st2.alpha2(0, 0) == Approx(1.0 / 3.0));
    CHECK(st2.alpha2(0, 1) == Approx(1.0 / 3.0));

    // Longer pilots sharpen the estimate: tau_p=2 on distinct pilots gives
    // c = 1/(2*1*1+1) and alpha^2 = 2/3.
    PilotAssignment split;
    split.tau_p = 2;
    split.pilot_of = {0, 1};
    auto st3 = estimation_coefficients(beta2, split, cfg);
    CHECK(st3.alpha2(0, 0) == Approx(2.0 / 3.0));
    CHECK(st3.alpha2(0, 1) == Approx(2.0 / 3.0));
}

TEST_CASE("estimate statistics match an independent pilot simulation") {
    // Simulate the pilot observation y = sqrt(tau E1) f1 + sqrt(tau E2) f2 + w
    // directly from its definition and compare the sample second moment of
    // the estimate against alpha^2. Nothing here reuses the library's
    // realization path.
    SystemConfig cfg = unit_config();
    PilotAssignment shared;
    shared.tau_p = 1;
    shared.pilot_of = {0, 0};
    Eigen::MatrixXd beta(1, 2);
    beta << 0.8, 0.3;
    auto st = estimation_coefficients(beta, shared, cfg);

    const int n_ant = 4;
    const long trials = 100000;
    Rng rng(2024);
    double acc = 0.0;
    for (long t = 0; t < trials; ++t) {
        for (int a = 0; a < n_ant; ++a) {
            const std::complex<double> f1 = rng.cnormal(beta(0, 0));
            const std::complex<double> f2 = rng.cnormal(beta(0, 1));
            const std::complex<double> w = rng.cnormal(cfg.noise_w());
            const std::complex<double> y = f1 + f2 + w; // tau_p = E_p = 1
            const std::complex<double> fhat = beta(0, 0) * st.c(0, 0) * y;
            acc += std::norm(fhat);
        }
    }
    const double sample = acc / double(trials * n_ant);
    CHECK(sample == Approx(st.alpha2(0, 0)).epsilon(0.01));
}

TEST_CASE("nmse endpoints") {
    EstimateStats st;
    Eigen::MatrixXd beta(1, 2);
    beta << 2.0, 5.0;
    st.alpha2 = beta;            // perfect estimate
    st.resid = beta - st.alpha2; // zero residual
    CHECK(nmse(st, beta)(0, 0) == Approx(0.0));

    st.alpha2 = Eigen::MatrixXd::Zero(1, 2); // pure noise estimate
    st.resid = beta;
    CHECK(nmse(st, beta)(0, 1) == Approx(1.0));
}

TEST_CASE("estimates improve with pilot snr and degrade with contamination") {
    SystemConfig cfg;
    cfg.num_aps = 4;
    cfg.num_ues = 6;
    cfg.area_side_m = 400.0;
    auto geom = generate_geometry(cfg, 8);
    auto gains = large_scale_fading(geom, cfg, 8);
    auto pilots = orthogonal_assignment(cfg.num_ues);

    double prev = 2.0;
    for (double snr : {0.0, 10.0, 20.0, 30.0}) {
        cfg.pilot_snr_db = snr;
        auto st = estimation_coefficients(gains.beta, pilots, cfg);
        // Basic sanity on every link.
        CHECK((st.alpha2.array() >= 0.0).all());
        CHECK((st.alpha2.array() <= gains.beta.array() + 1e-18).all());
        CHECK(st.alpha2.isApprox(gains.beta - st.resid, 1e-12));
        const double mean_nmse = nmse(st, gains.beta).mean();
        CHECK(mean_nmse < prev);
        prev = mean_nmse;
    }

    // Moving a UE onto an occupied pilot (same pilot length) can only hurt
    // the links of that pilot group.
    cfg.pilot_snr_db = 20.0;
    auto clean = estimation_coefficients(gains.beta, pilots, cfg);
    PilotAssignment dirty = pilots;
    dirty.pilot_of[5] = dirty.pilot_of[4];
    auto cont = estimation_coefficients(gains.beta, dirty, cfg);
    for (int m = 0; m < cfg.num_aps; ++m)
        for (int k : {4, 5}) {
            CHECK(cont.c(m, k) < clean.c(m, k));
            CHECK(cont.alpha2(m, k) < clean.alpha2(m, k));
        }
}

TEST_CASE("duplex stats per mode") {
    SystemConfig cfg;
    cfg.num_aps = 2;
    cfg.num_ues = 4;
    cfg.area_side_m = 200.0;
    auto geom = generate_geometry(cfg, 3);
    auto gains = large_scale_fading(geom, cfg, 3);
    auto pilots = orthogonal_assignment(cfg.num_ues);

    auto hd = make_duplex_stats(gains, pilots, cfg, DuplexMode::dtdd);
    CHECK(hd.ul.alpha2.isApprox(hd.dl.alpha2));

    // The two full-duplex arrays are co-located, so their statistics agree
    // with each other (and with the half-duplex ones, by construction).
    auto fd = make_duplex_stats(gains, pilots, cfg, DuplexMode::fd);
    CHECK(fd.ul.alpha2.isApprox(fd.dl.alpha2));
    CHECK(fd.ul.alpha2.isApprox(hd.ul.alpha2));
}

TEST_CASE("drawn realizations reproduce their declared statistics") {
    SystemConfig cfg;
    cfg.num_aps = 1;
    cfg.num_ues = 2;
    cfg.antennas_per_ap = 4;
    cfg.n_tx = 4;
    cfg.n_rx = 4;
    cfg.area_side_m = 150.0;
    auto geom = generate_geometry(cfg, 12);
    auto gains = large_scale_fading(geom, cfg, 12);
    PilotAssignment pilots;
    pilots.tau_p = 1;
    pilots.pilot_of = {0, 0};
    auto stats = make_duplex_stats(gains, pilots, cfg, DuplexMode::dtdd);

    const long trials = 30000;
    double acc_f = 0.0, acc_fh = 0.0, acc_err = 0.0;
    std::complex<double> acc_cross = 0.0;
    for (long t = 0; t < trials; ++t) {
        auto real = draw_realization(stats, gains, pilots, cfg,
                                     DuplexMode::dtdd, derive_seed(77, t, 10));
        acc_f += real.rx.f[0].col(0).squaredNorm();
        acc_fh += real.rx.f_hat[0].col(0).squaredNorm();
        Eigen::VectorXcd err = real.rx.f[0].col(0) - real.rx.f_hat[0].col(0);
        acc_err += err.squaredNorm();
        acc_cross += real.rx.f_hat[0].col(0).dot(err);
    }
    const double denom = double(trials) * cfg.antennas_per_ap;
    CHECK(acc_f / denom == Approx(gains.beta(0, 0)).epsilon(0.01));
    CHECK(acc_fh / denom == Approx(stats.ul.alpha2(0, 0)).epsilon(0.01));
    CHECK(acc_err / denom == Approx(stats.ul.resid(0, 0)).epsilon(0.01));
    // Orthogonality of estimate and error, relative to the channel power.
    CHECK(std::abs(acc_cross) / denom < 0.01 * gains.beta(0, 0));

    // Co-pilot estimates at one AP are exactly parallel draws.
    auto real = draw_realization(stats, gains, pilots, cfg, DuplexMode::dtdd, 5);
    Eigen::VectorXcd a = real.rx.f_hat[0].col(0);
    Eigen::VectorXcd b = real.rx.f_hat[0].col(1);
    const double cosang =
        std::abs(a.dot(b)) / std::max(1e-300, a.norm() * b.norm());
    CHECK(cosang == Approx(1.0).epsilon(1e-12));
}
