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

#include "cfduplex/mc.hpp"

using namespace cfduplex;
using Catch::Approx;

namespace {

struct Instance {
    SystemConfig cfg;
    NetworkGeometry geom;
    LargeScaleGains gains;
    PilotAssignment pilots;
    DuplexStats stats;
    DuplexConfig dux;
    PowerAllocation pw;
    UplinkWeights w;
};

// Small half-duplex network with alternating AP roles, equal power and
// interference-aware combining weights.
Instance desk_instance(std::uint64_t seed) {
    Instance in;
    in.cfg.num_aps = 4;
    in.cfg.antennas_per_ap = 8;
    in.cfg.num_ues = 6;
    in.cfg.area_side_m = 250.0;
    in.cfg.seed = seed;
    in.geom = generate_geometry(in.cfg, seed);
    in.gains = large_scale_fading(in.geom, in.cfg, seed);
    in.pilots = color_graph(conflict_graph(build_connectivity(in.geom, in.cfg)),
                            seed);
    in.stats = make_duplex_stats(in.gains, in.pilots, in.cfg, DuplexMode::dtdd);
    in.dux = make_dtdd({0, 3}, {1, 2}, in.geom);
    in.pw = equal_power(in.dux, in.cfg);
    in.w = optimal_weights_zf(in.stats, in.gains, in.pilots, in.dux, in.pw,
                              in.cfg);
    return in;
}

// Relative agreement with a floor so near-zero components are judged against
// the term they would have to distort.
void check_term(double got, double want, double scale, double rel) {
    CHECK(std::abs(got - want) <= rel * std::max(std::abs(want), 0.02 * scale));
}

double cosine(const Eigen::VectorXcd &a, const Eigen::VectorXcd &b) {
    const double den = a.norm() * b.norm();
    return den > 0.0 ? std::abs(a.dot(b)) / den : 0.0;
}

} // namespace

TEST_CASE("uplink realizations reproduce the closed form terms") {
    auto in = desk_instance(404);
    McOptions opt;
    opt.trials = 8000;
    opt.seed = 17;

    auto cf = ul_sinr_zf(in.stats, in.gains, in.pilots, in.dux, in.pw, in.w,
                         in.cfg);
    auto mc = mc_ul_sinr(in.stats, in.gains, in.pilots, in.dux, in.pw, in.w,
                         in.cfg, opt);
    REQUIRE(cf.feasible);
    REQUIRE(mc.feasible);
    for (int i = 0; i < cf.sinr.size(); ++i) {
        INFO("ul ue index " << i);
        CHECK(mc.sinr(i) == Approx(cf.sinr(i)).epsilon(0.035));
        CHECK(mc.signal(i) == Approx(cf.signal(i)).epsilon(0.035));
        const double denom = cf.est(i) + cf.mui(i) + cf.iap(i) + cf.noise(i);
        check_term(mc.est(i), cf.est(i), denom, 0.05);
        check_term(mc.mui(i), cf.mui(i), denom, 0.05);
        check_term(mc.iap(i), cf.iap(i), denom, 0.05);
        CHECK(mc.noise(i) == Approx(cf.noise(i)).epsilon(0.035));
    }
}

TEST_CASE("downlink realizations reproduce the closed form terms") {
    auto in = desk_instance(405);
    McOptions opt;
    opt.trials = 8000;
    opt.seed = 23;

    auto cf = dl_sinr_zf(in.stats, in.gains, in.pilots, in.dux, in.pw, in.cfg);
    auto mc = mc_dl_sinr(in.stats, in.gains, in.pilots, in.dux, in.pw, in.cfg,
                         opt);
    REQUIRE(cf.feasible);
    REQUIRE(mc.feasible);
    CHECK(mc.noise == Approx(cf.noise));
    for (int i = 0; i < cf.sinr.size(); ++i) {
        INFO("dl ue index " << i);
        CHECK(mc.sinr(i) == Approx(cf.sinr(i)).epsilon(0.035));
        CHECK(mc.signal(i) == Approx(cf.signal(i)).epsilon(0.035));
        const double denom = cf.est(i) + cf.mui(i) + cf.iue(i) + cf.noise;
        check_term(mc.est(i), cf.est(i), denom, 0.05);
        check_term(mc.mui(i), cf.mui(i), denom, 0.05);
        check_term(mc.iue(i), cf.iue(i), denom, 0.05);
    }
}

TEST_CASE("zero forcing construction pins the pilot subspace") {
    // With a ZF combiner built from the same pilot observations, the product
    // v_mk^H f_hat_mi collapses to alpha_mk * alpha_mi for co-pilot UEs and
    // to zero otherwise. This holds per realization, not just on average.
    auto in = desk_instance(406);
    auto real = draw_realization(in.stats, in.gains, in.pilots, in.cfg,
                                 DuplexMode::dtdd, 99);
    auto v = detail::build_ul_combiners(real, in.stats, in.gains, in.pilots,
                                        in.dux, in.pw, in.cfg,
                                        McOptions::Combiner::zf);
    for (std::size_t mi = 0; mi < in.dux.ul_aps.size(); ++mi) {
        const int m = in.dux.ul_aps[mi];
        for (std::size_t ki = 0; ki < in.dux.ul_ues.size(); ++ki) {
            const int k = in.dux.ul_ues[ki];
            for (int i = 0; i < in.cfg.num_ues; ++i) {
                const std::complex<double> got =
                    v[mi].col(ki).dot(real.rx.f_hat[m].col(i));
                const double want =
                    in.pilots.pilot_of[i] == in.pilots.pilot_of[k]
                        ? in.stats.ul.alpha(m, k) * in.stats.ul.alpha(m, i)
                        : 0.0;
                CHECK(std::abs(got - std::complex<double>(want)) < 1e-9);
            }
        }
    }
}

TEST_CASE("sampled interference weights align with the closed form") {
    auto in = desk_instance(407);
    McOptions opt;
    opt.trials = 6000;
    opt.seed = 5;
    auto sampled = mc_optimal_weights(in.stats, in.gains, in.pilots, in.dux,
                                     in.pw, in.cfg, opt);
    REQUIRE(sampled.w.rows() == in.w.w.rows());
    REQUIRE(sampled.w.cols() == in.w.w.cols());
    for (int k = 0; k < in.w.w.cols(); ++k) {
        INFO("ul ue index " << k);
        CHECK(cosine(sampled.w.col(k), in.w.w.col(k)) >= 0.985);
    }
}

TEST_CASE("mmse combining and regularized precoding stay in range") {
    // Single serving AP per direction so the comparison is between the local
    // filters themselves; with several APs the network weights are matched to
    // the ZF statistics and would skew the alternative filter.
    auto in = desk_instance(408);
    McOptions opt;
    opt.trials = 2500;
    opt.seed = 31;

    auto ul_dux = make_dtdd({0}, {1, 2, 3}, in.geom);
    auto ul_pw = equal_power(ul_dux, in.cfg);
    auto ul_w = equal_weights(ul_dux);
    auto zf = mc_ul_sinr(in.stats, in.gains, in.pilots, ul_dux, ul_pw, ul_w,
                         in.cfg, opt);
    opt.combiner = McOptions::Combiner::mmse;
    auto mmse = mc_ul_sinr(in.stats, in.gains, in.pilots, ul_dux, ul_pw, ul_w,
                           in.cfg, opt);
    REQUIRE(mmse.feasible);
    for (int i = 0; i < mmse.sinr.size(); ++i) {
        CHECK(std::isfinite(mmse.sinr(i)));
        CHECK(mmse.sinr(i) > 0.0);
    }
    CHECK(mmse.sinr.mean() >= 0.7 * zf.sinr.mean());

    auto dl_dux = make_dtdd({0, 2, 3}, {1}, in.geom);
    auto dl_pw = equal_power(dl_dux, in.cfg);
    opt.combiner = McOptions::Combiner::zf;
    auto zf_dl = mc_dl_sinr(in.stats, in.gains, in.pilots, dl_dux, dl_pw,
                            in.cfg, opt);
    opt.precoder = McOptions::Precoder::rzf;
    auto rzf = mc_dl_sinr(in.stats, in.gains, in.pilots, dl_dux, dl_pw, in.cfg,
                          opt);
    REQUIRE(rzf.feasible);
    for (int i = 0; i < rzf.sinr.size(); ++i) {
        CHECK(std::isfinite(rzf.sinr(i)));
        CHECK(rzf.sinr(i) > 0.0);
    }
    CHECK(rzf.sinr.mean() >= 0.7 * zf_dl.sinr.mean());
}

TEST_CASE("estimates are reproducible and thread count invariant") {
    auto in = desk_instance(409);
    McOptions opt;
    opt.trials = 600;
    opt.seed = 77;

    auto a = mc_ul_sinr(in.stats, in.gains, in.pilots, in.dux, in.pw, in.w,
                        in.cfg, opt);
    auto b = mc_ul_sinr(in.stats, in.gains, in.pilots, in.dux, in.pw, in.w,
                        in.cfg, opt);
    CHECK((a.sinr.array() == b.sinr.array()).all());
    CHECK((a.signal.array() == b.signal.array()).all());
    CHECK((a.est.array() == b.est.array()).all());

    // The per-block accumulation layout makes the reduction order independent
    // of how many workers execute the blocks.
    opt.threads = 4;
    auto c = mc_ul_sinr(in.stats, in.gains, in.pilots, in.dux, in.pw, in.w,
                        in.cfg, opt);
    CHECK((a.sinr.array() == c.sinr.array()).all());
    CHECK((a.signal.array() == c.signal.array()).all());

    opt.threads = 1;
    opt.seed = 78;
    auto d = mc_ul_sinr(in.stats, in.gains, in.pilots, in.dux, in.pw, in.w,
                        in.cfg, opt);
    CHECK_FALSE(a.sinr.isApprox(d.sinr));

    auto e = mc_dl_sinr(in.stats, in.gains, in.pilots, in.dux, in.pw, in.cfg,
                        opt);
    opt.threads = 3;
    auto f = mc_dl_sinr(in.stats, in.gains, in.pilots, in.dux, in.pw, in.cfg,
                        opt);
    CHECK((e.sinr.array() == f.sinr.array()).all());
}
