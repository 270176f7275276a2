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

// Command-line front end. Verbs:
//   run             execute an experiment spec and write result tables
//   validate-config check a config or experiment file and report problems
//   oracle-check    compare closed-form SINR terms against Monte Carlo
//   schedule-gap    measure greedy AP scheduling against exhaustive search

#include <iostream>

#include <CLI11.hpp>

#include "cfduplex/cfduplex.hpp"

namespace {

constexpr const char *kVersion = "0.1.0";

cfduplex::SystemConfig small_test_config() {
    cfduplex::SystemConfig cfg;
    cfg.num_aps = 4;
    cfg.antennas_per_ap = 8;
    cfg.n_tx = 4;
    cfg.n_rx = 4;
    cfg.num_ues = 6;
    cfg.area_side_m = 250.0;
    return cfg;
}

void write_file(const std::filesystem::path &p, const std::string &body) {
    std::ofstream os(p);
    os << body;
}

void write_trace(const std::filesystem::path &p, const char *col,
                 const std::vector<double> &values) {
    std::ofstream os(p);
    os << "iter," << col << "\n";
    for (std::size_t i = 0; i < values.size(); ++i)
        os << i << ',' << cfduplex::detail::fmt_num(values[i]) << '\n';
}

int cmd_run(const std::string &spec_path, const std::string &out_dir,
            std::optional<std::uint64_t> seed, std::optional<int> trials,
            const std::string &profile, bool trace) {
    using namespace cfduplex;
    ExperimentSpec spec = load_experiment(spec_path);
    if (seed) spec.base.seed = *seed;
    if (trials) spec.trials = *trials;
    if (profile == "desk") spec.trials = std::min(spec.trials, 200);
    require_valid(spec.base);

    const ResultTable table = run_experiment(spec);
    write_experiment_outputs(out_dir, spec, table);

    if (trace) {
        // Single-instance diagnostic artifacts for the base config, trial 0.
        const SystemConfig &cfg = spec.base;
        const std::uint64_t s = derive_seed(cfg.seed, 0);
        const NetworkGeometry geom = generate_geometry(cfg, s);
        const LargeScaleGains gains = large_scale_fading(geom, cfg, s);
        const ConnectivityGraph conn = build_connectivity(geom, cfg);
        const ConflictGraph g = conflict_graph(conn);
        const PilotAssignment pilots = color_graph(g, s);
        const std::filesystem::path dir(out_dir);
        {
            std::ofstream os(dir / "positions.csv");
            write_positions_csv(os, geom);
        }
        {
            std::ofstream os(dir / "gains.csv");
            write_gains_csv(os, gains);
        }
        {
            std::ofstream os(dir / "pilots.csv");
            write_pilots_csv(os, pilots);
        }
        {
            std::ofstream os(dir / "conflict_edges.txt");
            write_conflict_edges(os, g);
        }
        const DuplexStats stats = make_duplex_stats(gains, pilots, cfg, DuplexMode::dtdd);
        const ScheduleResult sched =
            greedy_mode_select(geom, stats, gains, pilots, cfg, ScheduleEval::full);
        {
            std::ofstream os(dir / "schedule.csv");
            write_schedule_csv(os, sched);
        }
        {
            std::ofstream os(dir / "trace_schedule.csv");
            write_se_trace_csv(os, sched.se_trace);
        }
        write_trace(dir / "trace_alternate.csv", "sum_se", sched.joint.sum_se_trace);
        const DuplexConfig dux = make_dtdd(sched.ul_aps, sched.dl_aps, geom);
        const UlPowerResult ul = ul_power_control(stats, gains, pilots, dux,
                                                  sched.joint.weights,
                                                  sched.joint.power, cfg);
        write_trace(dir / "trace_ul_fp.csv", "objective", ul.objective_trace);
        const DlPowerResult dl =
            dl_power_control(stats, gains, pilots, dux, ul.e_u, cfg);
        write_trace(dir / "trace_dl_fp.csv", "objective", dl.objective_trace);
        const QcqpProblem prob = build_qcqp(stats, gains, pilots, dux, ul.e_u, cfg);
        const AdmmResult admm =
            admm_qcqp(prob, dl.varpi, dl.varpi_tilde, dl.kappa, cfg);
        write_trace(dir / "trace_admm.csv", "residual", admm.residual_trace);
    }

    // Console digest: mean sum SE per arm and sweep value.
    const nlohmann::json summary = result_summary_json(table);
    std::cout << "experiment " << spec.name << ": " << spec.trials
              << " trial(s) per point\n";
    for (const auto &g : summary["groups"])
        std::cout << "  arm=" << g["arm"].get<std::string>()
                  << " sweep=" << g["sweep_value"].get<double>() << " sum_se(mean)="
                  << g["metrics"]["sum_se"]["mean"].get<double>() << "\n";
    std::cout << "results written to " << out_dir << "\n";
    return 0;
}

int cmd_validate(const std::string &path) {
    using namespace cfduplex;
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return 1;
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception &e) {
        std::cerr << "invalid JSON: " << e.what() << "\n";
        return 1;
    }
    try {
        std::vector<std::string> problems;
        if (j.contains("arms")) {
            const ExperimentSpec spec = experiment_from_json(j);
            problems = validate_config(spec.base);
            for (const ArmSpec &arm : spec.arms)
                if (!arm.overrides.is_null() && !arm.overrides.empty()) {
                    std::vector<std::string> oerrs;
                    const SystemConfig merged =
                        config_from_json(arm.overrides, &oerrs, spec.base);
                    for (const std::string &p : oerrs)
                        problems.push_back("arm " + arm.name + ": " + p);
                    for (const std::string &p : validate_config(merged))
                        problems.push_back("arm " + arm.name + ": " + p);
                }
            std::cout << "experiment spec with " << spec.arms.size() << " arm(s), "
                      << spec.trials << " trial(s)\n";
        } else {
            problems = validate_config(config_from_json(j));
            std::cout << "system config\n";
        }
        if (problems.empty()) {
            std::cout << "ok\n";
            return 0;
        }
        for (const std::string &p : problems) std::cout << "problem: " << p << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_oracle_check(const std::string &config_path, std::uint64_t seed, int trials,
                     int threads, double tol_sinr, double tol_terms) {
    using namespace cfduplex;
    SystemConfig cfg = config_path.empty() ? small_test_config()
                                           : load_config(config_path);
    cfg.seed = seed;
    require_valid(cfg);

    const std::uint64_t s = derive_seed(cfg.seed, 0);
    const NetworkGeometry geom = generate_geometry(cfg, s);
    const LargeScaleGains gains = large_scale_fading(geom, cfg, s);
    const ConnectivityGraph conn = build_connectivity(geom, cfg);
    const PilotAssignment pilots = color_graph(conflict_graph(conn), s);
    const DuplexStats stats = make_duplex_stats(gains, pilots, cfg, DuplexMode::dtdd);
    std::vector<int> ul, dl;
    const int m_total = cfg.num_aps;
    for (int m = 0; m < m_total; ++m) (m % 2 == 0 ? ul : dl).push_back(m);
    const DuplexConfig dux = make_dtdd(ul, dl, geom);
    const PowerAllocation pw = equal_power(dux, cfg);
    const UplinkWeights w = optimal_weights_zf(stats, gains, pilots, dux, pw, cfg);

    McOptions opt;
    opt.trials = trials;
    opt.seed = derive_seed(cfg.seed, 1);
    opt.threads = threads;

    int failures = 0;
    auto check = [&](const std::string &label, double got, double want, double tol) {
        const double denom = std::max(std::abs(want), 1e-300);
        const double rel = std::abs(got - want) / denom;
        const bool ok = rel <= tol;
        if (!ok) ++failures;
        std::cout << (ok ? "  ok   " : "  FAIL ") << label << " closed=" << want
                  << " mc=" << got << " rel=" << rel << " tol=" << tol << "\n";
    };

    std::cout << "uplink (" << dux.ul_ues.size() << " UE)\n";
    {
        const UlSinrTerms cf = ul_sinr_zf(stats, gains, pilots, dux, pw, w, cfg);
        const UlSinrTerms mc = mc_ul_sinr(stats, gains, pilots, dux, pw, w, cfg, opt);
        for (std::size_t ki = 0; ki < dux.ul_ues.size(); ++ki) {
            const auto i = static_cast<Eigen::Index>(ki);
            const std::string tag = "ue" + std::to_string(dux.ul_ues[ki]);
            check(tag + " sinr", mc.sinr(i), cf.sinr(i), tol_sinr);
            check(tag + " signal", mc.signal(i), cf.signal(i), tol_terms);
            const double cf_int = cf.est(i) + cf.mui(i) + cf.iap(i) + cf.noise(i);
            const double mc_int = mc.est(i) + mc.mui(i) + mc.iap(i) + mc.noise(i);
            check(tag + " interference", mc_int, cf_int, tol_terms);
        }
    }
    std::cout << "downlink (" << dux.dl_ues.size() << " UE)\n";
    {
        const DlSinrTerms cf = dl_sinr_zf(stats, gains, pilots, dux, pw, cfg);
        const DlSinrTerms mc = mc_dl_sinr(stats, gains, pilots, dux, pw, cfg, opt);
        for (std::size_t ni = 0; ni < dux.dl_ues.size(); ++ni) {
            const auto i = static_cast<Eigen::Index>(ni);
            const std::string tag = "ue" + std::to_string(dux.dl_ues[ni]);
            check(tag + " sinr", mc.sinr(i), cf.sinr(i), tol_sinr);
            check(tag + " signal", mc.signal(i), cf.signal(i), tol_terms);
            const double cf_int = cf.est(i) + cf.mui(i) + cf.iue(i) + cf.noise;
            const double mc_int = mc.est(i) + mc.mui(i) + mc.iue(i) + mc.noise;
            check(tag + " interference", mc_int, cf_int, tol_terms);
        }
    }
    std::cout << (failures == 0 ? "oracle-check: all terms within tolerance\n"
                                : "oracle-check: FAILURES\n");
    return failures == 0 ? 0 : 1;
}

int cmd_schedule_gap(const std::string &config_path, std::uint64_t seed,
                     int instances, const std::string &out_path) {
    using namespace cfduplex;
    SystemConfig cfg;
    if (config_path.empty()) {
        cfg = small_test_config();
        cfg.num_aps = 6;
    } else {
        cfg = load_config(config_path);
    }
    cfg.seed = seed;
    require_valid(cfg);
    if (cfg.num_aps > 10) {
        std::cerr << "schedule-gap needs num_aps <= 10 for the exhaustive pass\n";
        return 1;
    }

    std::ostringstream csv;
    csv << "instance,greedy,exhaustive,ratio\n";
    double min_ratio = std::numeric_limits<double>::infinity();
    int hits = 0;
    for (int i = 0; i < instances; ++i) {
        const std::uint64_t s = derive_seed(cfg.seed, i);
        const NetworkGeometry geom = generate_geometry(cfg, s);
        const LargeScaleGains gains = large_scale_fading(geom, cfg, s);
        const ConnectivityGraph conn = build_connectivity(geom, cfg);
        const PilotAssignment pilots = color_graph(conflict_graph(conn), s);
        const DuplexStats stats =
            make_duplex_stats(gains, pilots, cfg, DuplexMode::dtdd);
        const ScheduleResult g =
            greedy_mode_select(geom, stats, gains, pilots, cfg, ScheduleEval::full);
        const ScheduleResult x =
            exhaustive_mode_select(geom, stats, gains, pilots, cfg);
        const double ratio = x.sum_se > 0.0 ? g.sum_se / x.sum_se : 1.0;
        min_ratio = std::min(min_ratio, ratio);
        if (ratio >= 0.85) ++hits;
        csv << i << ',' << detail::fmt_num(g.sum_se) << ','
            << detail::fmt_num(x.sum_se) << ',' << detail::fmt_num(ratio) << '\n';
    }
    if (out_path.empty())
        std::cout << csv.str();
    else
        write_file(out_path, csv.str());
    std::cout << "instances=" << instances << " min_ratio=" << min_ratio
              << " frac_ge_0.85=" << double(hits) / std::max(instances, 1) << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"cell-free MIMO uplink/downlink SE simulator"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string spec_path, out_dir = "out", profile = "paper";
    std::optional<std::uint64_t> seed_opt;
    std::optional<int> trials_opt;
    bool trace = false;
    auto *run = app.add_subcommand("run", "run an experiment spec");
    run->add_option("--spec", spec_path, "experiment spec JSON")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed_opt, "override base seed");
    run->add_option("--trials", trials_opt, "override trial count");
    run->add_option("--profile", profile,
                    "desk (trials capped at 200) or paper (run spec as written)")
        ->check(CLI::IsMember({"desk", "paper"}));
    run->add_flag("--trace", trace, "emit per-instance diagnostic files");

    std::string validate_path;
    auto *val = app.add_subcommand("validate-config",
                                   "validate a config or experiment file");
    val->add_option("file", validate_path, "JSON file")->required();

    std::string oc_config;
    std::uint64_t oc_seed = 1;
    int oc_trials = 100000, oc_threads = 1;
    double oc_tol_sinr = 0.02, oc_tol_terms = 0.03;
    auto *oc = app.add_subcommand("oracle-check",
                                  "closed-form SINR terms vs Monte Carlo");
    oc->add_option("--config", oc_config, "system config JSON");
    oc->add_option("--seed", oc_seed, "instance seed");
    oc->add_option("--trials", oc_trials, "Monte Carlo channel draws");
    oc->add_option("--threads", oc_threads, "worker threads");
    oc->add_option("--tol-sinr", oc_tol_sinr, "relative SINR tolerance");
    oc->add_option("--tol-terms", oc_tol_terms, "relative per-term tolerance");

    std::string sg_config, sg_out;
    std::uint64_t sg_seed = 1;
    int sg_instances = 10;
    auto *sg = app.add_subcommand("schedule-gap",
                                  "greedy vs exhaustive AP scheduling");
    sg->add_option("--config", sg_config, "system config JSON (num_aps <= 10)");
    sg->add_option("--seed", sg_seed, "base seed");
    sg->add_option("--instances", sg_instances, "number of network draws");
    sg->add_option("--out", sg_out, "write the gap table to a file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(spec_path, out_dir, seed_opt, trials_opt, profile, trace);
        if (val->parsed()) return cmd_validate(validate_path);
        if (oc->parsed())
            return cmd_oracle_check(oc_config, oc_seed, oc_trials, oc_threads,
                                    oc_tol_sinr, oc_tol_terms);
        if (sg->parsed())
            return cmd_schedule_gap(sg_config, sg_seed, sg_instances, sg_out);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
