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

// Experiment harness: runs named arms (operating mode + policy choices) over
// shared random trials and an optional one-dimensional config sweep, and
// serializes the results. Pairing rules keep comparisons honest: every arm of
// a trial sees the same geometry, shadowing and pilot assignment, and trial
// seeds do not depend on the sweep value, so a sweep isolates the swept
// parameter.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "cfduplex/schedule.hpp"
#include "cfduplex/stats.hpp"

namespace cfduplex {

enum class ArmMode { dtdd, fd };
enum class SchedulePolicy { fixed_half, greedy_cheap, greedy_full, exhaustive };
enum class PowerPolicy { equal, optimized };
enum class WeightPolicy { equal, optimal };
enum class PilotPolicy { graph, random, orthogonal };

struct ArmSpec {
    std::string name;
    ArmMode mode = ArmMode::dtdd;
    SchedulePolicy schedule = SchedulePolicy::greedy_cheap; // dtdd arms only
    PowerPolicy power = PowerPolicy::optimized;
    WeightPolicy weights = WeightPolicy::optimal;
    PilotPolicy pilots = PilotPolicy::graph;
    nlohmann::json overrides; // config fields applied on top of the trial config
};

struct ExperimentSpec {
    std::string name = "experiment";
    SystemConfig base;
    std::string sweep_path;           // JSON pointer, e.g. "/irai_rel_noise_db"
    std::vector<double> sweep_values; // empty: single pass over the base config
    int trials = 1;
    std::vector<ArmSpec> arms;
};

struct TrialRow {
    std::string arm;
    double sweep_value = 0.0;
    int trial = 0;
    std::string metric;
    double value = 0.0;
};

struct ResultTable {
    std::string experiment;
    std::vector<TrialRow> rows;
};

namespace detail {

template <typename T, std::size_t N>
inline T parse_enum(const std::string &s, const std::pair<const char *, T> (&table)[N],
                    const char *what) {
    for (const auto &[name, v] : table)
        if (s == name) return v;
    throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
}

template <typename T, std::size_t N>
inline const char *enum_name(T v, const std::pair<const char *, T> (&table)[N]) {
    for (const auto &[name, t] : table)
        if (t == v) return name;
    return "?";
}

inline constexpr std::pair<const char *, ArmMode> arm_mode_table[] = {
    {"dtdd", ArmMode::dtdd}, {"fd", ArmMode::fd}};
inline constexpr std::pair<const char *, SchedulePolicy> schedule_table[] = {
    {"fixed_half", SchedulePolicy::fixed_half},
    {"greedy_cheap", SchedulePolicy::greedy_cheap},
    {"greedy_full", SchedulePolicy::greedy_full},
    {"exhaustive", SchedulePolicy::exhaustive}};
inline constexpr std::pair<const char *, PowerPolicy> power_table[] = {
    {"equal", PowerPolicy::equal}, {"optimized", PowerPolicy::optimized}};
inline constexpr std::pair<const char *, WeightPolicy> weight_table[] = {
    {"equal", WeightPolicy::equal}, {"optimal", WeightPolicy::optimal}};
inline constexpr std::pair<const char *, PilotPolicy> pilot_table[] = {
    {"graph", PilotPolicy::graph},
    {"random", PilotPolicy::random},
    {"orthogonal", PilotPolicy::orthogonal}};

// Fixed-width float formatting so that repeated runs serialize identically.
inline std::string fmt_num(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

} // namespace detail

inline ArmSpec arm_from_json(const nlohmann::json &j) {
    ArmSpec a;
    a.name = j.at("name").get<std::string>();
    if (j.contains("mode"))
        a.mode = detail::parse_enum(j["mode"].get<std::string>(),
                                    detail::arm_mode_table, "mode");
    if (j.contains("schedule"))
        a.schedule = detail::parse_enum(j["schedule"].get<std::string>(),
                                        detail::schedule_table, "schedule");
    if (j.contains("power"))
        a.power = detail::parse_enum(j["power"].get<std::string>(),
                                     detail::power_table, "power policy");
    if (j.contains("weights"))
        a.weights = detail::parse_enum(j["weights"].get<std::string>(),
                                       detail::weight_table, "weight policy");
    if (j.contains("pilots"))
        a.pilots = detail::parse_enum(j["pilots"].get<std::string>(),
                                      detail::pilot_table, "pilot policy");
    if (j.contains("overrides")) a.overrides = j["overrides"];
    return a;
}

inline nlohmann::json arm_to_json(const ArmSpec &a) {
    nlohmann::json j;
    j["name"] = a.name;
    j["mode"] = detail::enum_name(a.mode, detail::arm_mode_table);
    j["schedule"] = detail::enum_name(a.schedule, detail::schedule_table);
    j["power"] = detail::enum_name(a.power, detail::power_table);
    j["weights"] = detail::enum_name(a.weights, detail::weight_table);
    j["pilots"] = detail::enum_name(a.pilots, detail::pilot_table);
    if (!a.overrides.is_null() && !a.overrides.empty()) j["overrides"] = a.overrides;
    return j;
}

inline ExperimentSpec experiment_from_json(const nlohmann::json &j) {
    ExperimentSpec spec;
    if (j.contains("name")) spec.name = j["name"].get<std::string>();
    std::vector<std::string> errs;
    spec.base = config_from_json(j.value("config", nlohmann::json::object()), &errs);
    if (!errs.empty()) throw std::invalid_argument("config: " + errs.front());
    if (j.contains("sweep")) {
        spec.sweep_path = j["sweep"].at("path").get<std::string>();
        spec.sweep_values = j["sweep"].at("values").get<std::vector<double>>();
        if (spec.sweep_path.empty() || spec.sweep_path[0] != '/')
            throw std::invalid_argument("sweep.path must be a JSON pointer");
    }
    spec.trials = j.value("trials", 1);
    if (spec.trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (!j.contains("arms") || !j["arms"].is_array() || j["arms"].empty())
        throw std::invalid_argument("experiment needs a non-empty arms array");
    for (const auto &ja : j["arms"]) spec.arms.push_back(arm_from_json(ja));
    return spec;
}

inline nlohmann::json experiment_to_json(const ExperimentSpec &spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    j["config"] = config_to_json(spec.base);
    if (!spec.sweep_path.empty()) {
        j["sweep"]["path"] = spec.sweep_path;
        j["sweep"]["values"] = spec.sweep_values;
    }
    j["trials"] = spec.trials;
    for (const auto &a : spec.arms) j["arms"].push_back(arm_to_json(a));
    return j;
}

inline ExperimentSpec load_experiment(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open experiment spec: " + path);
    nlohmann::json j;
    in >> j;
    return experiment_from_json(j);
}

namespace detail {

inline SystemConfig apply_sweep(const SystemConfig &base, const std::string &path,
                                double value) {
    if (path.empty()) return base;
    nlohmann::json j = config_to_json(base);
    j[nlohmann::json::json_pointer(path)] = value;
    std::vector<std::string> errs;
    const SystemConfig cfg = config_from_json(j, &errs);
    if (!errs.empty())
        throw std::invalid_argument("sweep path '" + path + "': " + errs.front());
    return cfg;
}

inline PilotAssignment assign_pilots(PilotPolicy policy, const SystemConfig &cfg,
                                     const NetworkGeometry &geom,
                                     std::uint64_t seed) {
    if (policy == PilotPolicy::orthogonal) return orthogonal_assignment(cfg.num_ues);
    const ConnectivityGraph conn = build_connectivity(geom, cfg);
    const PilotAssignment colored = color_graph(conflict_graph(conn), seed);
    if (policy == PilotPolicy::graph) return colored;
    // Random baseline at the same pilot overhead the coloring required.
    return random_assignment(cfg.num_ues, colored.tau_p, seed);
}

struct ArmOutcome {
    double sum_se = 0.0, ul_sum = 0.0, dl_sum = 0.0;
    double tau_p = 0.0, nmse_mean = 0.0;
    bool converged = true, zf_infeasible = false, failure = false;
};

inline ArmOutcome run_arm(const ArmSpec &arm, const SystemConfig &trial_cfg,
                          const NetworkGeometry &geom, const LargeScaleGains &gains,
                          const PilotAssignment &pilots, std::uint64_t seed) {
    ArmOutcome out;
    SystemConfig cfg = trial_cfg;
    if (!arm.overrides.is_null() && !arm.overrides.empty()) {
        std::vector<std::string> errs;
        cfg = config_from_json(arm.overrides, &errs, trial_cfg);
        if (!errs.empty())
            throw std::invalid_argument("arm '" + arm.name +
                                        "' overrides: " + errs.front());
    }
    require_valid(cfg);

    // Overrides that move interference levels need refreshed gains; the seed
    // is unchanged, so geometry and shadowing stay paired with the other arms.
    const LargeScaleGains *g = &gains;
    LargeScaleGains regenerated;
    if (!arm.overrides.is_null() && !arm.overrides.empty()) {
        regenerated = large_scale_fading(geom, cfg, seed);
        g = &regenerated;
    }

    const DuplexMode mode = arm.mode == ArmMode::fd ? DuplexMode::fd : DuplexMode::dtdd;
    const DuplexStats stats = make_duplex_stats(*g, pilots, cfg, mode);

    DuplexConfig dux;
    ScheduleResult sched;
    const int m_total = static_cast<int>(geom.ap_xy.rows());
    if (arm.mode == ArmMode::fd) {
        dux = make_fd(m_total, geom);
    } else if (arm.schedule == SchedulePolicy::fixed_half) {
        std::vector<int> ul, dl;
        for (int m = 0; m < m_total; ++m) (m % 2 == 0 ? ul : dl).push_back(m);
        dux = make_dtdd(ul, dl, geom);
    } else {
        const ScheduleEval ev = arm.schedule == SchedulePolicy::greedy_full
                                    ? ScheduleEval::full
                                    : ScheduleEval::cheap;
        sched = arm.schedule == SchedulePolicy::exhaustive
                    ? exhaustive_mode_select(geom, stats, *g, pilots, cfg)
                    : greedy_mode_select(geom, stats, *g, pilots, cfg, ev);
        dux = make_dtdd(sched.ul_aps, sched.dl_aps, geom);
    }

    SEReport report;
    if (arm.power == PowerPolicy::optimized) {
        AlternateOptions opts;
        opts.optimal_weights = arm.weights == WeightPolicy::optimal;
        const JointPowerResult joint =
            alternate_ul_dl(stats, *g, pilots, dux, cfg, opts);
        report = joint.report;
        out.converged = joint.converged;
    } else {
        const PowerAllocation pw = equal_power(dux, cfg);
        const UplinkWeights w =
            arm.weights == WeightPolicy::optimal
                ? optimal_weights_zf(stats, *g, pilots, dux, pw, cfg)
                : equal_weights(dux);
        report = evaluate_se(stats, *g, pilots, dux, pw, w, cfg);
    }

    out.sum_se = report.sum_se;
    out.ul_sum = report.ul_sum;
    out.dl_sum = report.dl_sum;
    out.tau_p = pilots.tau_p;
    out.nmse_mean = nmse(stats.ul, g->beta_ul).mean();
    out.zf_infeasible = (!report.ul_feasible && !dux.ul_ues.empty()) ||
                        (!report.dl_feasible && !dux.dl_ues.empty());
    return out;
}

} // namespace detail

// Runs the full experiment grid. Row order is canonical (sweep value, trial,
// arm, metric) and every quantity is derived from the spec seed, so repeated
// runs produce identical tables.
inline ResultTable run_experiment(const ExperimentSpec &spec) {
    ResultTable table;
    table.experiment = spec.name;
    std::vector<double> sweep = spec.sweep_values;
    if (sweep.empty()) sweep.push_back(0.0);

    for (double value : sweep) {
        const SystemConfig cfg =
            detail::apply_sweep(spec.base, spec.sweep_path, value);
        require_valid(cfg);
        for (int t = 0; t < spec.trials; ++t) {
            const std::uint64_t seed = derive_seed(cfg.seed, t);
            const NetworkGeometry geom = generate_geometry(cfg, seed);
            const LargeScaleGains gains = large_scale_fading(geom, cfg, seed);
            // One pilot assignment per distinct policy, shared by the arms
            // that request it, so arms differ only in what is under test.
            std::map<PilotPolicy, PilotAssignment> pilot_cache;
            for (const ArmSpec &arm : spec.arms) {
                if (!pilot_cache.count(arm.pilots))
                    pilot_cache.emplace(arm.pilots,
                                        detail::assign_pilots(arm.pilots, cfg, geom,
                                                              seed));
                detail::ArmOutcome o;
                try {
                    o = detail::run_arm(arm, cfg, geom, gains,
                                        pilot_cache.at(arm.pilots), seed);
                } catch (const std::exception &) {
                    o = detail::ArmOutcome{};
                    o.failure = true;
                    o.converged = false;
                }
                const std::pair<const char *, double> metrics[] = {
                    {"sum_se", o.sum_se},
                    {"ul_sum_se", o.ul_sum},
                    {"dl_sum_se", o.dl_sum},
                    {"tau_p", o.tau_p},
                    {"nmse_mean", o.nmse_mean},
                    {"converged", o.converged ? 1.0 : 0.0},
                    {"zf_infeasible", o.zf_infeasible ? 1.0 : 0.0},
                    {"failure", o.failure ? 1.0 : 0.0},
                };
                for (const auto &[name, v] : metrics)
                    table.rows.push_back({arm.name, value, t, name, v});
            }
        }
    }
    return table;
}

inline void write_result_csv(std::ostream &os, const ResultTable &table) {
    os << "experiment,arm,sweep_value,trial,metric,value\n";
    for (const TrialRow &r : table.rows)
        os << table.experiment << ',' << r.arm << ',' << detail::fmt_num(r.sweep_value)
           << ',' << r.trial << ',' << r.metric << ',' << detail::fmt_num(r.value)
           << '\n';
}

// Percentile summary per (arm, sweep value, metric), emitted in row order.
inline nlohmann::json result_summary_json(const ResultTable &table) {
    nlohmann::json out;
    out["schema_version"] = 1;
    out["experiment"] = table.experiment;
    std::map<std::pair<std::string, double>, std::map<std::string, std::vector<double>>>
        groups;
    for (const TrialRow &r : table.rows)
        groups[{r.arm, r.sweep_value}][r.metric].push_back(r.value);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &[key, metrics] : groups) {
        nlohmann::json g;
        g["arm"] = key.first;
        g["sweep_value"] = key.second;
        for (const auto &[metric, vals] : metrics) {
            nlohmann::json s;
            s["mean"] = pairwise_sum(vals) / double(vals.size());
            s["p10"] = percentile(vals, 0.10);
            s["p50"] = percentile(vals, 0.50);
            s["p90"] = percentile(vals, 0.90);
            g["metrics"][metric] = s;
        }
        rows.push_back(g);
    }
    out["groups"] = rows;
    return out;
}

inline void write_gains_csv(std::ostream &os, const LargeScaleGains &gains) {
    os << "m,k,beta,dist_m\n";
    for (int m = 0; m < gains.beta.rows(); ++m)
        for (int k = 0; k < gains.beta.cols(); ++k)
            os << m << ',' << k << ',' << detail::fmt_num(gains.beta(m, k)) << ','
               << detail::fmt_num(gains.dist_ap_ue(m, k)) << '\n';
}

inline void write_positions_csv(std::ostream &os, const NetworkGeometry &geom) {
    os << "kind,id,x,y,direction\n";
    for (int m = 0; m < geom.ap_xy.rows(); ++m)
        os << "ap," << m << ',' << detail::fmt_num(geom.ap_xy(m, 0)) << ','
           << detail::fmt_num(geom.ap_xy(m, 1)) << ",-\n";
    for (int k = 0; k < geom.ue_xy.rows(); ++k)
        os << "ue," << k << ',' << detail::fmt_num(geom.ue_xy(k, 0)) << ','
           << detail::fmt_num(geom.ue_xy(k, 1)) << ','
           << (geom.is_ul[k] ? "ul" : "dl") << '\n';
}

// Writes results.csv, summary.json and manifest.json into out_dir.
inline void write_experiment_outputs(const std::string &out_dir,
                                     const ExperimentSpec &spec,
                                     const ResultTable &table) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream os(fs::path(out_dir) / "results.csv");
        write_result_csv(os, table);
    }
    {
        std::ofstream os(fs::path(out_dir) / "summary.json");
        os << result_summary_json(table).dump(2) << '\n';
    }
    {
        nlohmann::json manifest;
        manifest["schema_version"] = 1;
        manifest["spec"] = experiment_to_json(spec);
        manifest["outputs"] = {"results.csv", "summary.json", "manifest.json"};
        std::ofstream os(fs::path(out_dir) / "manifest.json");
        os << manifest.dump(2) << '\n';
    }
}

} // namespace cfduplex
