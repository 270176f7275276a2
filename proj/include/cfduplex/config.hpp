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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfduplex {

inline double db_to_lin(double x_db) { return std::pow(10.0, x_db / 10.0); }
inline double lin_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_watt(double x_dbm) { return std::pow(10.0, (x_dbm - 30.0) / 10.0); }

// Three-slope path-loss model. Distances enter in km; below d0 the loss is
// flat, between d0 and d1 it falls at 20 dB/decade, beyond d1 at 35 dB/decade
// with intercept l_db (COST-231 Hata at 1.9 GHz, 15 m AP / 1.65 m UE heights).
struct ThreeSlopePathLoss {
    double l_db = 140.72; // far-slope intercept [dB]
    double d0_m = 10.0;   // near breakpoint [m]
    double d1_m = 50.0;   // far breakpoint [m]
};

// Single-slope reference model used only by the cluster-radius SNR rule.
struct SimplePathLoss {
    double d0_m = 20.0;      // reference distance [m]
    double exponent = 3.76;  // path-loss exponent
};

// Distances below this are clamped to avoid the path-loss singularity at 0.
inline constexpr double kMinDistanceM = 1.0;

// Three-slope loss in dB (negative gain). Distances in meters.
inline double three_slope_pl_db(double d_m, const ThreeSlopePathLoss &ts) {
    d_m = std::max(d_m, kMinDistanceM);
    const double d_km = d_m / 1000.0;
    const double d0_km = ts.d0_m / 1000.0;
    const double d1_km = ts.d1_m / 1000.0;
    if (d_m > ts.d1_m) return -ts.l_db - 35.0 * std::log10(d_km);
    if (d_m > ts.d0_m)
        return -ts.l_db - 15.0 * std::log10(d1_km) - 20.0 * std::log10(d_km);
    return -ts.l_db - 15.0 * std::log10(d1_km) - 20.0 * std::log10(d0_km);
}

// Single-slope gain (d/d0)^-exponent used by the cluster-radius SNR rule.
inline double simple_pl_gain(double d_m, const SimplePathLoss &sp) {
    d_m = std::max(d_m, kMinDistanceM);
    return std::pow(d_m / sp.d0_m, -sp.exponent);
}

// Full system description. All powers are linear watts unless the key carries
// a _db / _dbm suffix. Serialized as flat JSON with these exact key names.
struct SystemConfig {
    double area_side_m = 1000.0;  // square deployment area side length [m]
    int num_aps = 16;             // M
    int antennas_per_ap = 8;      // N (half-duplex array size)
    int n_tx = 4;                 // full-duplex transmit array size
    int n_rx = 4;                 // full-duplex receive array size
    int num_ues = 16;             // K
    double ul_fraction = 0.5;     // |UL UEs| = floor(ul_fraction * K)
    int coherence_len = 200;      // coherence block length tau [symbols]
    double pilot_snr_db = 20.0;   // per-UE pilot SNR over noise power
    std::vector<double> pilot_snr_per_ue_db; // optional per-UE override (size K)
    double noise_power_dbm = -92.0;
    double bandwidth_hz = 20e6;
    double shadow_sigma_db = 6.0; // log-normal shadowing std dev
    bool shadow_all_slopes = false; // default: shadowing on the far slope only
    ThreeSlopePathLoss pathloss_threeslope;
    SimplePathLoss simple_pl;
    double gamma_min_db = 0.0;    // min post-combining pilot SNR for the radius rule
    double r_o_scale = 1.0;       // multiplier on the computed cluster radius
    double inai_rel_noise_db = -40.0; // AP->AP residual level relative to noise
    double irai_rel_noise_db = -40.0; // self-interference level relative to noise
    bool inai_distance_scaled = false; // optional: scale AP->AP level by path loss
    double ul_power_max = 0.1;    // per-UE UL budget E_max [W]
    double dl_power_total = 1.0;  // per-AP DL budget E_d [W]
    double delta_u = 1e-3;        // UL power-control objective tolerance [nats]
    double delta_d = 1e-3;        // DL power-control objective tolerance [nats]
    double delta_admm = 1e-3;     // ADMM consensus tolerance
    double admm_penalty = 1.0;    // consensus penalty, relative to the
                                  // surrogate's quadratic scale
    int fp_max_iter = 500;        // cap on FP iterations (UL and DL outer)
    int admm_max_iter = 500;      // cap on ADMM consensus iterations
    int outer_max_iter = 20;      // cap on UL/DL alternation passes
    int mc_trials = 200;          // default trial count for the harness
    std::uint64_t seed = 1;

    double noise_w() const { return dbm_to_watt(noise_power_dbm); }

    // Pilot symbol power of UE k (uniform unless the per-UE override is set).
    // The configured SNR is anchored at the reference distance simple_pl.d0_m:
    // a pilot received from there (no shadowing) sits pilot_snr_db above the
    // per-antenna noise floor, so the dB knob stays meaningful under the
    // absolute path-loss intercept.
    double pilot_power_w(int k = -1) const {
        const double ref_gain =
            db_to_lin(three_slope_pl_db(simple_pl.d0_m, pathloss_threeslope));
        double snr_db = pilot_snr_db;
        if (k >= 0 && k < static_cast<int>(pilot_snr_per_ue_db.size()))
            snr_db = pilot_snr_per_ue_db[k];
        return db_to_lin(snr_db) * noise_w() / ref_gain;
    }

    int num_ul_ues() const {
        return static_cast<int>(std::floor(ul_fraction * num_ues + 1e-12));
    }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization and validation
// ---------------------------------------------------------------------------

inline nlohmann::json config_to_json(const SystemConfig &c) {
    nlohmann::json j;
    j["area_side_m"] = c.area_side_m;
    j["num_aps"] = c.num_aps;
    j["antennas_per_ap"] = c.antennas_per_ap;
    j["n_tx"] = c.n_tx;
    j["n_rx"] = c.n_rx;
    j["num_ues"] = c.num_ues;
    j["ul_fraction"] = c.ul_fraction;
    j["coherence_len"] = c.coherence_len;
    j["pilot_snr_db"] = c.pilot_snr_db;
    if (!c.pilot_snr_per_ue_db.empty())
        j["pilot_snr_per_ue_db"] = c.pilot_snr_per_ue_db;
    j["noise_power_dbm"] = c.noise_power_dbm;
    j["bandwidth_hz"] = c.bandwidth_hz;
    j["shadow_sigma_db"] = c.shadow_sigma_db;
    j["shadow_all_slopes"] = c.shadow_all_slopes;
    j["pathloss_threeslope"] = {{"l_db", c.pathloss_threeslope.l_db},
                                {"d0_m", c.pathloss_threeslope.d0_m},
                                {"d1_m", c.pathloss_threeslope.d1_m}};
    j["simple_pl"] = {{"d0_m", c.simple_pl.d0_m},
                      {"exponent", c.simple_pl.exponent}};
    j["gamma_min_db"] = c.gamma_min_db;
    j["r_o_scale"] = c.r_o_scale;
    j["inai_rel_noise_db"] = c.inai_rel_noise_db;
    j["irai_rel_noise_db"] = c.irai_rel_noise_db;
    j["inai_distance_scaled"] = c.inai_distance_scaled;
    j["ul_power_max"] = c.ul_power_max;
    j["dl_power_total"] = c.dl_power_total;
    j["delta_u"] = c.delta_u;
    j["delta_d"] = c.delta_d;
    j["delta_admm"] = c.delta_admm;
    j["admm_penalty"] = c.admm_penalty;
    j["fp_max_iter"] = c.fp_max_iter;
    j["admm_max_iter"] = c.admm_max_iter;
    j["outer_max_iter"] = c.outer_max_iter;
    j["mc_trials"] = c.mc_trials;
    j["seed"] = c.seed;
    return j;
}

// Applies `j` on top of defaults (or on top of `base` when given). Unknown
// keys are collected into `errors` so config typos surface instead of being
// silently ignored.
inline SystemConfig config_from_json(const nlohmann::json &j,
                                     std::vector<std::string> *errors = nullptr,
                                     const SystemConfig &base = SystemConfig{}) {
    SystemConfig c = base;
    auto bad = [&](const std::string &msg) {
        if (errors) errors->push_back(msg);
    };
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string &key = it.key();
        const nlohmann::json &v = it.value();
        try {
            if (key == "area_side_m") c.area_side_m = v.get<double>();
            else if (key == "num_aps") c.num_aps = v.get<int>();
            else if (key == "antennas_per_ap") c.antennas_per_ap = v.get<int>();
            else if (key == "n_tx") c.n_tx = v.get<int>();
            else if (key == "n_rx") c.n_rx = v.get<int>();
            else if (key == "num_ues") c.num_ues = v.get<int>();
            else if (key == "ul_fraction") c.ul_fraction = v.get<double>();
            else if (key == "coherence_len") c.coherence_len = v.get<int>();
            else if (key == "pilot_snr_db") c.pilot_snr_db = v.get<double>();
            else if (key == "pilot_snr_per_ue_db")
                c.pilot_snr_per_ue_db = v.get<std::vector<double>>();
            else if (key == "noise_power_dbm") c.noise_power_dbm = v.get<double>();
            else if (key == "bandwidth_hz") c.bandwidth_hz = v.get<double>();
            else if (key == "shadow_sigma_db") c.shadow_sigma_db = v.get<double>();
            else if (key == "shadow_all_slopes") c.shadow_all_slopes = v.get<bool>();
            else if (key == "pathloss_threeslope") {
                if (v.contains("l_db")) c.pathloss_threeslope.l_db = v["l_db"].get<double>();
                if (v.contains("d0_m")) c.pathloss_threeslope.d0_m = v["d0_m"].get<double>();
                if (v.contains("d1_m")) c.pathloss_threeslope.d1_m = v["d1_m"].get<double>();
            } else if (key == "simple_pl") {
                if (v.contains("d0_m")) c.simple_pl.d0_m = v["d0_m"].get<double>();
                if (v.contains("exponent")) c.simple_pl.exponent = v["exponent"].get<double>();
            }
            else if (key == "gamma_min_db") c.gamma_min_db = v.get<double>();
            else if (key == "r_o_scale") c.r_o_scale = v.get<double>();
            else if (key == "inai_rel_noise_db") c.inai_rel_noise_db = v.get<double>();
            else if (key == "irai_rel_noise_db") c.irai_rel_noise_db = v.get<double>();
            else if (key == "inai_distance_scaled") c.inai_distance_scaled = v.get<bool>();
            else if (key == "ul_power_max") c.ul_power_max = v.get<double>();
            else if (key == "dl_power_total") c.dl_power_total = v.get<double>();
            else if (key == "delta_u") c.delta_u = v.get<double>();
            else if (key == "delta_d") c.delta_d = v.get<double>();
            else if (key == "delta_admm") c.delta_admm = v.get<double>();
            else if (key == "admm_penalty") c.admm_penalty = v.get<double>();
            else if (key == "fp_max_iter") c.fp_max_iter = v.get<int>();
            else if (key == "admm_max_iter") c.admm_max_iter = v.get<int>();
            else if (key == "outer_max_iter") c.outer_max_iter = v.get<int>();
            else if (key == "mc_trials") c.mc_trials = v.get<int>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else bad("unknown config key: " + key);
        } catch (const nlohmann::json::exception &e) {
            bad("config key '" + key + "': " + e.what());
        }
    }
    return c;
}

// Structural checks that do not depend on derived quantities. The pilot-length
// condition (array size > tau_p) can only be checked after allocation and is
// enforced where spectral efficiencies are evaluated.
inline std::vector<std::string> validate_config(const SystemConfig &c) {
    std::vector<std::string> errs;
    auto check = [&](bool ok, const std::string &msg) {
        if (!ok) errs.push_back(msg);
    };
    check(c.area_side_m > 0, "area_side_m must be > 0");
    check(c.num_aps >= 1, "num_aps must be >= 1");
    check(c.antennas_per_ap >= 1, "antennas_per_ap must be >= 1");
    check(c.n_tx >= 1, "n_tx must be >= 1");
    check(c.n_rx >= 1, "n_rx must be >= 1");
    check(c.num_ues >= 1, "num_ues must be >= 1");
    check(c.ul_fraction >= 0.0 && c.ul_fraction <= 1.0,
          "ul_fraction must lie in [0, 1]");
    check(c.coherence_len >= 2,
          "coherence_len must be >= 2 (pilot phase plus at least one data symbol)");
    check(c.bandwidth_hz > 0, "bandwidth_hz must be > 0");
    check(c.shadow_sigma_db >= 0, "shadow_sigma_db must be >= 0");
    check(c.pathloss_threeslope.d0_m > 0 &&
              c.pathloss_threeslope.d1_m >= c.pathloss_threeslope.d0_m,
          "three-slope breakpoints need 0 < d0_m <= d1_m");
    check(c.simple_pl.d0_m > 0, "simple_pl.d0_m must be > 0");
    check(c.simple_pl.exponent > 0, "simple_pl.exponent must be > 0");
    check(c.r_o_scale > 0, "r_o_scale must be > 0");
    check(c.ul_power_max >= 0, "ul_power_max must be >= 0");
    check(c.dl_power_total >= 0, "dl_power_total must be >= 0");
    check(c.delta_u > 0 && c.delta_d > 0 && c.delta_admm > 0,
          "convergence tolerances must be > 0");
    check(c.admm_penalty > 0, "admm_penalty must be > 0");
    check(c.fp_max_iter >= 1 && c.admm_max_iter >= 1 && c.outer_max_iter >= 1,
          "iteration caps must be >= 1");
    check(c.mc_trials >= 1, "mc_trials must be >= 1");
    if (!c.pilot_snr_per_ue_db.empty())
        check(static_cast<int>(c.pilot_snr_per_ue_db.size()) == c.num_ues,
              "pilot_snr_per_ue_db must have num_ues entries");
    return errs;
}

inline void require_valid(const SystemConfig &c) {
    auto errs = validate_config(c);
    if (errs.empty()) return;
    std::ostringstream os;
    os << "invalid config:";
    for (const auto &e : errs) os << "\n  - " << e;
    throw std::invalid_argument(os.str());
}

inline SystemConfig load_config(const std::string &path,
                                std::vector<std::string> *errors = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    return config_from_json(j, errors);
}

} // namespace cfduplex
