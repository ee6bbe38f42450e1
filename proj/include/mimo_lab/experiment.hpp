// SPDX-License-Identifier: Apache-2.0
//
// mimo_lab: pilot reuse simulation library for correlated massive MIMO
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "channel_model.hpp"
#include "scheduler.hpp"
#include "simulation.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mimo_lab
{
    enum class ExperimentKind
    {
        mse_sd_vs_snr,
        mse_ce_vs_tau,
        mse_sd_lb_vs_tau,
        net_se_vs_T,
        net_se_vs_snr,
        duality_check,
        sgps_vs_es,
        convergence_sweep,
    };

    inline constexpr std::array<std::pair<ExperimentKind, const char *>, 8> experiment_names{{
        {ExperimentKind::mse_sd_vs_snr, "mse_sd_vs_snr"},
        {ExperimentKind::mse_ce_vs_tau, "mse_ce_vs_tau"},
        {ExperimentKind::mse_sd_lb_vs_tau, "mse_sd_lb_vs_tau"},
        {ExperimentKind::net_se_vs_T, "net_se_vs_T"},
        {ExperimentKind::net_se_vs_snr, "net_se_vs_snr"},
        {ExperimentKind::duality_check, "duality_check"},
        {ExperimentKind::sgps_vs_es, "sgps_vs_es"},
        {ExperimentKind::convergence_sweep, "convergence_sweep"},
    }};

    inline std::string to_string(ExperimentKind kind)
    {
        for (const auto &[k, name] : experiment_names)
            if (k == kind)
                return name;
        return "unknown";
    }

    inline ExperimentKind parse_experiment(const std::string &name)
    {
        for (const auto &[k, n] : experiment_names)
            if (name == n)
                return k;
        throw ConfigError("unknown experiment '" + name + "'");
    }

    struct ScenarioSpec
    {
        int antennas = 128;
        int users = 10;
        double as_deg = 10.0;
        std::string aoa_mode = "uniform_sector"; // or "explicit"
        std::vector<double> aoa_rad;             // explicit mode only
        std::vector<double> beta;                // empty: all ones
        int quadrature_points = 0;               // 0: default rule
        std::vector<int> antenna_grid{32, 128, 512};
    };

    struct LinkSpec
    {
        std::vector<double> snr_db{10.0};
        int tau = 5;
        std::vector<int> tau_grid; // empty: 1..K
        std::vector<int> block_lengths{20};
        std::vector<std::string> directions{"ul", "dl"};
    };

    struct PatternSpec
    {
        std::string name;
        std::vector<int> labels; // 1-based pilot labels
    };

    struct ExperimentConfig
    {
        ExperimentKind experiment = ExperimentKind::mse_sd_vs_snr;
        std::optional<std::uint64_t> seed;
        int trials = 500;
        int drops = 1;
        bool exhaustive = false;
        double es_cap = 1e6;
        std::string output = "out";
        ScenarioSpec scenario;
        LinkSpec link;
        std::vector<PatternSpec> patterns;
        std::vector<std::array<int, 2>> entries{{1, 1}, {1, 2}, {2, 3}};
    };

    // ---------------------------------------------------------------------------
    // JSON
    // ---------------------------------------------------------------------------

    namespace detail
    {
        using nlohmann::json;

        template <typename T>
        void read_field(const json &j, const char *key, T &out)
        {
            if (!j.contains(key))
                return;
            try
            {
                out = j.at(key).get<T>();
            }
            catch (const json::exception &e)
            {
                throw ConfigError(std::string("config key '") + key + "': " + e.what());
            }
        }

        inline void reject_unknown(const json &j, std::initializer_list<const char *> known, const std::string &where)
        {
            if (!j.is_object())
                throw ConfigError(where + " must be an object");
            for (const auto &item : j.items())
            {
                bool ok = false;
                for (const char *k : known)
                    ok = ok || item.key() == k;
                if (!ok)
                    throw ConfigError("unknown key '" + item.key() + "' in " + where);
            }
        }
    }

    inline ExperimentConfig config_from_json(const nlohmann::json &j)
    {
        using detail::read_field;
        ExperimentConfig c;
        detail::reject_unknown(j,
                               {"experiment", "seed", "trials", "drops", "exhaustive", "es_cap", "output", "scenario",
                                "link", "patterns", "entries"},
                               "config");
        if (j.contains("experiment"))
        {
            std::string name;
            read_field(j, "experiment", name);
            c.experiment = parse_experiment(name);
        }
        if (j.contains("seed"))
        {
            std::uint64_t s = 0;
            read_field(j, "seed", s);
            c.seed = s;
        }
        read_field(j, "trials", c.trials);
        read_field(j, "drops", c.drops);
        read_field(j, "exhaustive", c.exhaustive);
        read_field(j, "es_cap", c.es_cap);
        read_field(j, "output", c.output);
        if (j.contains("scenario"))
        {
            const auto &s = j.at("scenario");
            detail::reject_unknown(s,
                                   {"M", "K", "as_deg", "aoa_mode", "aoa_rad", "beta", "quadrature_points",
                                    "M_grid"},
                                   "scenario");
            read_field(s, "M", c.scenario.antennas);
            read_field(s, "K", c.scenario.users);
            read_field(s, "as_deg", c.scenario.as_deg);
            read_field(s, "aoa_mode", c.scenario.aoa_mode);
            read_field(s, "aoa_rad", c.scenario.aoa_rad);
            read_field(s, "beta", c.scenario.beta);
            read_field(s, "quadrature_points", c.scenario.quadrature_points);
            read_field(s, "M_grid", c.scenario.antenna_grid);
        }
        if (j.contains("link"))
        {
            const auto &l = j.at("link");
            detail::reject_unknown(l, {"snr_db", "tau", "tau_grid", "T", "directions"}, "link");
            read_field(l, "snr_db", c.link.snr_db);
            read_field(l, "tau", c.link.tau);
            read_field(l, "tau_grid", c.link.tau_grid);
            read_field(l, "T", c.link.block_lengths);
            read_field(l, "directions", c.link.directions);
        }
        if (j.contains("patterns"))
        {
            const auto &ps = j.at("patterns");
            if (!ps.is_array())
                throw ConfigError("patterns must be an array");
            for (const auto &p : ps)
            {
                detail::reject_unknown(p, {"name", "labels"}, "pattern");
                PatternSpec spec;
                read_field(p, "name", spec.name);
                read_field(p, "labels", spec.labels);
                c.patterns.push_back(std::move(spec));
            }
        }
        read_field(j, "entries", c.entries);
        return c;
    }

    inline nlohmann::json config_to_json(const ExperimentConfig &c)
    {
        nlohmann::json j;
        j["experiment"] = to_string(c.experiment);
        if (c.seed)
            j["seed"] = *c.seed;
        j["trials"] = c.trials;
        j["drops"] = c.drops;
        j["exhaustive"] = c.exhaustive;
        j["es_cap"] = c.es_cap;
        j["output"] = c.output;
        j["scenario"] = {{"M", c.scenario.antennas},
                         {"K", c.scenario.users},
                         {"as_deg", c.scenario.as_deg},
                         {"aoa_mode", c.scenario.aoa_mode},
                         {"aoa_rad", c.scenario.aoa_rad},
                         {"beta", c.scenario.beta},
                         {"quadrature_points", c.scenario.quadrature_points},
                         {"M_grid", c.scenario.antenna_grid}};
        j["link"] = {{"snr_db", c.link.snr_db},
                     {"tau", c.link.tau},
                     {"tau_grid", c.link.tau_grid},
                     {"T", c.link.block_lengths},
                     {"directions", c.link.directions}};
        j["patterns"] = nlohmann::json::array();
        for (const auto &p : c.patterns)
            j["patterns"].push_back({{"name", p.name}, {"labels", p.labels}});
        j["entries"] = c.entries;
        return j;
    }

    inline ExperimentConfig load_config(const std::filesystem::path &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open config file " + path.string());
        try
        {
            return config_from_json(nlohmann::json::parse(in));
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw ConfigError("config " + path.string() + ": " + e.what());
        }
    }

    // ---------------------------------------------------------------------------
    // Validation
    // ---------------------------------------------------------------------------

    inline std::vector<int> resolved_tau_grid(const ExperimentConfig &c)
    {
        if (!c.link.tau_grid.empty())
            return c.link.tau_grid;
        std::vector<int> grid;
        for (int t = 1; t <= c.scenario.users; ++t)
            grid.push_back(t);
        return grid;
    }

    inline void validate(const ExperimentConfig &c)
    {
        const auto &s = c.scenario;
        const auto &l = c.link;
        if (!c.seed)
            throw ConfigError("a seed is required");
        if (s.antennas < 1 || s.users < 1)
            throw ConfigError("M and K must be positive");
        if (!(s.as_deg > 0.0) || !std::isfinite(s.as_deg))
            throw ConfigError("as_deg must be positive");
        if (s.aoa_mode == "explicit")
        {
            if (static_cast<int>(s.aoa_rad.size()) != s.users)
                throw ConfigError("explicit AoA list has " + std::to_string(s.aoa_rad.size()) + " entries, K is " +
                                  std::to_string(s.users));
            for (double a : s.aoa_rad)
                if (!(std::abs(a) <= pi / 2))
                    throw ConfigError("explicit AoAs must lie in [-pi/2, pi/2]");
        }
        else if (s.aoa_mode != "uniform_sector")
            throw ConfigError("aoa_mode must be 'explicit' or 'uniform_sector'");
        if (!s.beta.empty())
        {
            if (static_cast<int>(s.beta.size()) != s.users)
                throw ConfigError("beta list length differs from K");
            for (double b : s.beta)
                if (!(b > 0.0) || !std::isfinite(b))
                    throw ConfigError("beta entries must be positive");
        }
        if (s.quadrature_points != 0 && s.quadrature_points < 64)
            throw ConfigError("quadrature_points must be 0 or at least 64");
        if (s.antenna_grid.empty())
            throw ConfigError("M_grid must be nonempty");
        for (int m : s.antenna_grid)
            if (m < 4)
                throw ConfigError("M_grid entries must be at least 4");

        if (l.snr_db.empty())
            throw ConfigError("snr_db grid must be nonempty");
        for (double v : l.snr_db)
            if (!std::isfinite(v))
                throw ConfigError("snr_db entries must be finite");
        if (l.tau < 1)
            throw ConfigError("tau must be positive");
        if (l.block_lengths.empty())
            throw ConfigError("T grid must be nonempty");
        for (int t : l.block_lengths)
        {
            if (t < 1)
                throw ConfigError("T entries must be positive");
            if (l.tau > t)
                throw ConfigError("tau = " + std::to_string(l.tau) + " exceeds the coherence block length T = " +
                                  std::to_string(t));
        }
        for (int t : resolved_tau_grid(c))
            if (t < 1 || t > s.users)
                throw ConfigError("tau_grid entries must lie in 1..K");
        if (l.directions.empty())
            throw ConfigError("directions must be nonempty");
        for (const auto &d : l.directions)
            if (d != "ul" && d != "dl")
                throw ConfigError("directions entries must be 'ul' or 'dl'");

        if (c.trials < 1 || c.drops < 1)
            throw ConfigError("trials and drops must be positive");
        const bool uses_dl = c.experiment == ExperimentKind::net_se_vs_T || c.experiment == ExperimentKind::net_se_vs_snr;
        if (uses_dl && c.trials < 2)
            throw ConfigError("rate experiments need at least 2 trials");
        if (uses_dl && s.users < 2)
            throw ConfigError("rate experiments need K >= 2");
        if (c.experiment == ExperimentKind::sgps_vs_es)
            for (int t : resolved_tau_grid(c))
                if (t <= 1 || t >= s.users)
                    throw ConfigError("sgps_vs_es needs 1 < tau < K");
        if (!(c.es_cap >= 1.0))
            throw ConfigError("es_cap must be at least 1");

        for (const auto &p : c.patterns)
        {
            if (p.name.empty())
                throw ConfigError("patterns need a name");
            if (static_cast<int>(p.labels.size()) != s.users)
                throw ConfigError("pattern '" + p.name + "' does not have K labels");
            for (int v : p.labels)
                if (v < 1)
                    throw ConfigError("pattern labels are 1-based");
        }
        for (const auto &e : c.entries)
            if (e[0] < 1 || e[1] < 1)
                throw ConfigError("entries are 1-based (row, column) pairs");
    }

    // ---------------------------------------------------------------------------
    // Scenario generation
    // ---------------------------------------------------------------------------

    inline constexpr double deg_to_rad(double deg) { return deg * pi / 180.0; }

    // Mean AoAs: the explicit list, or i.i.d. uniform on [-pi/3, pi/3].
    inline std::vector<double> scenario_aoas(const ScenarioSpec &spec, std::uint64_t seed)
    {
        if (spec.aoa_mode == "explicit")
        {
            if (static_cast<int>(spec.aoa_rad.size()) != spec.users)
                throw ConfigError("explicit AoA list length differs from K");
            return spec.aoa_rad;
        }
        BlockRng rng(seed, Stream::scenario, 0);
        std::vector<double> aoas(spec.users);
        for (auto &a : aoas)
            a = rng.uniform(-pi / 3, pi / 3);
        return aoas;
    }

    inline Scenario generate_scenario(const ScenarioSpec &spec, std::uint64_t seed)
    {
        const auto aoas = scenario_aoas(spec, seed);
        if (!spec.beta.empty() && static_cast<int>(spec.beta.size()) != spec.users)
            throw ConfigError("beta list length differs from K");
        std::vector<PowerAngleSpectrum> users;
        for (int k = 0; k < spec.users; ++k)
            users.push_back(PowerAngleSpectrum::laplacian(aoas[k], deg_to_rad(spec.as_deg),
                                                          spec.beta.empty() ? 1.0 : spec.beta[k]));
        return make_scenario(ArrayGeometry::ula(spec.antennas), std::move(users), spec.quadrature_points);
    }

    inline Scenario generate_scenario(const ExperimentConfig &config, std::uint64_t seed)
    {
        return generate_scenario(config.scenario, seed);
    }

    // SGPS for 1 < tau < K, all users on one pilot for tau = 1, orthogonal for tau >= K.
    inline PilotPattern pattern_for_tau(std::span<const CMatrix> covariances, int tau)
    {
        const int k_users = static_cast<int>(covariances.size());
        if (tau <= 1)
            return PilotPattern(std::vector<int>(k_users, 0), 1);
        if (tau >= k_users)
            return PilotPattern::orthogonal(k_users);
        return sgps(covariances, tau);
    }

    // ---------------------------------------------------------------------------
    // Results and CSV
    // ---------------------------------------------------------------------------

    struct ResultRow
    {
        std::string sweep_name;
        double sweep_value = 0.0;
        std::string metric;
        double mean = 0.0;
        double stderr = 0.0;
        int trials = 1;
        std::uint64_t seed = 0;
    };

    struct ExperimentResult
    {
        std::string experiment;
        std::uint64_t seed = 0;
        std::vector<ResultRow> rows;

        void add(const std::string &sweep, double value, const std::string &metric, const Estimate &e)
        {
            rows.push_back({sweep, value, metric, e.mean, e.stderr, std::max(1, e.trials), seed});
        }

        void add_exact(const std::string &sweep, double value, const std::string &metric, double v, int trials = 1)
        {
            rows.push_back({sweep, value, metric, v, 0.0, std::max(1, trials), seed});
        }
    };

    inline constexpr const char *csv_header = "sweep_name,sweep_value,metric,mean,stderr,trials,seed";

    // Shortest decimal text that parses back to the same double.
    inline std::string format_double(double v)
    {
        if (std::isnan(v))
            return "nan";
        if (std::isinf(v))
            return v > 0 ? "inf" : "-inf";
        std::array<char, 64> buf{};
        const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
        return std::string(buf.data(), res.ptr);
    }

    inline std::string to_csv(const ExperimentResult &result)
    {
        std::ostringstream out;
        out << csv_header << '\n';
        for (const auto &r : result.rows)
            out << r.sweep_name << ',' << format_double(r.sweep_value) << ',' << r.metric << ','
                << format_double(r.mean) << ',' << format_double(r.stderr) << ',' << r.trials << ',' << r.seed
                << '\n';
        return out.str();
    }

    namespace detail
    {
        inline std::string at(const std::string &name, double v) { return "@" + name + "=" + format_double(v); }

        // Mean and stderr across drops of per-drop values; a single drop keeps its own estimate.
        inline Estimate across_drops(const std::vector<Estimate> &per_drop)
        {
            if (per_drop.size() == 1)
                return per_drop.front();
            std::vector<double> means;
            for (const auto &e : per_drop)
                means.push_back(e.mean);
            return summarize(means);
        }

        inline Estimate exact(double v) { return {v, 0.0, 1}; }

        inline std::uint64_t drop_seed(const ExperimentConfig &c, int drop) { return derive_seed(*c.seed, {1, static_cast<std::uint64_t>(drop)}); }
        inline std::uint64_t block_seed(const ExperimentConfig &c, int drop) { return derive_seed(*c.seed, {2, static_cast<std::uint64_t>(drop)}); }

        inline std::vector<std::pair<std::string, PilotPattern>> resolved_patterns(const ExperimentConfig &c,
                                                                                   const Scenario &scenario)
        {
            std::vector<std::pair<std::string, PilotPattern>> out;
            for (const auto &p : c.patterns)
            {
                const int tau = *std::max_element(p.labels.begin(), p.labels.end());
                out.emplace_back(p.name, PilotPattern::from_labels(p.labels, tau));
            }
            if (out.empty())
                out.emplace_back("sgps", pattern_for_tau(scenario.covariances, c.link.tau));
            return out;
        }

        inline LinkConfig link_at(double snr_db, int tau, int block_length)
        {
            return LinkConfig::common_snr_db(snr_db, tau, block_length);
        }

        inline std::vector<Direction> directions(const ExperimentConfig &c)
        {
            std::vector<Direction> out;
            for (const auto &d : c.link.directions)
                out.push_back(d == "ul" ? Direction::ul : Direction::dl);
            return out;
        }

        inline ExperimentResult run_mse_sd_vs_snr(const ExperimentConfig &c)
        {
            ExperimentResult r{to_string(c.experiment), *c.seed, {}};
            const Scenario scenario = generate_scenario(c, drop_seed(c, 0));
            const auto blocks_seed = block_seed(c, 0);
            for (const auto &[name, pattern] : resolved_patterns(c, scenario))
            {
                for (double snr : c.link.snr_db)
                {
                    const LinkConfig link = link_at(snr, pattern.pilot_count(), pattern.pilot_count());
                    r.add("snr_db", snr, "mse_sd_robust@pattern=" + name,
                          avg_mse_sd(scenario, pattern, link, ReceiverKind::robust, c.trials, blocks_seed));
                    r.add("snr_db", snr, "mse_sd_conventional@pattern=" + name,
                          avg_mse_sd(scenario, pattern, link, ReceiverKind::conventional, c.trials, blocks_seed));
                    r.add_exact("snr_db", snr, "mse_sd_lb@pattern=" + name,
                                mse_sd_lower_bound(pattern, scenario.covariances, link.pilot_config(), link.ul_snr));
                }
            }
            return r;
        }

        // Shared driver for the two pilot-length sweeps of scheduling objectives.
        inline ExperimentResult run_objective_vs_tau(const ExperimentConfig &c, SchedulingCriterion criterion)
        {
            ExperimentResult r{to_string(c.experiment), *c.seed, {}};
            const std::string base = criterion == SchedulingCriterion::mmse_ce ? "mse_ce" : "mse_sd_lb";
            const auto taus = resolved_tau_grid(c);
            std::vector<Scenario> drops;
            for (int d = 0; d < c.drops; ++d)
                drops.push_back(generate_scenario(c, drop_seed(c, d)));

            for (double snr : c.link.snr_db)
            {
                const double rho = db_to_linear(snr);
                for (int tau : taus)
                {
                    const PilotConfig train{rho, tau};
                    std::vector<Estimate> sgps_v, es_v, min_v;
                    for (const auto &s : drops)
                    {
                        const auto pattern = pattern_for_tau(s.covariances, tau);
                        const PilotConfig used{rho, pattern.pilot_count()};
                        sgps_v.push_back(exact(scheduling_objective(criterion, pattern, s.covariances, used, rho)));
                        min_v.push_back(exact(criterion == SchedulingCriterion::mmse_ce
                                                  ? mse_ce_minimum(s.covariances, train)
                                                  : mse_sd_lb_minimum(s.covariances, train, rho)));
                        if (c.exhaustive)
                            es_v.push_back(
                                exact(exhaustive_search(criterion, s.covariances, train, rho, {c.es_cap}).objective));
                    }
                    const std::string suffix = at("snr_db", snr);
                    r.add("tau", tau, base + "_sgps" + suffix, across_drops(sgps_v));
                    if (c.exhaustive)
                        r.add("tau", tau, base + "_es" + suffix, across_drops(es_v));
                    r.add("tau", tau, base + "_min" + suffix, across_drops(min_v));
                }
            }
            return r;
        }

        inline void add_net_se_rows(ExperimentResult &r, const std::string &sweep, double sweep_value,
                                    const std::string &suffix, const std::string &dir,
                                    const std::vector<PilotLengthChoice> &pr, const std::vector<BaselineResult> &ot)
        {
            std::vector<Estimate> pr_v, ot_v, gain_v, tau_v;
            for (std::size_t d = 0; d < pr.size(); ++d)
            {
                pr_v.push_back(pr[d].net_rate);
                ot_v.push_back(ot[d].net_rate);
                const double se = std::hypot(pr[d].net_rate.stderr, ot[d].net_rate.stderr);
                gain_v.push_back({pr[d].net_rate.mean - ot[d].net_rate.mean, se, pr[d].net_rate.trials});
                tau_v.push_back({static_cast<double>(pr[d].tau), 0.0, 1});
            }
            r.add(sweep, sweep_value, "net_se_pr_" + dir + suffix, across_drops(pr_v));
            r.add(sweep, sweep_value, "net_se_ot_" + dir + suffix, across_drops(ot_v));
            r.add(sweep, sweep_value, "net_se_gain_" + dir + suffix, across_drops(gain_v));
            r.add(sweep, sweep_value, "tau_opt_" + dir + suffix, across_drops(tau_v));
        }

        inline ExperimentResult run_net_se(const ExperimentConfig &c, bool sweep_t)
        {
            ExperimentResult r{to_string(c.experiment), *c.seed, {}};
            std::vector<Scenario> drops;
            for (int d = 0; d < c.drops; ++d)
                drops.push_back(generate_scenario(c, drop_seed(c, d)));

            for (Direction dir : directions(c))
            {
                const std::string dname = to_string(dir);
                for (double snr : c.link.snr_db)
                {
                    // Achievable rates depend on tau but not on T.
                    std::vector<std::vector<PilotLengthPoint>> points;
                    for (int d = 0; d < c.drops; ++d)
                    {
                        const LinkConfig link = link_at(snr, 1, drops[d].user_count());
                        points.push_back(rates_by_pilot_length(drops[d], link, dir, c.trials, block_seed(c, d)));
                    }
                    for (int t : c.link.block_lengths)
                    {
                        std::vector<PilotLengthChoice> pr;
                        std::vector<BaselineResult> ot;
                        for (int d = 0; d < c.drops; ++d)
                        {
                            pr.push_back(select_pilot_length(points[d], t));
                            ot.push_back(ot_baseline(drops[d], link_at(snr, 1, t), dir, c.trials, block_seed(c, d)));
                        }
                        if (sweep_t)
                            add_net_se_rows(r, "T", t, at("snr_db", snr), dname, pr, ot);
                        else
                            add_net_se_rows(r, "snr_db", snr, at("T", t), dname, pr, ot);
                    }
                }
            }
            if (!sweep_t)
                std::stable_sort(r.rows.begin(), r.rows.end(),
                                 [](const ResultRow &a, const ResultRow &b) { return a.metric < b.metric; });
            return r;
        }

        inline ExperimentResult run_duality(const ExperimentConfig &c)
        {
            ExperimentResult r{to_string(c.experiment), *c.seed, {}};
            const Scenario scenario = generate_scenario(c, drop_seed(c, 0));
            const auto patterns = resolved_patterns(c, scenario);
            const PilotPattern &pattern = patterns.front().second;
            for (double snr : c.link.snr_db)
            {
                const LinkConfig link = link_at(snr, pattern.pilot_count(), pattern.pilot_count());
                const DualityGap gap = duality_check(scenario, pattern, link, c.trials, block_seed(c, 0));
                r.add_exact("snr_db", snr, "max_abs_mse_gap", gap.max_abs_mse_gap, c.trials);
                r.add_exact("snr_db", snr, "max_relative_filter_gap", gap.max_relative_filter_gap, c.trials);
            }
            return r;
        }

        inline ExperimentResult run_sgps_vs_es(const ExperimentConfig &c)
        {
            ExperimentResult r{to_string(c.experiment), *c.seed, {}};
            std::vector<Scenario> drops;
            for (int d = 0; d < c.drops; ++d)
                drops.push_back(generate_scenario(c, drop_seed(c, d)));
            for (auto criterion : {SchedulingCriterion::mmse_ce, SchedulingCriterion::mmse_sd_lb})
            {
                for (double snr : c.link.snr_db)
                {
                    const double rho = db_to_linear(snr);
                    for (int tau : resolved_tau_grid(c))
                    {
                        const PilotConfig train{rho, tau};
                        std::vector<double> ratios;
                        for (const auto &s : drops)
                        {
                            const auto es = exhaustive_search(criterion, s.covariances, train, rho, {c.es_cap});
                            const double g =
                                scheduling_objective(criterion, sgps(s.covariances, tau), s.covariances, train, rho);
                            ratios.push_back(g / es.objective);
                        }
                        const std::string suffix = "_" + to_string(criterion) + at("snr_db", snr);
                        r.add("tau", tau, "sgps_over_es" + suffix, summarize(ratios));
                        r.add_exact("tau", tau, "sgps_over_es_max" + suffix,
                                    *std::max_element(ratios.begin(), ratios.end()), c.drops);
                    }
                }
            }
            return r;
        }

        inline ExperimentResult run_convergence(const ExperimentConfig &c)
        {
            ExperimentResult r{to_string(c.experiment), *c.seed, {}};
            const auto aoas = scenario_aoas(c.scenario, drop_seed(c, 0));
            const auto pas = PowerAngleSpectrum::laplacian(aoas.front(), deg_to_rad(c.scenario.as_deg),
                                                           c.scenario.beta.empty() ? 1.0 : c.scenario.beta.front());
            for (int m : c.scenario.antenna_grid)
            {
                const auto geom = ArrayGeometry::ula(m);
                const CMatrix exact = covariance_exact(geom, pas, c.scenario.quadrature_points).matrix;
                const auto asym = covariance_asymptotic(geom, pas);
                const CMatrix eig_dev = asym.eigvec_matrix.adjoint() * asym.eigvec_matrix - identity(m);
                const CMatrix cov_dev = exact - asym.reconstruct();
                for (const auto &e : c.entries)
                {
                    const int i = e[0] - 1, j = e[1] - 1;
                    if (i >= m || j >= m)
                        throw ConfigError("entry index exceeds the array size");
                    const std::string tag = "@entry=" + std::to_string(e[0]) + "-" + std::to_string(e[1]);
                    r.add_exact("M", m, "eigvec_dev" + tag, std::abs(eig_dev(i, j)));
                    r.add_exact("M", m, "cov_dev" + tag, std::abs(cov_dev(i, j)));
                }
            }
            return r;
        }
    }

    /// Runs the configured experiment in memory. Throws ConfigError for invalid configs.
    inline ExperimentResult run_experiment(const ExperimentConfig &config)
    {
        validate(config);
        switch (config.experiment)
        {
        case ExperimentKind::mse_sd_vs_snr:
            return detail::run_mse_sd_vs_snr(config);
        case ExperimentKind::mse_ce_vs_tau:
            return detail::run_objective_vs_tau(config, SchedulingCriterion::mmse_ce);
        case ExperimentKind::mse_sd_lb_vs_tau:
            return detail::run_objective_vs_tau(config, SchedulingCriterion::mmse_sd_lb);
        case ExperimentKind::net_se_vs_T:
            return detail::run_net_se(config, true);
        case ExperimentKind::net_se_vs_snr:
            return detail::run_net_se(config, false);
        case ExperimentKind::duality_check:
            return detail::run_duality(config);
        case ExperimentKind::sgps_vs_es:
            return detail::run_sgps_vs_es(config);
        case ExperimentKind::convergence_sweep:
            return detail::run_convergence(config);
        }
        throw ConfigError("unknown experiment");
    }

    struct OutputFiles
    {
        std::filesystem::path csv;
        std::filesystem::path json;
    };

    /// Runs the experiment and writes <output>/<experiment>.csv plus a JSON sidecar.
    /// Nothing is written unless the run completes.
    inline OutputFiles run(const ExperimentConfig &config)
    {
        const ExperimentResult result = run_experiment(config);
        const std::filesystem::path dir(config.output);
        std::filesystem::create_directories(dir);
        OutputFiles files{dir / (result.experiment + ".csv"), dir / (result.experiment + ".json")};

        nlohmann::json sidecar;
        sidecar["config"] = config_to_json(config);
        sidecar["seed"] = result.seed;
        sidecar["csv"] = files.csv.filename().string();
        sidecar["columns"] = {"sweep_name", "sweep_value", "metric", "mean", "stderr", "trials", "seed"};
        sidecar["rows"] = result.rows.size();

        {
            std::ofstream out(files.csv, std::ios::binary);
            out << to_csv(result);
            if (!out)
                throw std::runtime_error("failed to write " + files.csv.string());
        }
        {
            std::ofstream out(files.json, std::ios::binary);
            out << sidecar.dump(2) << '\n';
            if (!out)
                throw std::runtime_error("failed to write " + files.json.string());
        }
        return files;
    }
}
