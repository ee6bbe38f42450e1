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
//
// Batch experiment runner.
//
//   mimo_lab --config configs/fig1_mse_sd.json --out results/
//   mimo_lab --experiment duality_check --seed 7 --trials 100 --snr-db 10
//
// Exit codes: 0 success, 1 numeric failure, 2 usage or configuration error.

#include "mimo_lab/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace
{
    constexpr int exit_numeric = 1;
    constexpr int exit_usage = 2;
}

int main(int argc, char **argv)
{
    CLI::App app{"mimo_lab: pilot reuse experiments for correlated massive MIMO"};
    app.set_help_flag("-h,--help", "Print this help message and exit");

    std::string config_path;
    std::string experiment;
    std::uint64_t seed = 0;
    int trials = 0;
    std::string out;
    std::vector<double> snr_db;
    int tau = 0;
    std::vector<int> block_lengths;
    int antennas = 0;
    int users = 0;
    double as_deg = 0.0;

    app.add_option("--config", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
    auto *experiment_opt = app.add_option("--experiment", experiment, "Experiment name");
    auto *seed_opt = app.add_option("--seed", seed, "Master seed");
    auto *trials_opt = app.add_option("--trials", trials, "Monte Carlo blocks per point");
    auto *out_opt = app.add_option("--out", out, "Output directory");
    auto *snr_opt = app.add_option("--snr-db", snr_db, "SNR grid in dB");
    auto *tau_opt = app.add_option("--tau", tau, "Pilot length");
    auto *t_opt = app.add_option("--T", block_lengths, "Coherence block length grid");
    auto *m_opt = app.add_option("--M", antennas, "BS antennas");
    auto *k_opt = app.add_option("--K", users, "Users");
    auto *as_opt = app.add_option("--as-deg", as_deg, "Angular spread in degrees");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return exit_usage;
    }

    mimo_lab::ExperimentConfig config;
    try
    {
        if (!config_path.empty())
            config = mimo_lab::load_config(config_path);
        else if (experiment_opt->count() == 0)
            throw mimo_lab::ConfigError("either --config or --experiment is required");

        if (experiment_opt->count())
            config.experiment = mimo_lab::parse_experiment(experiment);
        if (seed_opt->count())
            config.seed = seed;
        if (trials_opt->count())
            config.trials = trials;
        if (out_opt->count())
            config.output = out;
        if (snr_opt->count())
            config.link.snr_db = snr_db;
        if (tau_opt->count())
            config.link.tau = tau;
        if (t_opt->count())
            config.link.block_lengths = block_lengths;
        if (m_opt->count())
            config.scenario.antennas = antennas;
        if (k_opt->count())
            config.scenario.users = users;
        if (as_opt->count())
            config.scenario.as_deg = as_deg;
        mimo_lab::validate(config);
    }
    catch (const mimo_lab::ConfigError &e)
    {
        std::cerr << "mimo_lab: configuration error: " << e.what() << '\n';
        return exit_usage;
    }

    try
    {
        const auto files = mimo_lab::run(config);
        std::cout << files.csv.string() << '\n' << files.json.string() << '\n';
    }
    catch (const mimo_lab::ConfigError &e)
    {
        std::cerr << "mimo_lab: configuration error: " << e.what() << '\n';
        return exit_usage;
    }
    catch (const std::exception &e)
    {
        std::cerr << "mimo_lab: run failed: " << e.what() << '\n';
        return exit_numeric;
    }
    return EXIT_SUCCESS;
}
