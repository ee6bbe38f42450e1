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
// Acceptance checks. Prints one PASS/FAIL line per criterion with the measured
// quantities, and exits nonzero when any criterion fails.
//
//   acceptance            run every criterion
//   acceptance 3 7        run only the listed criteria

#include "fixtures.hpp"
#include "mimo_lab/experiment.hpp"
#include "symbol_monte_carlo.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

using namespace mimo_lab;

namespace
{
    struct Outcome
    {
        bool pass = true;
        std::ostringstream detail;

        void require(bool ok, const std::string &what)
        {
            if (!ok)
            {
                pass = false;
                detail << " [violated: " << what << "]";
            }
        }
    };

    std::string fmt(double v, int precision = 4)
    {
        std::ostringstream s;
        s.precision(precision);
        s << v;
        return s.str();
    }

    std::map<std::string, ResultRow> index_rows(const ExperimentResult &r)
    {
        std::map<std::string, ResultRow> out;
        for (const auto &row : r.rows)
            out[row.metric + "#" + format_double(row.sweep_value)] = row;
        return out;
    }

    // 1. Per-block UL/DL duality.
    void duality(Outcome &o)
    {
        const auto gap = duality_check(fixtures::fig1_scenario(), fixtures::pattern_b(),
                                       LinkConfig::common_snr_db(10.0, 5, 20), 100, 1);
        o.detail << "max |mse_ul - mse_dl| = " << fmt(gap.max_abs_mse_gap)
                 << ", max |gamma B - W| / |W| = " << fmt(gap.max_relative_filter_gap) << " over 100 blocks";
        o.require(gap.max_abs_mse_gap <= 1e-9, "MSE gap <= 1e-9");
        o.require(gap.max_relative_filter_gap <= 1e-9, "filter gap <= 1e-9");
    }

    // 2. Channel-estimation floor.
    void estimation_floor(Outcome &o)
    {
        const auto covs = fixtures::disjoint_dft_covariances(128, 6, 1);
        const PilotConfig train{db_to_linear(10), 3};
        const double shared = mse_ce(PilotPattern::from_labels({1, 2, 3, 1, 2, 3}, 3), covs, train);
        const double floor = mse_ce_minimum(covs, train);
        const double rel = std::abs(shared - floor) / floor;
        o.require(rel <= 1e-8, "disjoint sharing equals the floor to 1e-8");

        int below = 0;
        double worst = std::numeric_limits<double>::infinity();
        for (std::uint64_t seed = 1; seed <= 100; ++seed)
        {
            const auto s = fixtures::random_sector_scenario(32, 6, 10.0, seed);
            BlockRng rng(seed, Stream::generic, 5);
            std::vector<int> a(6);
            for (auto &v : a)
                v = static_cast<int>(rng.uniform(0.0, 3.0));
            const PilotConfig cfg{db_to_linear(rng.uniform(-10.0, 30.0)), 3};
            const double ratio = mse_ce(PilotPattern(a, 3), s.covariances, cfg) / mse_ce_minimum(s.covariances, cfg);
            worst = std::min(worst, ratio);
            below += ratio < 1.0 - 1e-12;
        }
        o.require(below == 0, "random scenarios never go below the floor");
        o.detail << "disjoint relative gap " << fmt(rel) << "; 100 random scenarios: min mse_ce / floor = "
                 << fmt(worst, 8);
    }

    // 3. Estimator against conditioning and Monte Carlo moments.
    void estimator_oracle(Outcome &o)
    {
        double worst_exact = 0.0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed)
        {
            const auto covs = fixtures::random_psd_set(4, 2, seed, 2);
            const PilotPattern pattern({0, 0}, 1);
            const PilotConfig cfg{3.0, 1};
            BlockRng rng(seed, Stream::channel, 0);
            const CMatrix g = ChannelSampler(covs).draw(rng);
            const CMatrix y = observe_pilots(g, pattern, cfg, seed);
            const CMatrix est = MmseEstimator(pattern, covs, cfg).estimate(y);
            const auto cond = fixtures::condition(fixtures::pilot_joint_covariance(covs, cfg.noise_variance()), 8);
            const CVector stacked = cond.gain * y.col(0);
            worst_exact = std::max({worst_exact, (est.col(0) - stacked.head(4)).cwiseAbs().maxCoeff(),
                                    (est.col(1) - stacked.tail(4)).cwiseAbs().maxCoeff()});
        }
        o.require(worst_exact <= 1e-10, "estimates match conditioning to 1e-10");

        const auto covs = fixtures::random_psd_set(4, 2, 21, 4);
        const PilotPattern pattern({0, 0}, 1);
        const PilotConfig cfg{2.0, 1};
        const MmseEstimator est(pattern, covs, cfg);
        const ChannelSampler sampler(covs);
        const int n = 100000;
        CMatrix e00 = CMatrix::Zero(4, 4), e11 = CMatrix::Zero(4, 4), e01 = CMatrix::Zero(4, 4);
        for (int i = 0; i < n; ++i)
        {
            BlockRng cr(3, Stream::channel, static_cast<std::uint64_t>(i));
            BlockRng nr(3, Stream::pilot_noise, static_cast<std::uint64_t>(i));
            const CMatrix g = sampler.draw(cr);
            const CMatrix err = g - est.estimate(observe_pilots(g, pattern, cfg, nr));
            e00 += err.col(0) * err.col(0).adjoint();
            e11 += err.col(1) * err.col(1).adjoint();
            e01 += err.col(0) * err.col(1).adjoint();
        }
        const double d_own = std::max(fixtures::rel_diff(e00 / n, est.error_covs()[0]),
                                      fixtures::rel_diff(e11 / n, est.error_covs()[1]));
        const double d_cross = fixtures::rel_diff(e01 / n, cross_error_covariance(0, 1, pattern, covs, cfg));
        o.require(d_own <= 0.03, "error covariance within 3%");
        o.require(d_cross <= 0.03, "cross error covariance within 3%");
        o.detail << "max estimate deviation " << fmt(worst_exact) << "; Monte Carlo (1e5) relative deviation: error cov "
                 << fmt(d_own) << ", cross cov " << fmt(d_cross);
    }

    // 4. Receiver and precoder optimality.
    void transceiver_optimality(Outcome &o)
    {
        int ul_violations = 0, dl_violations = 0;
        double worst_closed = 0.0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed)
        {
            const auto b = fixtures::random_block(6, 4, 2, seed);
            const double snr = 10.0;
            const double optimum = mmse_sd_closed_form(b.estimates, b.error_sum, snr);
            const CMatrix w = robust_ul_receiver(b.estimates, b.error_sum, snr).w;
            const auto p = robust_dl_precoder(b.estimates, b.error_covs, snr);
            worst_closed = std::max({worst_closed,
                                     std::abs(analytic_mse_ul(w, b.estimates, b.error_sum, snr) - optimum),
                                     std::abs(analytic_mse_dl(p.b, p.alpha, b.estimates, b.error_sum, snr) - optimum)});
            BlockRng rng(seed, Stream::perturbation, 0);
            const double k = static_cast<double>(b.estimates.cols());
            for (double scale : {1e-3, 1e-2, 1e-1})
                for (int t = 0; t < 100; ++t)
                {
                    const CMatrix d = rng.complex_gaussian(6, 4);
                    ul_violations += analytic_mse_ul(w + scale * d * (w.norm() / d.norm()), b.estimates, b.error_sum,
                                                     snr) < optimum - 1e-12;
                    const CMatrix e = rng.complex_gaussian(6, 4);
                    CMatrix bm = p.b + scale * e * (p.b.norm() / e.norm());
                    bm *= std::sqrt(k) / bm.norm();
                    const double alpha = p.alpha * (1.0 + scale * rng.uniform(-1.0, 1.0));
                    dl_violations += analytic_mse_dl(bm, alpha, b.estimates, b.error_sum, snr) < optimum - 1e-12;
                }
        }
        o.require(ul_violations == 0 && dl_violations == 0, "no perturbation beats the closed-form optimum");
        o.require(worst_closed <= 1e-9, "filters attain the closed form");

        const auto b = fixtures::random_block(4, 3, 2, 11);
        const double snr = 3.0;
        const CMatrix w = robust_ul_receiver(b.estimates, b.error_sum, snr).w;
        const CMatrix conv = conventional_receiver(b.estimates, snr).w;
        const auto p = robust_dl_precoder(b.estimates, b.error_sum, snr);
        auto rel = [](double mc, double an) { return std::abs(mc - an) / an; };
        const double d_ul = rel(fixtures::monte_carlo_ul(w, b, snr, 100000, 1),
                                analytic_mse_ul(w, b.estimates, b.error_sum, snr));
        const double d_conv = rel(fixtures::monte_carlo_ul(conv, b, snr, 100000, 2),
                                  analytic_mse_ul(conv, b.estimates, b.error_sum, snr));
        const double d_dl = rel(fixtures::monte_carlo_dl(p.b, p.alpha, b, snr, 100000, 3),
                                analytic_mse_dl(p.b, p.alpha, b.estimates, b.error_sum, snr));
        o.require(std::max({d_ul, d_conv, d_dl}) <= 0.02, "analytic MSE within 2% of Monte Carlo");
        o.detail << "perturbations below optimum: UL " << ul_violations << "/6000, DL " << dl_violations
                 << "/6000; closed-form gap " << fmt(worst_closed) << "; Monte Carlo deviation UL " << fmt(d_ul)
                 << ", UL conventional " << fmt(d_conv) << ", DL " << fmt(d_dl);
    }

    // 5. Tightness of the detection-MSE lower bound.
    void lower_bound_tightness(Outcome &o)
    {
        const auto &s = fixtures::fig1_scenario();
        const auto pattern = fixtures::pattern_b();
        o.detail << "relative gap (mean - bound) / mean:";
        for (double db : {0.0, 5.0, 10.0, 15.0, 20.0})
        {
            const auto link = LinkConfig::common_snr_db(db, 5, 20);
            const auto mc = avg_mse_sd(s, pattern, link, ReceiverKind::robust, 2000, 17);
            const double lb = mse_sd_lower_bound(pattern, s.covariances, link.pilot_config(), link.ul_snr);
            const double gap = (mc.mean - lb) / mc.mean;
            o.detail << " " << db << " dB " << fmt(gap) << ";";
            o.require(mc.mean + 2 * mc.stderr >= lb, "bound below the mean at " + fmt(db) + " dB");
            o.require(gap <= 0.05, "gap <= 5% at " + fmt(db) + " dB");
        }
    }

    // 6. Robust vs conventional receiver and pattern ordering.
    void receiver_comparison(Outcome &o)
    {
        const auto &s = fixtures::fig1_scenario();
        const std::vector<double> grid{0, 5, 10, 15, 20, 25, 30};
        std::map<std::string, std::vector<Estimate>> curves;
        for (const auto &[name, pattern] : {std::pair{"A", fixtures::pattern_a()}, std::pair{"B", fixtures::pattern_b()}})
            for (double db : grid)
            {
                const auto link = LinkConfig::common_snr_db(db, 5, 20);
                curves[std::string("robust_") + name].push_back(
                    avg_mse_sd(s, pattern, link, ReceiverKind::robust, 2000, 23));
                curves[std::string("conv_") + name].push_back(
                    avg_mse_sd(s, pattern, link, ReceiverKind::conventional, 2000, 23));
            }
        for (const char *p : {"A", "B"})
            for (std::size_t i = 0; i < grid.size(); ++i)
            {
                const auto &r = curves[std::string("robust_") + p][i];
                const auto &c = curves[std::string("conv_") + p][i];
                o.require(r.mean <= c.mean, std::string("robust <= conventional, pattern ") + p + " at " + fmt(grid[i]));
                if (grid[i] >= 10)
                    o.require(c.mean - r.mean >= 2 * std::hypot(r.stderr, c.stderr),
                              std::string("2 stderr margin, pattern ") + p + " at " + fmt(grid[i]));
            }
        for (std::size_t i = 0; i < grid.size(); ++i)
            o.require(curves["robust_B"][i].mean <= curves["robust_A"][i].mean, "B <= A at " + fmt(grid[i]));
        const auto &c10 = curves["conv_A"][2];
        const auto &c25 = curves["conv_A"][5];
        o.require(c25.mean - c10.mean > 2 * std::hypot(c10.stderr, c25.stderr),
                  "conventional pattern A rises from 10 to 25 dB");
        o.detail << "pattern A robust/conventional at 10, 25 dB: " << fmt(curves["robust_A"][2].mean) << "/"
                 << fmt(c10.mean) << ", " << fmt(curves["robust_A"][5].mean) << "/" << fmt(c25.mean)
                 << "; pattern B robust at 10, 25 dB: " << fmt(curves["robust_B"][2].mean) << ", "
                 << fmt(curves["robust_B"][5].mean);
    }

    // 7. Greedy scheduling vs exhaustive search.
    void sgps_vs_es(Outcome &o)
    {
        ExperimentConfig c;
        c.experiment = ExperimentKind::sgps_vs_es;
        c.seed = 7;
        c.drops = 20;
        c.scenario.antennas = 64;
        c.scenario.users = 8;
        c.link.tau_grid = {2, 3, 4};
        c.link.snr_db = {0, 10, 20};
        double worst = 0.0;
        std::string where;
        o.detail << "max SGPS/ES ratio over 20 scenarios:";
        for (const auto &row : run_experiment(c).rows)
            if (row.metric.rfind("sgps_over_es_max", 0) == 0)
            {
                o.detail << " " << row.metric.substr(17) << ",tau=" << row.sweep_value << ": " << fmt(row.mean) << ";";
                if (row.mean > worst)
                {
                    worst = row.mean;
                    where = row.metric + " tau=" + fmt(row.sweep_value);
                }
            }
        o.require(worst <= 1.03, "ratio <= 1.03 (worst " + fmt(worst) + " at " + where + ")");
    }

    // 8. Net spectral efficiency gain and its trends.
    void net_se_gain(Outcome &o)
    {
        std::map<double, std::map<std::string, ResultRow>> by_spread;
        for (double spread : {2.0, 10.0})
        {
            ExperimentConfig c;
            c.experiment = ExperimentKind::net_se_vs_T;
            c.seed = 11;
            c.trials = 500;
            c.drops = 5;
            c.scenario.antennas = 128;
            c.scenario.users = 10;
            c.scenario.as_deg = spread;
            c.link.snr_db = {20};
            c.link.block_lengths = {15, 20, 40};
            by_spread[spread] = index_rows(run_experiment(c));
        }
        auto gain = [&](double spread, const std::string &dir, int t)
        { return by_spread[spread].at("net_se_gain_" + dir + "@snr_db=20#" + std::to_string(t)).mean; };
        for (const std::string dir : {"ul", "dl"})
        {
            const double g = gain(2.0, dir, 20);
            o.detail << dir << " gain at 2 deg, T=20: " << fmt(g) << " (T=15 " << fmt(gain(2.0, dir, 15)) << ", T=40 "
                     << fmt(gain(2.0, dir, 40)) << "; 10 deg: " << fmt(gain(10.0, dir, 15)) << ", "
                     << fmt(gain(10.0, dir, 20)) << ", " << fmt(gain(10.0, dir, 40)) << "); ";
            o.require(g >= 35 * 0.75 && g <= 35 * 1.25, dir + " gain within 35 +- 25%");
            for (int t : {15, 20, 40})
                o.require(gain(2.0, dir, t) > gain(10.0, dir, t), dir + " gain grows as the spread shrinks, T=" +
                                                                         std::to_string(t));
            for (double spread : {2.0, 10.0})
                o.require(gain(spread, dir, 15) > gain(spread, dir, 20) && gain(spread, dir, 20) > gain(spread, dir, 40),
                          dir + " gain grows as T shrinks, spread " + fmt(spread));
        }
    }

    // 9. Large-array convergence of the covariance eigenstructure.
    void convergence(Outcome &o)
    {
        ExperimentConfig c;
        c.experiment = ExperimentKind::convergence_sweep;
        c.seed = 1;
        c.scenario.users = 10;
        c.scenario.aoa_mode = "explicit";
        c.scenario.aoa_rad = fixtures::fig1_aoas;
        c.scenario.as_deg = 10;
        c.scenario.antenna_grid = {32, 128, 512};
        const auto rows = index_rows(run_experiment(c));
        // Deviations at roundoff level count as zero.
        const double floor = 1e-12;
        for (const char *metric : {"eigvec_dev", "cov_dev"})
            for (const char *entry : {"1-1", "1-2", "2-3"})
            {
                const std::string name = std::string(metric) + "@entry=" + entry;
                std::vector<double> v;
                for (int m : {32, 128, 512})
                    v.push_back(rows.at(name + "#" + std::to_string(m)).mean);
                o.detail << name << " " << fmt(v[0], 3) << " " << fmt(v[1], 3) << " " << fmt(v[2], 3) << "; ";
                for (std::size_t i = 1; i < v.size(); ++i)
                    o.require(std::max(v[i], floor) <= std::max(v[i - 1], floor), name + " nonincreasing");
            }
    }

    // 10. Byte-identical CSV across thread counts.
    void determinism(Outcome &o)
    {
        const auto root = std::filesystem::temp_directory_path() / "mimo_lab_acceptance_determinism";
        std::filesystem::remove_all(root);
        auto slurp = [](const std::filesystem::path &p)
        {
            std::ifstream in(p, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            return ss.str();
        };
        int compared = 0;
        for (const auto &[kind, name] : experiment_names)
        {
            ExperimentConfig c;
            c.experiment = kind;
            c.seed = 99;
            c.trials = 30;
            c.drops = 2;
            c.exhaustive = true;
            c.scenario.antennas = 32;
            c.scenario.users = 6;
            c.scenario.antenna_grid = {16, 32, 64};
            c.link.snr_db = {0, 20};
            c.link.tau = 3;
            c.link.tau_grid = {2, 3};
            c.link.block_lengths = {10, 20};
            std::string reference;
            for (const char *threads : {"1", "2", "4", "1"})
            {
                ::setenv("MIMO_LAB_THREADS", threads, 1);
                c.output = (root / (std::string(name) + "_" + threads + "_" + std::to_string(compared))).string();
                const std::string bytes = slurp(run(c).csv);
                if (reference.empty())
                    reference = bytes;
                o.require(bytes == reference, std::string(name) + " with MIMO_LAB_THREADS=" + threads);
                ++compared;
            }
        }
        ::unsetenv("MIMO_LAB_THREADS");
        std::filesystem::remove_all(root);
        o.detail << compared << " runs of " << experiment_names.size()
                 << " experiments at MIMO_LAB_THREADS in {1, 2, 4} compared byte by byte";
    }

    struct Criterion
    {
        int id;
        const char *name;
        std::function<void(Outcome &)> check;
    };
}

int main(int argc, char **argv)
{
    const std::vector<Criterion> criteria{
        {1, "UL/DL MSE duality", duality},
        {2, "channel-estimation floor", estimation_floor},
        {3, "MMSE estimator oracle", estimator_oracle},
        {4, "receiver and precoder optimality", transceiver_optimality},
        {5, "detection-MSE lower bound tightness", lower_bound_tightness},
        {6, "robust vs conventional receiver", receiver_comparison},
        {7, "SGPS vs exhaustive search", sgps_vs_es},
        {8, "net spectral efficiency gain", net_se_gain},
        {9, "large-array convergence", convergence},
        {10, "determinism across thread counts", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto &c : criteria)
    {
        if (!selected.empty() && !selected.count(c.id))
            continue;
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try
        {
            c.check(o);
        }
        catch (const std::exception &e)
        {
            o.pass = false;
            o.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.pass;
        std::printf("%s criterion %d (%s): %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
