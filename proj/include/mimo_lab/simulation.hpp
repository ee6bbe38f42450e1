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
#include "parallel.hpp"
#include "pilot_training.hpp"
#include "scheduler.hpp"
#include "transceiver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mimo_lab
{
    struct LinkConfig
    {
        double train_snr = 1.0; // rho^p
        double ul_snr = 1.0;    // rho^u
        double dl_snr = 1.0;    // rho^d
        int pilot_length = 1;   // tau
        int block_length = 1;   // T

        // Training and data SNRs equal, as in the reference experiments.
        static LinkConfig common_snr_db(double snr_db, int tau, int block_length)
        {
            const double rho = db_to_linear(snr_db);
            return {rho, rho, rho, tau, block_length};
        }

        PilotConfig pilot_config() const { return {train_snr, pilot_length}; }

        void validate() const
        {
            if (!(train_snr > 0.0) || !(ul_snr > 0.0) || !(dl_snr > 0.0))
                throw DomainError("LinkConfig: SNRs must be positive");
            if (pilot_length < 1 || block_length < 1)
                throw DomainError("LinkConfig: pilot and block lengths must be positive");
            if (pilot_length > block_length)
                throw DomainError("LinkConfig: pilot length exceeds the coherence block length");
        }
    };

    struct Estimate
    {
        double mean = 0.0;
        double stderr = 0.0;
        int trials = 0;
    };

    inline Estimate summarize(const std::vector<double> &samples)
    {
        Estimate e;
        e.trials = static_cast<int>(samples.size());
        if (samples.empty())
            return e;
        double sum = 0.0;
        for (double v : samples)
            sum += v;
        e.mean = sum / static_cast<double>(samples.size());
        if (samples.size() > 1)
        {
            double ss = 0.0;
            for (double v : samples)
                ss += (v - e.mean) * (v - e.mean);
            e.stderr = std::sqrt(ss / static_cast<double>(samples.size() - 1) / static_cast<double>(samples.size()));
        }
        return e;
    }

    enum class ReceiverKind
    {
        robust,
        conventional,
    };

    enum class Direction
    {
        ul,
        dl,
    };

    inline std::string to_string(Direction d) { return d == Direction::ul ? "ul" : "dl"; }

    /// One coherence block: true channels and their MMSE estimates.
    struct Block
    {
        CMatrix channels;
        CMatrix estimates;
    };

    /// Channel draw, pilot observation and MMSE estimation for a fixed scenario and pattern.
    ///
    /// Block `index` of a run with seed `seed` always sees the same random numbers,
    /// whichever thread evaluates it.
    class BlockPipeline
    {
    public:
        BlockPipeline(std::span<const CMatrix> true_covariances, std::span<const CMatrix> design_covariances,
                      const PilotPattern &pattern, const PilotConfig &train)
            : sampler_(true_covariances), estimator_(pattern, design_covariances, train), train_(train),
              error_sum_(estimator_.error_cov_sum())
        {
        }

        BlockPipeline(std::span<const CMatrix> covariances, const PilotPattern &pattern, const PilotConfig &train)
            : BlockPipeline(covariances, covariances, pattern, train)
        {
        }

        Block draw(std::uint64_t seed, std::uint64_t index) const
        {
            BlockRng channel_rng(seed, Stream::channel, index);
            BlockRng noise_rng(seed, Stream::pilot_noise, index);
            Block b;
            b.channels = sampler_.draw(channel_rng);
            const CMatrix y = observe_pilots(b.channels, estimator_.pattern(), train_, noise_rng);
            b.estimates = estimator_.estimate(y);
            return b;
        }

        const MmseEstimator &estimator() const { return estimator_; }
        const CMatrix &error_cov_sum() const { return error_sum_; }

    private:
        ChannelSampler sampler_;
        MmseEstimator estimator_;
        PilotConfig train_;
        CMatrix error_sum_;
    };

    namespace detail
    {
        inline void check_run(const Scenario &scenario, const PilotPattern &pattern, int blocks)
        {
            scenario.validate();
            if (pattern.user_count() != scenario.user_count())
                throw DomainError("pattern and scenario disagree on the user count");
            if (blocks < 1)
                throw DomainError("at least one block is required");
        }

        inline PilotConfig pattern_config(const LinkConfig &link, const PilotPattern &pattern)
        {
            return {link.train_snr, pattern.pilot_count()};
        }
    }

    /// Average over blocks of the analytic UL detection MSE of the chosen receiver,
    /// evaluated under the error statistics of the MMSE estimates.
    inline Estimate avg_mse_sd(const Scenario &scenario, const PilotPattern &pattern, const LinkConfig &link,
                               ReceiverKind kind, int blocks, std::uint64_t seed)
    {
        detail::check_run(scenario, pattern, blocks);
        const BlockPipeline pipeline(scenario.covariances, pattern, detail::pattern_config(link, pattern));
        const auto m = scenario.antenna_count();
        const EffectiveNoise design(kind == ReceiverKind::robust ? pipeline.error_cov_sum() : CMatrix::Zero(m, m),
                                    link.ul_snr);
        const auto values = parallel_map(static_cast<std::size_t>(blocks),
                                         [&](std::size_t i)
                                         {
                                             const Block b = pipeline.draw(seed, i);
                                             const auto w = design.receiver(b.estimates).w;
                                             return analytic_mse_ul(w, b.estimates, pipeline.error_cov_sum(),
                                                                    link.ul_snr);
                                         });
        return summarize(values);
    }

    /// Realized UL detection MSE when estimator and receiver are built from
    /// `design_covariances` while channels follow `true_covariances`. The MSE of each
    /// block is conditioned on the true channel, so no error statistics are assumed.
    inline Estimate realized_mse_sd(std::span<const CMatrix> true_covariances,
                                    std::span<const CMatrix> design_covariances, const PilotPattern &pattern,
                                    const LinkConfig &link, int blocks, std::uint64_t seed)
    {
        if (blocks < 1)
            throw DomainError("at least one block is required");
        const BlockPipeline pipeline(true_covariances, design_covariances, pattern,
                                     detail::pattern_config(link, pattern));
        const EffectiveNoise design(pipeline.error_cov_sum(), link.ul_snr);
        const auto m = true_covariances.front().rows();
        const CMatrix no_error = CMatrix::Zero(m, m);
        const auto values = parallel_map(static_cast<std::size_t>(blocks),
                                         [&](std::size_t i)
                                         {
                                             const Block b = pipeline.draw(seed, i);
                                             const auto w = design.receiver(b.estimates).w;
                                             return analytic_mse_ul(w, b.channels, no_error, link.ul_snr);
                                         });
        return summarize(values);
    }

    // Per-user UL SINRs of the robust receiver in one block.
    inline RVector ul_sinr(const CMatrix &estimates, const CMatrix &error_cov_sum, const UplinkReceiver &receiver,
                           double ul_snr)
    {
        const CMatrix u = receiver.w.conjugate();
        // (G G^H + E + I/rho) u_k for all k
        const CMatrix loaded = estimates * (estimates.adjoint() * u) + error_cov_sum * u + u / ul_snr;
        const CMatrix useful = u.adjoint() * estimates; // (k, m) = u_k^H g_m
        RVector sinr(estimates.cols());
        for (Eigen::Index k = 0; k < estimates.cols(); ++k)
        {
            const double signal = std::norm(useful(k, k));
            const double total = u.col(k).dot(loaded.col(k)).real();
            const double denom = std::max(total - signal, 1e-300);
            sinr(k) = signal / denom;
        }
        return sinr;
    }

    /// UL sum achievable rate with the robust receiver, averaged over blocks.
    inline Estimate ul_sum_rate(const Scenario &scenario, const PilotPattern &pattern, const LinkConfig &link,
                                int blocks, std::uint64_t seed)
    {
        detail::check_run(scenario, pattern, blocks);
        const BlockPipeline pipeline(scenario.covariances, pattern, detail::pattern_config(link, pattern));
        const EffectiveNoise design(pipeline.error_cov_sum(), link.ul_snr);
        const auto values = parallel_map(static_cast<std::size_t>(blocks),
                                         [&](std::size_t i)
                                         {
                                             const Block b = pipeline.draw(seed, i);
                                             const RVector sinr = ul_sinr(b.estimates, pipeline.error_cov_sum(),
                                                                          design.receiver(b.estimates), link.ul_snr);
                                             return (1.0 + sinr.array()).log().sum() / std::log(2.0);
                                         });
        return summarize(values);
    }

    namespace detail
    {
        // Per-block quantities entering the DL rate expectations.
        struct DlBlockMoments
        {
            CVector signal;    // alpha g_k^T b_k
            Eigen::MatrixXd power; // alpha^2 |g_k^T b_m|^2
            double alpha_sq = 0.0;
        };

        inline double dl_rate_from_moments(const std::vector<DlBlockMoments> &moments, std::size_t begin,
                                           std::size_t end, double dl_snr)
        {
            const auto k_users = moments.front().signal.size();
            const double n = static_cast<double>(end - begin);
            CVector mean_signal = CVector::Zero(k_users);
            Eigen::VectorXd mean_power = Eigen::VectorXd::Zero(k_users);
            double mean_alpha_sq = 0.0;
            for (std::size_t i = begin; i < end; ++i)
            {
                mean_signal += moments[i].signal;
                mean_power += moments[i].power.rowwise().sum();
                mean_alpha_sq += moments[i].alpha_sq;
            }
            mean_signal /= n;
            mean_power /= n;
            mean_alpha_sq /= n;

            double rate = 0.0;
            for (Eigen::Index k = 0; k < k_users; ++k)
            {
                const double s = std::norm(mean_signal(k));
                double interference = mean_power(k) - s;
                if (interference < 0.0)
                    interference = 1e-15;
                rate += std::log2(1.0 + s / (interference + mean_alpha_sq / dl_snr));
            }
            return rate;
        }
    }

    /// DL sum achievable rate of the robust precoder.
    ///
    /// The expectations E[alpha g_k^T b_k], E[alpha^2 |g_k^T b_m|^2] and E[alpha^2] are
    /// empirical means across blocks. The standard error comes from 10 batch means
    /// (zero when fewer than 20 blocks are run).
    inline Estimate dl_sum_rate(const Scenario &scenario, const PilotPattern &pattern, const LinkConfig &link,
                                int blocks, std::uint64_t seed)
    {
        detail::check_run(scenario, pattern, blocks);
        if (blocks < 2)
            throw DomainError("dl_sum_rate: at least two blocks are required");
        const BlockPipeline pipeline(scenario.covariances, pattern, detail::pattern_config(link, pattern));
        const EffectiveNoise design(pipeline.error_cov_sum(), link.dl_snr);
        const double k_users = static_cast<double>(scenario.user_count());

        const auto moments = parallel_map(static_cast<std::size_t>(blocks),
                                          [&](std::size_t i)
                                          {
                                              const Block b = pipeline.draw(seed, i);
                                              const CMatrix filter = design.receiver(b.estimates).w;
                                              const double gamma = std::sqrt(filter.squaredNorm() / k_users);
                                              if (!(gamma > 0.0))
                                                  throw DegenerateInput("dl_sum_rate: zero channel estimate");
                                              // alpha = gamma and B = filter / gamma, so alpha G^T B = G^T filter.
                                              const CMatrix effective = b.channels.transpose() * filter;
                                              detail::DlBlockMoments mo;
                                              mo.signal = effective.diagonal();
                                              mo.power = effective.cwiseAbs2();
                                              mo.alpha_sq = gamma * gamma;
                                              return mo;
                                          });

        Estimate e;
        e.trials = blocks;
        e.mean = detail::dl_rate_from_moments(moments, 0, moments.size(), link.dl_snr);
        if (blocks >= 20)
        {
            constexpr int batches = 10;
            std::vector<double> batch_rates;
            for (int b = 0; b < batches; ++b)
            {
                const std::size_t begin = moments.size() * b / batches;
                const std::size_t end = moments.size() * (b + 1) / batches;
                batch_rates.push_back(detail::dl_rate_from_moments(moments, begin, end, link.dl_snr));
            }
            e.stderr = summarize(batch_rates).stderr;
        }
        return e;
    }

    inline Estimate sum_rate(Direction direction, const Scenario &scenario, const PilotPattern &pattern,
                             const LinkConfig &link, int blocks, std::uint64_t seed)
    {
        return direction == Direction::ul ? ul_sum_rate(scenario, pattern, link, blocks, seed)
                                          : dl_sum_rate(scenario, pattern, link, blocks, seed);
    }

    // (1 - tau / T) * R
    inline double net_spectral_efficiency(int tau, int block_length, double achievable_rate)
    {
        if (tau < 0 || block_length < 1 || tau > block_length)
            throw DomainError("net_spectral_efficiency: need 0 <= tau <= T");
        return (1.0 - static_cast<double>(tau) / block_length) * achievable_rate;
    }

    struct OrthogonalTraining
    {
        int tau = 0;
        int served = 0;
    };

    // tau = K when K <= T/2, otherwise floor(T/2) pilots for the first floor(T/2) users.
    inline OrthogonalTraining ot_baseline_tau(int users, int block_length)
    {
        if (users < 1 || block_length < 1)
            throw DomainError("ot_baseline_tau: K and T must be positive");
        if (2 * users <= block_length)
            return {users, users};
        const int half = block_length / 2;
        return {half, half};
    }

    struct PilotLengthPoint
    {
        int tau = 0;
        PilotPattern pattern;
        Estimate rate;
    };

    /// Achievable rate for every tau in 2..K-1 (SGPS patterns) plus the orthogonal tau = K.
    inline std::vector<PilotLengthPoint> rates_by_pilot_length(const Scenario &scenario, const LinkConfig &link,
                                                               Direction direction, int blocks, std::uint64_t seed)
    {
        scenario.validate();
        const int k_users = scenario.user_count();
        if (k_users < 2)
            throw DomainError("rates_by_pilot_length: at least two users are required");
        std::vector<PilotLengthPoint> points;
        for (int tau = 2; tau <= k_users; ++tau)
        {
            PilotLengthPoint p;
            p.tau = tau;
            p.pattern = tau < k_users ? sgps(scenario.covariances, tau) : PilotPattern::orthogonal(k_users);
            LinkConfig l = link;
            l.pilot_length = tau;
            // Same seed for every tau: common random channels sharpen the comparison.
            p.rate = sum_rate(direction, scenario, p.pattern, l, blocks, seed);
            points.push_back(std::move(p));
        }
        return points;
    }

    struct PilotLengthChoice
    {
        int tau = 0;
        Estimate net_rate;
        std::vector<PilotLengthPoint> points;
    };

    // Maximizes the net rate over the points with tau <= T; ties go to the smaller tau.
    inline PilotLengthChoice select_pilot_length(const std::vector<PilotLengthPoint> &points, int block_length)
    {
        PilotLengthChoice best;
        best.points = points;
        bool found = false;
        for (const auto &p : points)
        {
            if (p.tau > block_length)
                continue;
            const double factor = 1.0 - static_cast<double>(p.tau) / block_length;
            const double net = factor * p.rate.mean;
            if (!found || net > best.net_rate.mean)
            {
                found = true;
                best.tau = p.tau;
                best.net_rate = {net, factor * p.rate.stderr, p.rate.trials};
            }
        }
        if (!found)
            throw DomainError("select_pilot_length: no pilot length fits in the coherence block");
        return best;
    }

    inline PilotLengthChoice optimize_pilot_length(const Scenario &scenario, const LinkConfig &link,
                                                   Direction direction, int blocks, std::uint64_t seed)
    {
        return select_pilot_length(rates_by_pilot_length(scenario, link, direction, blocks, seed),
                                   link.block_length);
    }

    struct BaselineResult
    {
        OrthogonalTraining training;
        Estimate rate;
        Estimate net_rate;
    };

    // Orthogonal training of the served users only.
    inline BaselineResult ot_baseline(const Scenario &scenario, const LinkConfig &link, Direction direction,
                                      int blocks, std::uint64_t seed)
    {
        BaselineResult out;
        out.training = ot_baseline_tau(scenario.user_count(), link.block_length);
        const Scenario served = scenario.leading_users(out.training.served);
        LinkConfig l = link;
        l.pilot_length = out.training.tau;
        out.rate = sum_rate(direction, served, PilotPattern::orthogonal(out.training.served), l, blocks, seed);
        const double factor = 1.0 - static_cast<double>(out.training.tau) / link.block_length;
        out.net_rate = {factor * out.rate.mean, factor * out.rate.stderr, out.rate.trials};
        return out;
    }

    /// Per-block UL/DL comparison at equal data SNR.
    struct DualityGap
    {
        double max_abs_mse_gap = 0.0;        // max over blocks of |eps_u - eps_d|
        double max_relative_filter_gap = 0.0; // max over blocks of |gamma B - W|_F / |W|_F
    };

    inline DualityGap duality_check(const Scenario &scenario, const PilotPattern &pattern, const LinkConfig &link,
                                    int blocks, std::uint64_t seed)
    {
        detail::check_run(scenario, pattern, blocks);
        const BlockPipeline pipeline(scenario.covariances, pattern, detail::pattern_config(link, pattern));
        const CMatrix &error_sum = pipeline.error_cov_sum();
        struct Gap
        {
            double mse = 0.0, filter = 0.0;
        };
        const auto gaps = parallel_map(static_cast<std::size_t>(blocks),
                                       [&](std::size_t i)
                                       {
                                           const Block b = pipeline.draw(seed, i);
                                           const auto w = robust_ul_receiver(b.estimates, error_sum, link.ul_snr);
                                           const auto p = robust_dl_precoder(b.estimates, error_sum, link.dl_snr);
                                           const double ul = analytic_mse_ul(w.w, b.estimates, error_sum, link.ul_snr);
                                           const double dl =
                                               analytic_mse_dl(p.b, p.alpha, b.estimates, error_sum, link.dl_snr);
                                           Gap g;
                                           g.mse = std::abs(ul - dl);
                                           g.filter = (p.gamma * p.b - w.w).norm() / w.w.norm();
                                           return g;
                                       });
        DualityGap out;
        for (const auto &g : gaps)
        {
            out.max_abs_mse_gap = std::max(out.max_abs_mse_gap, g.mse);
            out.max_relative_filter_gap = std::max(out.max_relative_filter_gap, g.filter);
        }
        return out;
    }
}
