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
// Symbol-level Monte Carlo oracles for detection and precoding MSE. Channels are
// drawn around fixed estimates with the estimator's error covariances, so the
// empirical MSE targets the analytic conditional MSE.

#pragma once

#include "fixtures.hpp"
#include "mimo_lab/transceiver.hpp"

namespace fixtures
{
    struct EstimatedBlock
    {
        CMatrix estimates;
        std::vector<CMatrix> error_covs;
        CMatrix error_sum;
    };

    // One estimated block of a random correlated scenario, users cycling over tau pilots.
    inline EstimatedBlock random_block(int m, int k, int tau, std::uint64_t seed)
    {
        const auto covs = random_psd_set(m, k, seed, 2);
        std::vector<int> assignment(k);
        for (int i = 0; i < k; ++i)
            assignment[i] = i % tau;
        const PilotPattern pattern(assignment, tau);
        const PilotConfig cfg{2.0, tau};
        const MmseEstimator est(pattern, covs, cfg);
        BlockRng cr(seed, Stream::channel, 0);
        const CMatrix g = ChannelSampler(covs).draw(cr);
        const CMatrix y = observe_pilots(g, pattern, cfg, seed);
        return {est.estimate(y), est.error_covs(), est.error_cov_sum()};
    }

    namespace detail
    {
        inline CMatrix draw_around(const EstimatedBlock &b, const std::vector<CMatrix> &roots, BlockRng &rng)
        {
            CMatrix g = b.estimates;
            for (Eigen::Index j = 0; j < g.cols(); ++j)
                g.col(j) += roots[j] * rng.complex_gaussian(g.rows(), 1);
            return g;
        }

        inline std::vector<CMatrix> roots_of(const EstimatedBlock &b)
        {
            std::vector<CMatrix> roots;
            for (const auto &e : b.error_covs)
                roots.push_back(psd_sqrt(e));
            return roots;
        }
    }

    // Empirical E||W^T y - s||^2 for the uplink y = G s + n.
    inline double monte_carlo_ul(const CMatrix &w, const EstimatedBlock &b, double snr, int symbols,
                                 std::uint64_t seed)
    {
        const auto m = b.estimates.rows(), k = b.estimates.cols();
        const auto roots = detail::roots_of(b);
        BlockRng rng(seed, Stream::data, 0);
        double total = 0.0;
        for (int n = 0; n < symbols; ++n)
        {
            const CMatrix g = detail::draw_around(b, roots, rng);
            const CVector s = rng.complex_gaussian(k, 1);
            const CVector y = g * s + rng.complex_gaussian(m, 1) / std::sqrt(snr);
            total += (w.transpose() * y - s).squaredNorm();
        }
        return total / symbols;
    }

    // Empirical E||alpha y - s||^2 for the downlink y = G^T B s + n.
    inline double monte_carlo_dl(const CMatrix &bm, double alpha, const EstimatedBlock &b, double snr, int symbols,
                                 std::uint64_t seed)
    {
        const auto k = b.estimates.cols();
        const auto roots = detail::roots_of(b);
        BlockRng rng(seed, Stream::data, 1);
        double total = 0.0;
        for (int n = 0; n < symbols; ++n)
        {
            const CMatrix g = detail::draw_around(b, roots, rng);
            const CVector s = rng.complex_gaussian(k, 1);
            const CVector y = g.transpose() * bm * s + rng.complex_gaussian(k, 1) / std::sqrt(snr);
            total += (alpha * y - s).squaredNorm();
        }
        return total / symbols;
    }
}
