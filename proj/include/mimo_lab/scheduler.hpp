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

#include "pilot_training.hpp"
#include "transceiver.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mimo_lab
{
    enum class SchedulingCriterion
    {
        mmse_ce,
        mmse_sd_lb,
    };

    inline std::string to_string(SchedulingCriterion c)
    {
        return c == SchedulingCriterion::mmse_ce ? "mmse_ce" : "mmse_sd_lb";
    }

    /// Omega(i, j) = tr(C_{pi_i}^{-1} R_i Rt^{-1} R_j) for users sharing a pilot, 0 otherwise,
    /// with Rt = sum_k R_{g~k} + I / rho^t. Equals E[G^H Rt^{-1} G] for the MMSE estimates.
    inline CMatrix omega_matrix(const PilotPattern &pattern, std::span<const CMatrix> covariances,
                                const PilotConfig &train, double data_snr)
    {
        const MmseEstimator estimator(pattern, covariances, train);
        const EffectiveNoise noise(estimator.error_cov_sum(), data_snr);
        const int k_users = pattern.user_count();

        std::vector<CMatrix> whitened(k_users);
        for (int j = 0; j < k_users; ++j)
            whitened[j] = noise.solver().solve(covariances[j]);

        CMatrix omega = CMatrix::Zero(k_users, k_users);
        for (int i = 0; i < k_users; ++i)
        {
            // gain_i = R_i C^{-1}, so C^{-1} R_i = gain_i^H.
            const CMatrix left = estimator.gain(i).adjoint();
            for (int j = 0; j < k_users; ++j)
                if (pattern.shares_pilot(i, j))
                    omega(i, j) = (left.transpose().cwiseProduct(whitened[j])).sum();
        }
        return hermitian_part(omega);
    }

    inline double lower_bound_from_omega(const CMatrix &omega)
    {
        CMatrix a = hermitian_part(omega);
        a.diagonal().array() += 1.0;
        return HermitianSolver(a).inverse().trace().real();
    }

    // tr{(I_K + Omega)^{-1}}
    inline double mse_sd_lower_bound(const PilotPattern &pattern, std::span<const CMatrix> covariances,
                                     const PilotConfig &train, double data_snr)
    {
        return lower_bound_from_omega(omega_matrix(pattern, covariances, train, data_snr));
    }

    /// Per-user omega_i of the interference-free optimum.
    inline RVector lower_bound_optimal_omegas(std::span<const CMatrix> covariances, const PilotConfig &train,
                                              double data_snr)
    {
        train.validate();
        if (covariances.empty())
            return RVector();
        const auto m = covariances.front().rows();
        CMatrix error_sum = CMatrix::Zero(m, m);
        for (const auto &r : covariances)
            error_sum += interference_free_error_cov(r, train);
        const EffectiveNoise noise(error_sum, data_snr);

        RVector omega(static_cast<Eigen::Index>(covariances.size()));
        for (std::size_t i = 0; i < covariances.size(); ++i)
        {
            const CMatrix &r = covariances[i];
            const CMatrix left = HermitianSolver(r + identity(m) * train.noise_variance()).solve(r);
            omega(static_cast<Eigen::Index>(i)) = trace_product_real(left, noise.solver().solve(r));
        }
        return omega;
    }

    // sum_i 1 / (1 + omega_i)
    inline double mse_sd_lb_minimum(std::span<const CMatrix> covariances, const PilotConfig &train, double data_snr)
    {
        const RVector omega = lower_bound_optimal_omegas(covariances, train, data_snr);
        return (1.0 + omega.array()).inverse().sum();
    }

    inline double scheduling_objective(SchedulingCriterion criterion, const PilotPattern &pattern,
                                       std::span<const CMatrix> covariances, const PilotConfig &train,
                                       double data_snr)
    {
        return criterion == SchedulingCriterion::mmse_ce ? mse_ce(pattern, covariances, train)
                                                         : mse_sd_lower_bound(pattern, covariances, train, data_snr);
    }

    // ---------------------------------------------------------------------------
    // Exhaustive search
    // ---------------------------------------------------------------------------

    struct SearchResult
    {
        PilotPattern pattern;
        double objective = 0.0;
        std::uint64_t evaluated = 0; // distinct partitions evaluated
    };

    struct SearchOptions
    {
        double max_assignments = 1e6; // cap on tau^K
    };

    namespace detail
    {
        /// Per-subset quantities of the scheduling objectives. Both objectives depend on a
        /// pattern only through its groups, so everything is keyed by the group bitmask.
        class SubsetCache
        {
        public:
            SubsetCache(std::span<const CMatrix> covariances, const PilotConfig &train, bool keep_gains)
                : covariances_(covariances), train_(train), keep_gains_(keep_gains)
            {
                entries_.resize(std::size_t{1} << covariances.size());
            }

            struct Entry
            {
                bool ready = false;
                double mse = 0.0;                  // sum over members of tr(R_{g~k})
                CMatrix error_sum;                 // sum over members of R_{g~k}
                std::vector<CMatrix> whitened; // V^{-1} R_i with C_S = V V^H, members in order
            };

            const Entry &get(std::uint32_t mask)
            {
                Entry &e = entries_[mask];
                if (e.ready)
                    return e;
                const auto m = covariances_.front().rows();
                CMatrix c = identity(m) * train_.noise_variance();
                for (std::size_t k = 0; k < covariances_.size(); ++k)
                    if (mask & (1u << k))
                        c += covariances_[k];
                const Eigen::LLT<CMatrix> llt(c);
                if (llt.info() != Eigen::Success)
                    throw NumericError("exhaustive_search: training covariance is not positive definite");
                e.error_sum = CMatrix::Zero(m, m);
                for (std::size_t k = 0; k < covariances_.size(); ++k)
                {
                    if (!(mask & (1u << k)))
                        continue;
                    const CMatrix &r = covariances_[k];
                    CMatrix white = llt.matrixL().solve(r);
                    const CMatrix err = hermitian_part(r - white.adjoint() * white);
                    e.mse += err.trace().real();
                    e.error_sum += err;
                    if (keep_gains_)
                        e.whitened.push_back(std::move(white));
                }
                e.ready = true;
                return e;
            }

            CMatrix whitened(std::uint32_t mask, int user) const
            {
                const auto m = covariances_.front().rows();
                CMatrix c = identity(m) * train_.noise_variance();
                for (std::size_t k = 0; k < covariances_.size(); ++k)
                    if (mask & (1u << k))
                        c += covariances_[k];
                return Eigen::LLT<CMatrix>(c).matrixL().solve(covariances_[user]);
            }

            bool keeps_gains() const { return keep_gains_; }

        private:
            std::span<const CMatrix> covariances_;
            PilotConfig train_;
            bool keep_gains_;
            std::vector<Entry> entries_;
        };

        inline double evaluate_partition(SchedulingCriterion criterion, const std::vector<std::uint32_t> &masks,
                                         SubsetCache &cache, std::span<const CMatrix> covariances, double data_snr)
        {
            if (criterion == SchedulingCriterion::mmse_ce)
            {
                double total = 0.0;
                for (auto mask : masks)
                    total += cache.get(mask).mse;
                return total;
            }

            const auto m = covariances.front().rows();
            const int k_users = static_cast<int>(covariances.size());
            CMatrix noise = CMatrix::Zero(m, m);
            for (auto mask : masks)
                noise += cache.get(mask).error_sum;
            noise.diagonal().array() += 1.0 / data_snr;
            // With C_S = V V^H and N = U U^H, Omega_ij = tr(C_S^{-1} R_i N^{-1} R_j)
            // = sum of H_i .* conj(H_j) for H_i = V^{-1} R_i U^{-H}.
            const Eigen::LLT<CMatrix> noise_llt(noise);
            if (noise_llt.info() != Eigen::Success)
                throw NumericError("exhaustive_search: detection noise covariance is not positive definite");

            CMatrix omega = CMatrix::Zero(k_users, k_users);
            std::vector<CMatrix> h;
            for (auto mask : masks)
            {
                const auto &entry = cache.get(mask);
                std::vector<int> members;
                for (int k = 0; k < k_users; ++k)
                    if (mask & (1u << k))
                        members.push_back(k);
                h.clear();
                for (std::size_t a = 0; a < members.size(); ++a)
                {
                    const CMatrix white = cache.keeps_gains() ? entry.whitened[a] : cache.whitened(mask, members[a]);
                    h.push_back(noise_llt.matrixL().solve(white.adjoint()).adjoint());
                }
                for (std::size_t a = 0; a < members.size(); ++a)
                    for (std::size_t b = 0; b < members.size(); ++b)
                        omega(members[a], members[b]) = h[a].cwiseProduct(h[b].conjugate()).sum();
            }
            return lower_bound_from_omega(omega);
        }
    }

    /// Global minimizer of a scheduling criterion over all tau^K pilot assignments.
    ///
    /// Both criteria are invariant under relabeling of pilots, so the search visits each
    /// set partition of the users into at most tau groups once, in the form of its
    /// restricted growth string (the lexicographically smallest labeling). The first
    /// minimum in lexicographic order wins, which is the lexicographically smallest
    /// minimizing assignment among all tau^K.
    inline SearchResult exhaustive_search(SchedulingCriterion criterion, std::span<const CMatrix> covariances,
                                          const PilotConfig &train, double data_snr, SearchOptions options = {})
    {
        train.validate();
        const int k_users = static_cast<int>(covariances.size());
        const int tau = train.pilot_length;
        if (k_users < 1)
            throw DomainError("exhaustive_search: no users");
        if (k_users > 30)
            throw ResourceError("exhaustive_search: too many users");
        if (std::pow(static_cast<double>(tau), k_users) > options.max_assignments)
            throw ResourceError("exhaustive_search: tau^K exceeds the configured cap");
        detail::check_snr(data_snr);

        const auto m = covariances.front().rows();
        const double gain_bytes =
            static_cast<double>(k_users) * std::pow(2.0, k_users - 1) * static_cast<double>(m * m) * 16.0;
        const bool keep_gains = criterion == SchedulingCriterion::mmse_sd_lb && gain_bytes < 512.0 * 1024 * 1024;
        detail::SubsetCache cache(covariances, train, keep_gains);

        std::vector<int> rgs(k_users, 0);
        std::vector<int> prefix_max(k_users, 0); // max label among rgs[0..i]
        SearchResult best;
        best.objective = std::numeric_limits<double>::infinity();
        std::vector<std::uint32_t> masks;

        while (true)
        {
            masks.assign(tau, 0u);
            for (int k = 0; k < k_users; ++k)
                masks[rgs[k]] |= (1u << k);
            while (!masks.empty() && masks.back() == 0u)
                masks.pop_back();
            const double value = detail::evaluate_partition(criterion, masks, cache, covariances, data_snr);
            ++best.evaluated;
            if (value < best.objective)
            {
                best.objective = value;
                best.pattern = PilotPattern(rgs, tau);
            }

            // Next restricted growth string with labels < tau.
            int pos = k_users - 1;
            while (pos > 0)
            {
                const int limit = std::min(prefix_max[pos - 1] + 1, tau - 1);
                if (rgs[pos] < limit)
                    break;
                --pos;
            }
            if (pos == 0)
                break;
            ++rgs[pos];
            prefix_max[pos] = std::max(prefix_max[pos - 1], rgs[pos]);
            for (int k = pos + 1; k < k_users; ++k)
            {
                rgs[k] = 0;
                prefix_max[k] = prefix_max[pos];
            }
        }
        if (!std::isfinite(best.objective))
            throw NumericError("exhaustive_search: objective is not finite");
        return best;
    }

    // ---------------------------------------------------------------------------
    // Statistical greedy pilot scheduling
    // ---------------------------------------------------------------------------

    /// Greedy scheduling from covariance orthogonality.
    ///
    /// Step 1 seeds one user per pilot, each time picking the unscheduled user whose
    /// covariance is most aligned (largest summed cos of the matrix angle) with the
    /// seeds already placed, so that similar users get orthogonal pilots. Step 2 puts
    /// every remaining user, in ascending order, on the pilot whose current group has
    /// the smallest summed cosine with it. Ties go to the smallest index.
    inline PilotPattern sgps(std::span<const CMatrix> covariances, int tau)
    {
        const int k_users = static_cast<int>(covariances.size());
        if (tau <= 1 || tau >= k_users)
            throw DomainError("sgps: pilot length must satisfy 1 < tau < K");

        Eigen::MatrixXd cosine(k_users, k_users);
        for (int i = 0; i < k_users; ++i)
            for (int j = i; j < k_users; ++j)
                cosine(i, j) = cosine(j, i) = matrix_cosine(covariances[i], covariances[j]);

        std::vector<int> assignment(k_users, -1);
        std::vector<int> seeds{0};
        assignment[0] = 0;

        for (int t = 1; t < tau; ++t)
        {
            int best = -1;
            double best_score = -std::numeric_limits<double>::infinity();
            for (int l = 0; l < k_users; ++l)
            {
                if (assignment[l] >= 0)
                    continue;
                double score = 0.0;
                for (int s : seeds)
                    score += cosine(l, s);
                if (score > best_score)
                {
                    best_score = score;
                    best = l;
                }
            }
            assignment[best] = t;
            seeds.push_back(best);
        }

        std::vector<std::vector<int>> groups(tau);
        for (int t = 0; t < tau; ++t)
            groups[t].push_back(seeds[t]);

        for (int k = 0; k < k_users; ++k)
        {
            if (assignment[k] >= 0)
                continue;
            int best = 0;
            double best_score = std::numeric_limits<double>::infinity();
            for (int q = 0; q < tau; ++q)
            {
                double score = 0.0;
                for (int s : groups[q])
                    score += cosine(k, s);
                if (score < best_score)
                {
                    best_score = score;
                    best = q;
                }
            }
            assignment[k] = best;
            groups[best].push_back(k);
        }
        return PilotPattern(std::move(assignment), tau);
    }
}
