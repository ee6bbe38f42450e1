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

#include <sstream>
#include <string>
#include <vector>

namespace mimo_lab
{
    /// Pilot-reuse pattern: user k transmits pilot pilot_of(k).
    ///
    /// Pilots are 0-based internally; from_labels()/labels() use the 1-based
    /// numbering of printed patterns such as [1,1,2,2,3,3,4,4,5,5].
    class PilotPattern
    {
    public:
        PilotPattern() = default;

        PilotPattern(std::vector<int> assignment, int pilot_count)
            : assignment_(std::move(assignment)), pilot_count_(pilot_count)
        {
            if (pilot_count_ < 1)
                throw DomainError("PilotPattern: pilot count must be at least 1");
            for (int p : assignment_)
                if (p < 0 || p >= pilot_count_)
                    throw DomainError("PilotPattern: pilot index out of range");
        }

        static PilotPattern from_labels(const std::vector<int> &one_based, int pilot_count)
        {
            std::vector<int> a(one_based.size());
            for (std::size_t k = 0; k < a.size(); ++k)
                a[k] = one_based[k] - 1;
            return PilotPattern(std::move(a), pilot_count);
        }

        // Every user on its own pilot.
        static PilotPattern orthogonal(int users)
        {
            std::vector<int> a(users);
            for (int k = 0; k < users; ++k)
                a[k] = k;
            return PilotPattern(std::move(a), users);
        }

        int user_count() const { return static_cast<int>(assignment_.size()); }
        int pilot_count() const { return pilot_count_; }
        int pilot_of(int user) const { return assignment_.at(user); }
        const std::vector<int> &assignment() const { return assignment_; }

        std::vector<int> labels() const
        {
            std::vector<int> out(assignment_);
            for (auto &p : out)
                ++p;
            return out;
        }

        std::vector<int> group(int pilot) const
        {
            std::vector<int> g;
            for (int k = 0; k < user_count(); ++k)
                if (assignment_[k] == pilot)
                    g.push_back(k);
            return g;
        }

        std::vector<std::vector<int>> groups() const
        {
            std::vector<std::vector<int>> g(pilot_count_);
            for (int k = 0; k < user_count(); ++k)
                g[assignment_[k]].push_back(k);
            return g;
        }

        bool shares_pilot(int i, int j) const { return assignment_.at(i) == assignment_.at(j); }

        std::string to_string() const
        {
            std::ostringstream os;
            os << '[';
            for (int k = 0; k < user_count(); ++k)
                os << (k ? "," : "") << assignment_[k] + 1;
            os << ']';
            return os.str();
        }

        friend bool operator==(const PilotPattern &, const PilotPattern &) = default;

    private:
        std::vector<int> assignment_;
        int pilot_count_ = 1;
    };

    struct PilotConfig
    {
        double train_snr = 1.0; // rho^p, linear
        int pilot_length = 1;   // tau

        void validate() const
        {
            if (!(train_snr > 0.0))
                throw DomainError("PilotConfig: training SNR must be positive");
            if (pilot_length < 1)
                throw DomainError("PilotConfig: pilot length must be at least 1");
        }

        // Variance of the normalized pilot noise, 1 / (rho^p tau).
        double noise_variance() const { return 1.0 / (train_snr * pilot_length); }
    };

    namespace detail
    {
        inline void check_pattern(const PilotPattern &pattern, std::span<const CMatrix> covariances,
                                  const PilotConfig &config)
        {
            config.validate();
            if (pattern.pilot_count() != config.pilot_length)
                throw DomainError("pilot pattern and pilot config disagree on the pilot length");
            if (static_cast<std::size_t>(pattern.user_count()) != covariances.size())
                throw DomainError("pilot pattern and covariance list disagree on the user count");
            if (covariances.empty())
                return;
            const auto m = covariances.front().rows();
            for (const auto &r : covariances)
                if (r.rows() != m || r.cols() != m)
                    throw DomainError("covariances must all be square with the same dimension");
        }
    }

    // ---------------------------------------------------------------------------
    // Pilot signals and observations
    // ---------------------------------------------------------------------------

    // Row k is x_{pi_k}^T; x_p is column p of the tau-point DFT matrix scaled by sqrt(power),
    // so that x_p^H x_q = tau * power * delta(p - q).
    inline CMatrix pilot_matrix(const PilotPattern &pattern, double power)
    {
        if (!(power > 0.0))
            throw DomainError("pilot_matrix: pilot power must be positive");
        const int tau = pattern.pilot_count();
        CMatrix x(pattern.user_count(), tau);
        const double amp = std::sqrt(power);
        for (int k = 0; k < pattern.user_count(); ++k)
            for (int n = 0; n < tau; ++n)
            {
                const long long prod = static_cast<long long>(n) * pattern.pilot_of(k) % tau;
                x(k, n) = amp * std::polar(1.0, -2.0 * pi * static_cast<double>(prod) / tau);
            }
        return x;
    }

    /// Decorrelated pilot observations y_p = sum_{l in K_p} g_l + noise.col(p) / sqrt(rho^p tau),
    /// one column per pilot. `normalized_noise` holds unit-variance CN(0, I) columns.
    inline CMatrix observe_pilots_with_noise(const CMatrix &channels, const PilotPattern &pattern,
                                             const PilotConfig &config, const CMatrix &normalized_noise)
    {
        config.validate();
        if (channels.cols() != pattern.user_count())
            throw DomainError("observe_pilots: channel matrix and pattern disagree on the user count");
        if (pattern.pilot_count() != config.pilot_length)
            throw DomainError("observe_pilots: pattern and config disagree on the pilot length");
        if (normalized_noise.rows() != channels.rows() || normalized_noise.cols() != config.pilot_length)
            throw DomainError("observe_pilots: noise has the wrong shape");

        CMatrix y = normalized_noise * std::sqrt(config.noise_variance());
        for (int k = 0; k < pattern.user_count(); ++k)
            y.col(pattern.pilot_of(k)) += channels.col(k);
        return y;
    }

    // Direct form: draws the normalized noise from `rng`.
    inline CMatrix observe_pilots(const CMatrix &channels, const PilotPattern &pattern, const PilotConfig &config,
                                  BlockRng &rng)
    {
        const CMatrix noise = rng.complex_gaussian(channels.rows(), config.pilot_length);
        return observe_pilots_with_noise(channels, pattern, config, noise);
    }

    inline CMatrix observe_pilots(const CMatrix &channels, const PilotPattern &pattern, const PilotConfig &config,
                                  std::uint64_t seed)
    {
        BlockRng rng(seed, Stream::pilot_noise, 0);
        return observe_pilots(channels, pattern, config, rng);
    }

    /// Full received-signal path: Y = G X + N with raw noise N (entries of variance
    /// pilot_power / rho^p), then y_p = Y conj(x_p) / (pilot_power tau).
    inline CMatrix observe_pilots_full_path(const CMatrix &channels, const PilotPattern &pattern,
                                            const PilotConfig &config, const CMatrix &raw_noise,
                                            double pilot_power = 1.0)
    {
        config.validate();
        if (channels.cols() != pattern.user_count())
            throw DomainError("observe_pilots_full_path: channel matrix and pattern disagree on the user count");
        const CMatrix x = pilot_matrix(pattern, pilot_power);
        const CMatrix received = channels * x + raw_noise;
        const int tau = config.pilot_length;
        // Column p of the pilot book, conjugated; rows of `x` only cover used pilots.
        const PilotPattern book = PilotPattern::orthogonal(tau);
        const CMatrix all_pilots = pilot_matrix(book, pilot_power).transpose();
        return received * all_pilots.conjugate() / (pilot_power * tau);
    }

    inline CMatrix observe_pilots_full_path(const CMatrix &channels, const PilotPattern &pattern,
                                            const PilotConfig &config, BlockRng &rng, double pilot_power = 1.0)
    {
        const double noise_power = pilot_power / config.train_snr;
        const CMatrix raw = rng.complex_gaussian(channels.rows(), config.pilot_length) * std::sqrt(noise_power);
        return observe_pilots_full_path(channels, pattern, config, raw, pilot_power);
    }

    // ---------------------------------------------------------------------------
    // MMSE estimation
    // ---------------------------------------------------------------------------

    // C_p = sum_{l in K_p} R_l + I / (rho^p tau).
    inline CMatrix obs_covariance(const PilotPattern &pattern, std::span<const CMatrix> covariances,
                                  const PilotConfig &config, int pilot)
    {
        detail::check_pattern(pattern, covariances, config);
        if (pilot < 0 || pilot >= pattern.pilot_count())
            throw DomainError("obs_covariance: pilot index out of range");
        const auto m = covariances.front().rows();
        CMatrix c = identity(m) * config.noise_variance();
        for (int k : pattern.group(pilot))
            c += covariances[k];
        return c;
    }

    struct TrainingOutput
    {
        CMatrix observations;              // M x tau
        CMatrix estimates;                 // M x K
        std::vector<CMatrix> error_covs;   // K matrices R_{g~k}
        std::vector<CMatrix> obs_covs;     // tau matrices C_p
    };

    /// Precomputed MMSE estimator for a fixed pattern and covariance set.
    ///
    /// Holds C_p, the gains R_k C_{pi_k}^{-1} and the error covariances, so one
    /// instance can be applied to many coherence blocks.
    class MmseEstimator
    {
    public:
        MmseEstimator(const PilotPattern &pattern, std::span<const CMatrix> covariances, const PilotConfig &config)
            : pattern_(pattern)
        {
            detail::check_pattern(pattern, covariances, config);
            const int tau = pattern.pilot_count();
            const int k_users = pattern.user_count();
            dim_ = covariances.empty() ? 0 : covariances.front().rows();

            obs_covs_.reserve(tau);
            solvers_.reserve(tau);
            for (int p = 0; p < tau; ++p)
            {
                obs_covs_.push_back(obs_covariance(pattern, covariances, config, p));
                solvers_.emplace_back(obs_covs_.back());
            }

            gains_.reserve(k_users);
            error_covs_.reserve(k_users);
            for (int k = 0; k < k_users; ++k)
            {
                const CMatrix &r = covariances[k];
                // C^{-1} R; its adjoint is R C^{-1} because both factors are Hermitian.
                const CMatrix c_inv_r = solvers_[pattern.pilot_of(k)].solve(r);
                gains_.push_back(c_inv_r.adjoint());
                error_covs_.push_back(hermitian_part(r - r * c_inv_r));
            }
        }

        // Column k: R_k C_{pi_k}^{-1} y_{pi_k}.
        CMatrix estimate(const CMatrix &observations) const
        {
            if (observations.rows() != dim_ || observations.cols() != pattern_.pilot_count())
                throw DomainError("mmse_estimate: observations have the wrong shape");
            CMatrix g_hat(dim_, pattern_.user_count());
            for (int k = 0; k < pattern_.user_count(); ++k)
                g_hat.col(k).noalias() = gains_[k] * observations.col(pattern_.pilot_of(k));
            return g_hat;
        }

        const std::vector<CMatrix> &error_covs() const { return error_covs_; }
        const std::vector<CMatrix> &obs_covs() const { return obs_covs_; }
        const CMatrix &gain(int user) const { return gains_.at(user); }
        const HermitianSolver &obs_solver(int pilot) const { return solvers_.at(pilot); }
        const PilotPattern &pattern() const { return pattern_; }

        CMatrix error_cov_sum() const { return sum_of(error_covs_, dim_); }

    private:
        PilotPattern pattern_;
        Eigen::Index dim_ = 0;
        std::vector<CMatrix> obs_covs_;
        std::vector<HermitianSolver> solvers_;
        std::vector<CMatrix> gains_;
        std::vector<CMatrix> error_covs_;
    };

    inline TrainingOutput mmse_estimate(const CMatrix &observations, const PilotPattern &pattern,
                                        std::span<const CMatrix> covariances, const PilotConfig &config)
    {
        const MmseEstimator estimator(pattern, covariances, config);
        return {observations, estimator.estimate(observations), estimator.error_covs(), estimator.obs_covs()};
    }

    // E[g~_i g~_j^H] = -R_i C_{pi_i}^{-1} R_j if i and j share a pilot, else 0.
    inline CMatrix cross_error_covariance(int i, int j, const PilotPattern &pattern,
                                          std::span<const CMatrix> covariances, const PilotConfig &config)
    {
        detail::check_pattern(pattern, covariances, config);
        if (i == j)
            throw DomainError("cross_error_covariance: i == j, use the error covariance instead");
        if (i < 0 || j < 0 || i >= pattern.user_count() || j >= pattern.user_count())
            throw DomainError("cross_error_covariance: user index out of range");
        const auto m = covariances.front().rows();
        if (!pattern.shares_pilot(i, j))
            return CMatrix::Zero(m, m);
        const HermitianSolver solver(obs_covariance(pattern, covariances, config, pattern.pilot_of(i)));
        return -covariances[i] * solver.solve(covariances[j]);
    }

    // Sum of traces of the error covariances.
    inline double mse_ce(const PilotPattern &pattern, std::span<const CMatrix> covariances, const PilotConfig &config)
    {
        detail::check_pattern(pattern, covariances, config);
        double total = 0.0;
        for (int p = 0; p < pattern.pilot_count(); ++p)
        {
            const auto members = pattern.group(p);
            if (members.empty())
                continue;
            const HermitianSolver solver(obs_covariance(pattern, covariances, config, p));
            for (int k : members)
            {
                const CMatrix &r = covariances[k];
                total += r.trace().real() - trace_product_real(r, solver.solve(r));
            }
        }
        return total;
    }

    // Error covariance of user k when it is alone on its pilot.
    inline CMatrix interference_free_error_cov(const CMatrix &r, const PilotConfig &config)
    {
        const HermitianSolver solver(r + identity(r.rows()) * config.noise_variance());
        return hermitian_part(r - r * solver.solve(r));
    }

    inline double mse_ce_minimum(std::span<const CMatrix> covariances, const PilotConfig &config)
    {
        config.validate();
        double total = 0.0;
        for (const auto &r : covariances)
            total += interference_free_error_cov(r, config).trace().real();
        return total;
    }
}
