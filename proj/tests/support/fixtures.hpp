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
// Shared scenarios and test-side oracles. The oracles deliberately avoid the
// library's solvers: they use dense LU inverses, joint-Gaussian conditioning and
// plain enumeration.

#pragma once

#include "mimo_lab/channel_model.hpp"
#include "mimo_lab/pilot_training.hpp"
#include "mimo_lab/random.hpp"

#include <Eigen/LU>

#include <functional>
#include <limits>
#include <vector>

namespace fixtures
{
    using namespace mimo_lab;

    inline const std::vector<double> fig1_aoas{0.6592, 0.8499, -0.7812, 0.8658, 0.2772,
                                               -0.8429, -0.4639, 0.0982, 0.9582, 0.9737};
    inline const std::vector<int> pattern_a_labels{1, 1, 2, 2, 3, 3, 4, 4, 5, 5};
    inline const std::vector<int> pattern_b_labels{1, 2, 3, 4, 3, 5, 4, 5, 5, 3};

    inline PilotPattern pattern_a() { return PilotPattern::from_labels(pattern_a_labels, 5); }
    inline PilotPattern pattern_b() { return PilotPattern::from_labels(pattern_b_labels, 5); }

    inline double deg(double d) { return d * pi / 180.0; }

    inline Scenario laplacian_scenario(int antennas, const std::vector<double> &aoas, double spread_deg)
    {
        std::vector<PowerAngleSpectrum> users;
        for (double a : aoas)
            users.push_back(PowerAngleSpectrum::laplacian(a, deg(spread_deg)));
        return make_scenario(ArrayGeometry::ula(antennas), std::move(users));
    }

    // 128 antennas, 10 users, 10 degree spread.
    inline const Scenario &fig1_scenario()
    {
        static const Scenario s = laplacian_scenario(128, fig1_aoas, 10.0);
        return s;
    }

    inline Scenario random_sector_scenario(int antennas, int users, double spread_deg, std::uint64_t seed)
    {
        BlockRng rng(seed, Stream::scenario, 0);
        std::vector<double> aoas(users);
        for (auto &a : aoas)
            a = rng.uniform(-pi / 3, pi / 3);
        return laplacian_scenario(antennas, aoas, spread_deg);
    }

    // Unitary DFT matrix, column c = exp(-j 2 pi r c / M) / sqrt(M).
    inline CMatrix dft(int m)
    {
        CMatrix f(m, m);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c)
                f(r, c) = std::polar(1.0 / std::sqrt(static_cast<double>(m)),
                                     -2.0 * pi * static_cast<double>((static_cast<long long>(r) * c) % m) / m);
        return f;
    }

    /// Covariances with disjoint DFT supports: user k owns columns [k*width, (k+1)*width)
    /// of the DFT basis, with eigenvalues drawn from [0.2, 2] * M / width.
    inline std::vector<CMatrix> disjoint_dft_covariances(int antennas, int users, std::uint64_t seed)
    {
        const int width = antennas / users;
        const CMatrix f = dft(antennas);
        BlockRng rng(seed, Stream::generic, 0);
        std::vector<CMatrix> out;
        for (int k = 0; k < users; ++k)
        {
            const CMatrix basis = f.middleCols(k * width, width);
            Eigen::VectorXd lambda(width);
            for (int i = 0; i < width; ++i)
                lambda(i) = rng.uniform(0.2, 2.0) * antennas / width;
            out.push_back(basis * lambda.cast<cd>().asDiagonal() * basis.adjoint());
        }
        return out;
    }

    // A A^H / cols with A an M x cols standard complex Gaussian matrix.
    inline CMatrix random_psd(int m, int cols, BlockRng &rng)
    {
        const CMatrix a = rng.complex_gaussian(m, cols);
        return a * a.adjoint() / static_cast<double>(cols);
    }

    inline std::vector<CMatrix> random_psd_set(int m, int users, std::uint64_t seed, int cols = 0)
    {
        BlockRng rng(seed, Stream::generic, 1);
        std::vector<CMatrix> out;
        for (int k = 0; k < users; ++k)
            out.push_back(random_psd(m, cols > 0 ? cols : m, rng));
        return out;
    }

    inline CMatrix lu_inverse(const CMatrix &a) { return a.fullPivLu().inverse(); }

    /// Conditional mean and covariance of x given y for a zero-mean joint Gaussian with
    /// covariance [[Sxx, Sxy], [Syx, Syy]].
    struct Conditional
    {
        CMatrix gain;       // Sxy Syy^{-1}
        CMatrix covariance; // Sxx - Sxy Syy^{-1} Syx
    };

    inline Conditional condition(const CMatrix &joint, Eigen::Index x_dim)
    {
        const Eigen::Index y_dim = joint.rows() - x_dim;
        const CMatrix sxx = joint.topLeftCorner(x_dim, x_dim);
        const CMatrix sxy = joint.topRightCorner(x_dim, y_dim);
        const CMatrix syy = joint.bottomRightCorner(y_dim, y_dim);
        const CMatrix gain = sxy * lu_inverse(syy);
        return {gain, sxx - gain * sxy.adjoint()};
    }

    /// Joint covariance of (g_1, ..., g_K, y_p) for the users on pilot p: the observation
    /// is y_p = sum of the group's channels plus white noise of variance noise_var.
    inline CMatrix pilot_joint_covariance(const std::vector<CMatrix> &group_covs, double noise_var)
    {
        const Eigen::Index m = group_covs.front().rows();
        const Eigen::Index n = static_cast<Eigen::Index>(group_covs.size());
        CMatrix joint = CMatrix::Zero((n + 1) * m, (n + 1) * m);
        CMatrix syy = CMatrix::Identity(m, m) * noise_var;
        for (Eigen::Index k = 0; k < n; ++k)
        {
            joint.block(k * m, k * m, m, m) = group_covs[k];
            joint.block(k * m, n * m, m, m) = group_covs[k];
            joint.block(n * m, k * m, m, m) = group_covs[k];
            syy += group_covs[k];
        }
        joint.block(n * m, n * m, m, m) = syy;
        return joint;
    }

    // Sum of error-covariance traces via joint-Gaussian conditioning, pilot by pilot.
    inline double mse_ce_oracle(const PilotPattern &pattern, const std::vector<CMatrix> &covs, double noise_var)
    {
        double total = 0.0;
        for (int p = 0; p < pattern.pilot_count(); ++p)
        {
            std::vector<CMatrix> group;
            for (int k : pattern.group(p))
                group.push_back(covs[k]);
            if (group.empty())
                continue;
            const auto m = group.front().rows();
            const auto cond = condition(pilot_joint_covariance(group, noise_var), m * group.size());
            total += cond.covariance.trace().real();
        }
        return total;
    }

    /// Minimum of `objective` over all tau^K assignment vectors, plain nested enumeration.
    struct BruteForceResult
    {
        std::vector<int> assignment;
        double value = std::numeric_limits<double>::infinity();
        long long count = 0;
    };

    inline BruteForceResult brute_force_min(int users, int tau,
                                            const std::function<double(const PilotPattern &)> &objective)
    {
        BruteForceResult best;
        std::vector<int> a(users, 0);
        while (true)
        {
            const double v = objective(PilotPattern(a, tau));
            ++best.count;
            if (v < best.value)
            {
                best.value = v;
                best.assignment = a;
            }
            int i = users - 1;
            while (i >= 0 && ++a[i] == tau)
                a[i--] = 0;
            if (i < 0)
                break;
        }
        return best;
    }

    /// Simpson rule on [a, b] with n (even) intervals.
    template <typename F>
    auto simpson(F f, double a, double b, int n) -> decltype(f(a))
    {
        const double h = (b - a) / n;
        auto sum = f(a) + f(b);
        for (int i = 1; i < n; ++i)
            sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
        return sum * (h / 3.0);
    }

    // Relative Frobenius distance.
    inline double rel_diff(const CMatrix &a, const CMatrix &b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }
}
