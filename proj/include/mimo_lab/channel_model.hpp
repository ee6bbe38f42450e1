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

#include "linalg.hpp"
#include "random.hpp"

#include <string>
#include <vector>

namespace mimo_lab
{
    // ---------------------------------------------------------------------------
    // Array geometry
    // ---------------------------------------------------------------------------

    /// Uniform linear array with a restricted admissible angle-of-arrival interval.
    struct ArrayGeometry
    {
        int antenna_count = 1;
        double spacing_wavelengths = 0.5;
        double theta_min = -pi / 2.0;
        double theta_max = pi / 2.0;

        static ArrayGeometry ula(int antennas, double spacing = 0.5)
        {
            ArrayGeometry g;
            g.antenna_count = antennas;
            g.spacing_wavelengths = spacing;
            return g;
        }

        void validate() const
        {
            if (antenna_count < 1)
                throw DomainError("ArrayGeometry: antenna_count must be positive");
            if (!(spacing_wavelengths > 0.0))
                throw DomainError("ArrayGeometry: spacing must be positive");
            if (!(theta_min < theta_max))
                throw DomainError("ArrayGeometry: empty angle interval");
            if (theta_min < -pi / 2.0 - 1e-15 || theta_max > pi / 2.0 + 1e-15)
                throw DomainError("ArrayGeometry: ULA angle interval must lie in [-pi/2, pi/2]");
        }

        bool contains(double theta) const { return theta >= theta_min && theta <= theta_max; }

        // Half-wavelength ULA observing the whole half plane.
        bool is_full_half_wavelength_ula() const
        {
            return std::abs(spacing_wavelengths - 0.5) < 1e-15 && std::abs(theta_min + pi / 2.0) < 1e-15 &&
                   std::abs(theta_max - pi / 2.0) < 1e-15;
        }
    };

    // Element m (0-based) equals exp(-j 2 pi d m sin(theta)).
    inline CVector array_response(const ArrayGeometry &geometry, double theta)
    {
        if (!geometry.contains(theta))
            throw DomainError("array_response: angle outside the admissible interval");
        const double phase = -2.0 * pi * geometry.spacing_wavelengths * std::sin(theta);
        CVector v(geometry.antenna_count);
        for (int m = 0; m < geometry.antenna_count; ++m)
            v(m) = std::polar(1.0, phase * m);
        return v;
    }

    // ---------------------------------------------------------------------------
    // Power angle spectrum
    // ---------------------------------------------------------------------------

    enum class PasKind
    {
        truncated_laplacian,
        point_mass,
        uniform,
    };

    /// Angular power density of one user's channel.
    ///
    /// - truncated_laplacian: Laplacian with standard deviation `angular_spread`, truncated
    ///   to [mean - pi, mean + pi] and renormalized there.
    /// - uniform: constant density on [mean - angular_spread, mean + angular_spread].
    /// - point_mass: single path at `mean_aoa`; only its covariance is defined.
    struct PowerAngleSpectrum
    {
        PasKind kind = PasKind::truncated_laplacian;
        double mean_aoa = 0.0;
        double angular_spread = 0.1;
        double large_scale_gain = 1.0;

        static PowerAngleSpectrum laplacian(double mean, double spread, double beta = 1.0)
        {
            return {PasKind::truncated_laplacian, mean, spread, beta};
        }
        static PowerAngleSpectrum uniform(double mean, double half_width, double beta = 1.0)
        {
            return {PasKind::uniform, mean, half_width, beta};
        }
        static PowerAngleSpectrum point_mass(double mean, double beta = 1.0)
        {
            return {PasKind::point_mass, mean, 0.0, beta};
        }

        void validate() const
        {
            if (!(large_scale_gain > 0.0))
                throw DomainError("PowerAngleSpectrum: large_scale_gain must be positive");
            if (kind != PasKind::point_mass && !(angular_spread > 0.0))
                throw DomainError("PowerAngleSpectrum: angular_spread must be positive");
        }

        double support_min() const
        {
            return kind == PasKind::uniform ? mean_aoa - angular_spread : mean_aoa - pi;
        }
        double support_max() const
        {
            return kind == PasKind::uniform ? mean_aoa + angular_spread : mean_aoa + pi;
        }
    };

    inline double pas_density(const PowerAngleSpectrum &pas, double theta)
    {
        switch (pas.kind)
        {
        case PasKind::point_mass:
            throw UnsupportedOperation("pas_density: a point mass has no density");
        case PasKind::uniform:
            if (theta < pas.support_min() || theta > pas.support_max())
                return 0.0;
            return 1.0 / (2.0 * pas.angular_spread);
        case PasKind::truncated_laplacian:
        {
            const double s = pas.angular_spread;
            const double x = std::abs(theta - pas.mean_aoa);
            if (x > pi)
                return 0.0;
            const double norm = 1.0 / (std::numbers::sqrt2 * s * (1.0 - std::exp(-std::numbers::sqrt2 * pi / s)));
            return norm * std::exp(-std::numbers::sqrt2 * x / s);
        }
        }
        throw UnsupportedOperation("pas_density: unknown kind");
    }

    // Closed-form integral of the density over [lo, hi].
    inline double pas_mass(const PowerAngleSpectrum &pas, double lo, double hi)
    {
        if (hi <= lo)
            return 0.0;
        switch (pas.kind)
        {
        case PasKind::point_mass:
            return (pas.mean_aoa >= lo && pas.mean_aoa <= hi) ? 1.0 : 0.0;
        case PasKind::uniform:
        {
            const double a = std::max(lo, pas.support_min());
            const double b = std::min(hi, pas.support_max());
            return b > a ? (b - a) / (2.0 * pas.angular_spread) : 0.0;
        }
        case PasKind::truncated_laplacian:
        {
            const double s = pas.angular_spread;
            const double k = std::numbers::sqrt2 / s;
            const double total = 1.0 - std::exp(-k * pi);
            // Antiderivative of the density in x = theta - mean, centred at 0.
            auto cdf = [&](double x)
            {
                x = std::clamp(x, -pi, pi);
                const double half = 0.5 * (1.0 - std::exp(-k * std::abs(x))) / total;
                return x >= 0 ? half : -half;
            };
            return cdf(hi - pas.mean_aoa) - cdf(lo - pas.mean_aoa);
        }
        }
        return 0.0;
    }

    // ---------------------------------------------------------------------------
    // Covariance matrices
    // ---------------------------------------------------------------------------

    enum class CovarianceSource
    {
        exact_quadrature,
        asymptotic_dft,
        empirical,
    };

    struct ChannelCovariance
    {
        CMatrix matrix;
        CovarianceSource source = CovarianceSource::exact_quadrature;
        // Smallest eigenvalue before the PSD repair (0 when no repair happened).
        double min_eigenvalue_before_repair = 0.0;
        double max_eigenvalue = 0.0;
    };

    // Default point count for the angular quadrature: dense enough for the
    // narrowest spreads and for the highest spatial frequency of the array.
    inline int default_quadrature_points(int antennas)
    {
        return std::max(2048, 16 * antennas);
    }

    /// Midpoint-rule nodes and weights over [lo, hi], with panel breaks at the
    /// given interior points so that kinks of the integrand sit on panel edges.
    struct QuadratureRule
    {
        std::vector<double> nodes;
        std::vector<double> weights;
    };

    inline QuadratureRule midpoint_rule(double lo, double hi, int points, std::vector<double> breaks = {},
                                        int min_per_panel = 1)
    {
        std::vector<double> edges{lo};
        std::sort(breaks.begin(), breaks.end());
        for (double b : breaks)
            if (b > lo && b < hi)
                edges.push_back(b);
        edges.push_back(hi);

        const double length = hi - lo;
        const int panels = static_cast<int>(edges.size()) - 1;
        QuadratureRule rule;
        rule.nodes.reserve(points + panels * min_per_panel);
        rule.weights.reserve(points + panels * min_per_panel);
        for (int p = 0; p < panels; ++p)
        {
            const double a = edges[p], b = edges[p + 1];
            const int n = std::max(min_per_panel, static_cast<int>(std::lround(points * (b - a) / length)));
            const double h = (b - a) / n;
            for (int i = 0; i < n; ++i)
            {
                rule.nodes.push_back(a + (i + 0.5) * h);
                rule.weights.push_back(h);
            }
        }
        return rule;
    }

    /// Covariance R = beta * integral over the admissible interval of v v^H S dtheta.
    ///
    /// For the ULA the matrix is Toeplitz, so only its first column is integrated.
    /// The result is symmetrized and negative eigenvalues are clamped to zero.
    /// `quadrature_points <= 0` selects default_quadrature_points().
    inline ChannelCovariance covariance_exact(const ArrayGeometry &geometry, const PowerAngleSpectrum &pas,
                                              int quadrature_points = 0)
    {
        geometry.validate();
        pas.validate();
        const int m = geometry.antenna_count;
        if (quadrature_points <= 0)
            quadrature_points = default_quadrature_points(m);
        if (quadrature_points < 64)
            throw DomainError("covariance_exact: at least 64 quadrature points are required");

        ChannelCovariance out;
        out.source = CovarianceSource::exact_quadrature;

        if (pas.kind == PasKind::point_mass)
        {
            if (!geometry.contains(pas.mean_aoa))
            {
                out.matrix = CMatrix::Zero(m, m);
                return out;
            }
            const CVector v = array_response(geometry, pas.mean_aoa);
            out.matrix = pas.large_scale_gain * v * v.adjoint();
            out.max_eigenvalue = pas.large_scale_gain * m;
            return out;
        }

        // Panels graded geometrically towards the Laplacian kink resolve arbitrarily small spreads.
        std::vector<double> breaks{pas.mean_aoa, pas.support_min(), pas.support_max()};
        if (pas.kind == PasKind::truncated_laplacian)
            for (double scale = pas.angular_spread / 16.0; scale < 64.0 * pas.angular_spread; scale *= 2.0)
            {
                breaks.push_back(pas.mean_aoa - scale);
                breaks.push_back(pas.mean_aoa + scale);
            }
        const auto rule = midpoint_rule(geometry.theta_min, geometry.theta_max, quadrature_points, breaks, 16);
        CVector first_column = CVector::Zero(m);
        for (std::size_t n = 0; n < rule.nodes.size(); ++n)
        {
            const double weight = rule.weights[n] * pas_density(pas, rule.nodes[n]);
            if (weight == 0.0)
                continue;
            const double phase = -2.0 * pi * geometry.spacing_wavelengths * std::sin(rule.nodes[n]);
            for (int d = 0; d < m; ++d)
                first_column(d) += weight * std::polar(1.0, phase * d);
        }
        first_column *= pas.large_scale_gain;
        if (!first_column.allFinite())
            throw NumericError("covariance_exact: non-finite quadrature result");

        // R(i, j) = E[g_i conj(g_j)] depends on i - j only.
        CMatrix r(m, m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i)
                r(i, j) = i >= j ? first_column(i - j) : std::conj(first_column(j - i));

        auto repaired = psd_repair(r);
        out.matrix = std::move(repaired.matrix);
        out.min_eigenvalue_before_repair = repaired.min_eigenvalue_before;
        out.max_eigenvalue = repaired.max_eigenvalue;
        return out;
    }

    /// Large-array decomposition R ~ V diag(r) V^H for the half-wavelength ULA on [-pi/2, pi/2].
    struct AsymptoticCovariance
    {
        CMatrix eigvec_matrix;
        RVector eigval_vector;

        CMatrix reconstruct() const
        {
            return eigvec_matrix * eigval_vector.cast<cd>().asDiagonal() * eigvec_matrix.adjoint();
        }
    };

    // Angle grid theta_m = arcsin(2 m / M - 1), m = 0..M.
    inline std::vector<double> arcsin_grid(int antennas)
    {
        std::vector<double> grid(antennas + 1);
        for (int m = 0; m <= antennas; ++m)
            grid[m] = std::asin(std::clamp(2.0 * m / antennas - 1.0, -1.0, 1.0));
        return grid;
    }

    inline AsymptoticCovariance covariance_asymptotic(const ArrayGeometry &geometry, const PowerAngleSpectrum &pas)
    {
        geometry.validate();
        pas.validate();
        if (!geometry.is_full_half_wavelength_ula())
            throw UnsupportedOperation(
                "covariance_asymptotic: only the half-wavelength ULA on [-pi/2, pi/2] is supported");
        if (pas.kind == PasKind::point_mass)
            throw UnsupportedOperation("covariance_asymptotic: a point mass has no density");

        const int m = geometry.antenna_count;
        const auto grid = arcsin_grid(m);

        AsymptoticCovariance out;
        out.eigvec_matrix.resize(m, m);
        const double scale = 1.0 / std::sqrt(static_cast<double>(m));
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < m; ++i)
            {
                // exp(-j 2 pi i (j - M/2) / M), reduced mod M to keep the phase small.
                const long long num = static_cast<long long>(i) * (2LL * j - m);
                const long long red = ((num % (2LL * m)) + 2LL * m) % (2LL * m);
                out.eigvec_matrix(i, j) = scale * std::polar(1.0, -pi * static_cast<double>(red) / m);
            }

        out.eigval_vector.resize(m);
        for (int k = 0; k < m; ++k)
            out.eigval_vector(k) = pas.large_scale_gain * m * pas_density(pas, grid[k]) * (grid[k + 1] - grid[k]);
        return out;
    }

    // ---------------------------------------------------------------------------
    // Scenario and channel sampling
    // ---------------------------------------------------------------------------

    struct Scenario
    {
        ArrayGeometry geometry;
        std::vector<PowerAngleSpectrum> users;
        std::vector<CMatrix> covariances;

        int user_count() const { return static_cast<int>(covariances.size()); }
        int antenna_count() const { return geometry.antenna_count; }

        void validate() const
        {
            geometry.validate();
            if (covariances.empty())
                throw DomainError("Scenario: at least one user is required");
            if (!users.empty() && users.size() != covariances.size())
                throw DomainError("Scenario: users and covariances disagree in count");
            for (const auto &r : covariances)
                if (r.rows() != geometry.antenna_count || r.cols() != geometry.antenna_count)
                    throw DomainError("Scenario: covariance dimension does not match the array");
        }

        // First `count` users only.
        Scenario leading_users(int count) const
        {
            Scenario s{geometry, {}, {}};
            for (int k = 0; k < count && k < user_count(); ++k)
            {
                if (!users.empty())
                    s.users.push_back(users[k]);
                s.covariances.push_back(covariances[k]);
            }
            return s;
        }
    };

    inline Scenario make_scenario(const ArrayGeometry &geometry, std::vector<PowerAngleSpectrum> users,
                                  int quadrature_points = 0)
    {
        Scenario s{geometry, std::move(users), {}};
        s.covariances.reserve(s.users.size());
        for (const auto &u : s.users)
            s.covariances.push_back(covariance_exact(geometry, u, quadrature_points).matrix);
        s.validate();
        return s;
    }

    /// Draws G = [R_1^{1/2} w_1, ..., R_K^{1/2} w_K] with w_k ~ CN(0, I).
    class ChannelSampler
    {
    public:
        ChannelSampler() = default;

        explicit ChannelSampler(std::span<const CMatrix> covariances)
        {
            roots_.reserve(covariances.size());
            for (const auto &r : covariances)
                roots_.push_back(psd_sqrt(r));
        }

        CMatrix draw(BlockRng &rng) const
        {
            const Eigen::Index m = roots_.empty() ? 0 : roots_.front().rows();
            const Eigen::Index k = static_cast<Eigen::Index>(roots_.size());
            const CMatrix w = rng.complex_gaussian(m, k);
            CMatrix g(m, k);
            for (Eigen::Index j = 0; j < k; ++j)
                g.col(j).noalias() = roots_[j] * w.col(j);
            return g;
        }

        const CMatrix &root(int user) const { return roots_.at(user); }

    private:
        std::vector<CMatrix> roots_;
    };

    inline CMatrix sample_channels(const Scenario &scenario, std::uint64_t seed)
    {
        scenario.validate();
        BlockRng rng(seed, Stream::channel, 0);
        return ChannelSampler(scenario.covariances).draw(rng);
    }

    // ---------------------------------------------------------------------------
    // Matrix angle and empirical covariance
    // ---------------------------------------------------------------------------

    // tr(AB) / (|A|_F |B|_F), clamped to [0, 1].
    inline double matrix_cosine(const CMatrix &a, const CMatrix &b)
    {
        const double na = a.norm(), nb = b.norm();
        if (na == 0.0 || nb == 0.0)
            throw DomainError("matrix_angle: zero matrix");
        return std::clamp(trace_product_real(a, b) / (na * nb), 0.0, 1.0);
    }

    inline double matrix_angle(const CMatrix &a, const CMatrix &b)
    {
        return std::acos(matrix_cosine(a, b));
    }

    inline ChannelCovariance empirical_covariance(const CMatrix &samples_as_columns)
    {
        if (samples_as_columns.cols() < 2)
            throw DomainError("empirical_covariance: at least two samples are required");
        const double n = static_cast<double>(samples_as_columns.cols());
        ChannelCovariance out;
        out.source = CovarianceSource::empirical;
        out.matrix = hermitian_part(samples_as_columns * samples_as_columns.adjoint() / n);
        return out;
    }

    inline ChannelCovariance empirical_covariance(const std::vector<CVector> &samples)
    {
        if (samples.size() < 2)
            throw DomainError("empirical_covariance: at least two samples are required");
        CMatrix columns(samples.front().size(), static_cast<Eigen::Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i)
        {
            if (samples[i].size() != columns.rows())
                throw DomainError("empirical_covariance: samples differ in length");
            columns.col(static_cast<Eigen::Index>(i)) = samples[i];
        }
        return empirical_covariance(columns);
    }
}
