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

#include <vector>

namespace mimo_lab
{
    // Linear receiver: detected symbols are W^T y.
    struct UplinkReceiver
    {
        CMatrix w;
    };

    // Linear precoder B with the common receive scaling alpha applied by the users.
    struct DownlinkPrecoder
    {
        CMatrix b;
        double alpha = 0.0;
        double gamma = 0.0;
    };

    namespace detail
    {
        inline void check_snr(double snr)
        {
            if (!(snr > 0.0) || !std::isfinite(snr))
                throw DomainError("SNR must be positive and finite");
        }

        inline void check_block(const CMatrix &estimates, const CMatrix &error_cov_sum)
        {
            if (error_cov_sum.rows() != estimates.rows() || error_cov_sum.cols() != estimates.rows())
                throw DomainError("error covariance sum does not match the channel dimension");
            if (!estimates.allFinite() || !error_cov_sum.allFinite())
                throw NumericError("non-finite channel estimate or error covariance");
        }

        // [(G G^H + E + I/rho)^{-1} G]^*, via one Cholesky solve.
        inline CMatrix mmse_filter(const CMatrix &estimates, const CMatrix &error_cov_sum, double snr)
        {
            check_snr(snr);
            check_block(estimates, error_cov_sum);
            CMatrix a = estimates * estimates.adjoint() + error_cov_sum;
            a.diagonal().array() += 1.0 / snr;
            return HermitianSolver(a).solve(estimates).conjugate();
        }
    }

    // Sum of the error covariances plus I / rho.
    inline CMatrix effective_noise_covariance(std::span<const CMatrix> error_covs, double snr, Eigen::Index dim)
    {
        detail::check_snr(snr);
        CMatrix r = sum_of(error_covs, dim);
        r.diagonal().array() += 1.0 / snr;
        return r;
    }

    inline UplinkReceiver robust_ul_receiver(const CMatrix &estimates, const CMatrix &error_cov_sum, double ul_snr)
    {
        return {detail::mmse_filter(estimates, error_cov_sum, ul_snr)};
    }

    inline UplinkReceiver robust_ul_receiver(const CMatrix &estimates, std::span<const CMatrix> error_covs,
                                             double ul_snr)
    {
        return robust_ul_receiver(estimates, sum_of(error_covs, estimates.rows()), ul_snr);
    }

    // Treats the estimates as the true channels.
    inline UplinkReceiver conventional_receiver(const CMatrix &estimates, double ul_snr)
    {
        const auto m = estimates.rows();
        return {detail::mmse_filter(estimates, CMatrix::Zero(m, m), ul_snr)};
    }

    /// UL detection MSE of an arbitrary receiver:
    /// tr{ W^T (G G^H + E + I/rho) W^* + I - W^T G - G^H W^* }.
    inline double analytic_mse_ul(const CMatrix &w, const CMatrix &estimates, const CMatrix &error_cov_sum,
                                  double ul_snr)
    {
        detail::check_snr(ul_snr);
        detail::check_block(estimates, error_cov_sum);
        if (w.rows() != estimates.rows() || w.cols() != estimates.cols())
            throw DomainError("analytic_mse_ul: receiver shape does not match the estimates");
        const CMatrix u = w.conjugate();
        const double k = static_cast<double>(estimates.cols());
        const double signal = (estimates.adjoint() * u).squaredNorm();
        const double error = (u.adjoint() * (error_cov_sum * u)).trace().real();
        const double noise = u.squaredNorm() / ul_snr;
        const double cross = 2.0 * (u.adjoint() * estimates).trace().real();
        return std::max(0.0, signal + error + noise + k - cross);
    }

    inline double analytic_mse_ul(const CMatrix &w, const CMatrix &estimates, std::span<const CMatrix> error_covs,
                                  double ul_snr)
    {
        return analytic_mse_ul(w, estimates, sum_of(error_covs, estimates.rows()), ul_snr);
    }

    // tr{ (I + G^H (E + I/rho)^{-1} G)^{-1} }
    inline double mmse_sd_closed_form(const CMatrix &estimates, const CMatrix &error_cov_sum, double snr)
    {
        detail::check_snr(snr);
        detail::check_block(estimates, error_cov_sum);
        CMatrix noise = error_cov_sum;
        noise.diagonal().array() += 1.0 / snr;
        const CMatrix gram = estimates.adjoint() * HermitianSolver(noise).solve(estimates);
        CMatrix inner = hermitian_part(gram);
        inner.diagonal().array() += 1.0;
        return HermitianSolver(inner).inverse().trace().real();
    }

    inline double mmse_sd_closed_form(const CMatrix &estimates, std::span<const CMatrix> error_covs, double snr)
    {
        return mmse_sd_closed_form(estimates, sum_of(error_covs, estimates.rows()), snr);
    }

    /// Robust MMSE precoder B = W_opt / gamma with tr(B B^H) = K, alpha = gamma.
    inline DownlinkPrecoder robust_dl_precoder(const CMatrix &estimates, const CMatrix &error_cov_sum, double dl_snr)
    {
        if (estimates.size() == 0 || estimates.cwiseAbs().maxCoeff() == 0.0)
            throw DegenerateInput("robust_dl_precoder: all-zero channel estimate, power scaling undefined");
        const CMatrix filter = detail::mmse_filter(estimates, error_cov_sum, dl_snr);
        const double k = static_cast<double>(estimates.cols());
        const double gamma = std::sqrt(filter.squaredNorm() / k);
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw NumericError("robust_dl_precoder: invalid power scaling");
        return {filter / gamma, gamma, gamma};
    }

    inline DownlinkPrecoder robust_dl_precoder(const CMatrix &estimates, std::span<const CMatrix> error_covs,
                                               double dl_snr)
    {
        return robust_dl_precoder(estimates, sum_of(error_covs, estimates.rows()), dl_snr);
    }

    /// DL detection MSE of an arbitrary precoder and scaling:
    /// tr{ a^2 B^H (G^* G^T + E^*) B - a G^T B - a B^H G^* } + (a^2 / rho + 1) K.
    inline double analytic_mse_dl(const CMatrix &b, double alpha, const CMatrix &estimates,
                                  const CMatrix &error_cov_sum, double dl_snr)
    {
        detail::check_snr(dl_snr);
        detail::check_block(estimates, error_cov_sum);
        if (b.rows() != estimates.rows() || b.cols() != estimates.cols())
            throw DomainError("analytic_mse_dl: precoder shape does not match the estimates");
        const double k = static_cast<double>(estimates.cols());
        const CMatrix effective = estimates.transpose() * b;
        const double signal = effective.squaredNorm();
        const double error = (b.adjoint() * (error_cov_sum.conjugate() * b)).trace().real();
        const double cross = 2.0 * effective.trace().real();
        const double value = alpha * alpha * (signal + error) - alpha * cross + (alpha * alpha / dl_snr + 1.0) * k;
        return std::max(0.0, value);
    }

    inline double analytic_mse_dl(const CMatrix &b, double alpha, const CMatrix &estimates,
                                  std::span<const CMatrix> error_covs, double dl_snr)
    {
        return analytic_mse_dl(b, alpha, estimates, sum_of(error_covs, estimates.rows()), dl_snr);
    }

    /// Effective noise E + I/rho factored once, for evaluating many blocks that
    /// share the same error statistics.
    ///
    /// receiver() uses the push-through identity
    /// (G G^H + Q)^{-1} G = Q^{-1} G (I + G^H Q^{-1} G)^{-1},
    /// which needs only K x K factorizations per block.
    class EffectiveNoise
    {
    public:
        EffectiveNoise(const CMatrix &error_cov_sum, double snr) : snr_(snr)
        {
            detail::check_snr(snr);
            matrix_ = error_cov_sum;
            matrix_.diagonal().array() += 1.0 / snr;
            solver_ = HermitianSolver(matrix_);
        }

        const CMatrix &matrix() const { return matrix_; }
        const HermitianSolver &solver() const { return solver_; }
        double snr() const { return snr_; }

        struct BlockDesign
        {
            CMatrix whitened;   // Q^{-1} G
            CMatrix inner_inv;  // (I + G^H Q^{-1} G)^{-1}
        };

        BlockDesign design(const CMatrix &estimates) const
        {
            BlockDesign d;
            d.whitened = solver_.solve(estimates);
            CMatrix inner = hermitian_part(estimates.adjoint() * d.whitened);
            inner.diagonal().array() += 1.0;
            d.inner_inv = HermitianSolver(inner).inverse();
            return d;
        }

        double mmse(const CMatrix &estimates) const { return design(estimates).inner_inv.trace().real(); }

        UplinkReceiver receiver(const CMatrix &estimates) const
        {
            const auto d = design(estimates);
            return {(d.whitened * d.inner_inv).conjugate()};
        }

    private:
        CMatrix matrix_;
        HermitianSolver solver_;
        double snr_ = 1.0;
    };
}
