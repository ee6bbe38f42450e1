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

#include "errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace mimo_lab
{
    using cd = std::complex<double>;
    using CMatrix = Eigen::MatrixXcd;
    using CVector = Eigen::VectorXcd;
    using RVector = Eigen::VectorXd;

    inline constexpr double pi = std::numbers::pi;

    inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

    inline CMatrix identity(Eigen::Index n) { return CMatrix::Identity(n, n); }

    // (A + A^H) / 2
    inline CMatrix hermitian_part(const CMatrix &a)
    {
        return (a + a.adjoint()) * 0.5;
    }

    inline bool all_finite(const CMatrix &a)
    {
        return a.allFinite();
    }

    inline double hermitian_deviation(const CMatrix &a)
    {
        if (a.size() == 0)
            return 0.0;
        return (a - a.adjoint()).cwiseAbs().maxCoeff();
    }

    inline RVector hermitian_eigenvalues(const CMatrix &a)
    {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a), Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    inline double min_eigenvalue(const CMatrix &a)
    {
        return hermitian_eigenvalues(a).minCoeff();
    }

    // Real part of tr(A B) without forming the product.
    inline double trace_product_real(const CMatrix &a, const CMatrix &b)
    {
        return (a.transpose().cwiseProduct(b)).sum().real();
    }

    inline CMatrix sum_of(std::span<const CMatrix> mats, Eigen::Index dim)
    {
        CMatrix s = CMatrix::Zero(dim, dim);
        for (const auto &m : mats)
            s += m;
        return s;
    }

    // Result of the PSD repair: repaired matrix and the smallest eigenvalue before clamping.
    struct PsdRepair
    {
        CMatrix matrix;
        double min_eigenvalue_before = 0.0;
        double max_eigenvalue = 0.0;
    };

    // Symmetrize, then clamp negative eigenvalues to zero.
    inline PsdRepair psd_repair(const CMatrix &a)
    {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
        RVector lambda = es.eigenvalues();
        PsdRepair out;
        out.min_eigenvalue_before = lambda.size() ? lambda.minCoeff() : 0.0;
        out.max_eigenvalue = lambda.size() ? lambda.maxCoeff() : 0.0;
        if (out.min_eigenvalue_before >= 0.0)
        {
            out.matrix = hermitian_part(a);
            return out;
        }
        lambda = lambda.cwiseMax(0.0);
        const CMatrix &u = es.eigenvectors();
        out.matrix = hermitian_part(u * lambda.asDiagonal() * u.adjoint());
        return out;
    }

    /// Hermitian square root with negative eigenvalues clamped to zero.
    /// Eigenvalues at roundoff level (below dim * eps * largest) are treated as zero,
    /// so a rank-deficient input yields a root of the same rank.
    inline CMatrix psd_sqrt(const CMatrix &a)
    {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
        RVector lambda = es.eigenvalues();
        const double cutoff = lambda.size() ? std::max(0.0, lambda.maxCoeff()) * static_cast<double>(lambda.size()) *
                                                  std::numeric_limits<double>::epsilon()
                                            : 0.0;
        RVector s = lambda.unaryExpr([cutoff](double x) { return x > cutoff ? std::sqrt(x) : 0.0; });
        const CMatrix &u = es.eigenvectors();
        return u * s.asDiagonal() * u.adjoint();
    }

    /// Linear solver for Hermitian positive definite systems.
    ///
    /// Uses a Cholesky factorization. When the factorization fails (borderline
    /// matrices from quadrature noise), falls back to an eigendecomposition with
    /// eigenvalues floored at 1e-12.
    class HermitianSolver
    {
    public:
        static constexpr double eigenvalue_floor = 1e-12;

        HermitianSolver() = default;

        explicit HermitianSolver(const CMatrix &a)
        {
            if (a.rows() != a.cols())
                throw DomainError("HermitianSolver: matrix is not square");
            if (!a.allFinite())
                throw NumericError("HermitianSolver: non-finite matrix");
            llt_.compute(a);
            if (llt_.info() != Eigen::Success || !cholesky_usable())
            {
                Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
                if (es.info() != Eigen::Success)
                    throw NumericError("HermitianSolver: eigendecomposition failed");
                fallback_vectors_ = es.eigenvectors();
                fallback_inverse_values_ = es.eigenvalues().cwiseMax(eigenvalue_floor).cwiseInverse();
                use_fallback_ = true;
            }
            dim_ = a.rows();
        }

        Eigen::Index dim() const { return dim_; }
        bool used_fallback() const { return use_fallback_; }

        template <typename Derived>
        CMatrix solve(const Eigen::MatrixBase<Derived> &rhs) const
        {
            if (rhs.rows() != dim_)
                throw DomainError("HermitianSolver: right-hand side has wrong row count");
            if (use_fallback_)
                return fallback_vectors_ * (fallback_inverse_values_.asDiagonal() * (fallback_vectors_.adjoint() * rhs));
            return llt_.solve(rhs);
        }

        CMatrix inverse() const
        {
            return hermitian_part(solve(CMatrix::Identity(dim_, dim_)));
        }

    private:
        bool cholesky_usable() const
        {
            const auto d = llt_.matrixLLT().diagonal().real();
            return d.allFinite() && d.minCoeff() > 0.0;
        }

        Eigen::LLT<CMatrix> llt_;
        CMatrix fallback_vectors_;
        RVector fallback_inverse_values_;
        bool use_fallback_ = false;
        Eigen::Index dim_ = 0;
    };
}
