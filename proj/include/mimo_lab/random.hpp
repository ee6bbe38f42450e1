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

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace mimo_lab
{
    // Stream tags keep independent random quantities of one block apart.
    enum class Stream : std::uint32_t
    {
        channel = 1,
        pilot_noise = 2,
        data = 3,
        scenario = 4,
        perturbation = 5,
        generic = 99,
    };

    /// Random source for one (seed, stream, index) triple.
    ///
    /// Every Monte Carlo block owns its generator, seeded from the experiment seed,
    /// a stream tag and the block index, so results do not depend on how blocks are
    /// distributed over worker threads.
    class BlockRng
    {
    public:
        BlockRng(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
        {
            std::seed_seq seq{
                static_cast<std::uint32_t>(seed & 0xffffffffu),
                static_cast<std::uint32_t>(seed >> 32),
                static_cast<std::uint32_t>(stream),
                static_cast<std::uint32_t>(index & 0xffffffffu),
                static_cast<std::uint32_t>(index >> 32)};
            engine_.seed(seq);
        }

        explicit BlockRng(std::uint64_t seed) : BlockRng(seed, Stream::generic, 0) {}

        // CN(0, 1): real and imaginary parts i.i.d. N(0, 1/2).
        cd complex_gaussian()
        {
            const double re = normal_(engine_);
            const double im = normal_(engine_);
            return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
        }

        CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols)
        {
            CMatrix out(rows, cols);
            for (Eigen::Index j = 0; j < cols; ++j)
                for (Eigen::Index i = 0; i < rows; ++i)
                    out(i, j) = complex_gaussian();
            return out;
        }

        double gaussian() { return normal_(engine_); }

        double uniform(double lo, double hi)
        {
            return std::uniform_real_distribution<double>(lo, hi)(engine_);
        }

        std::mt19937_64 &engine() { return engine_; }

    private:
        std::mt19937_64 engine_;
        std::normal_distribution<double> normal_{0.0, 1.0};
    };

    // Derives a child seed; used to give every sweep point its own independent seed.
    inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
    {
        std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
        auto mix = [](std::uint64_t z)
        {
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            return z ^ (z >> 31);
        };
        h = mix(h);
        for (auto p : path)
            h = mix(h ^ (p + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
        return h;
    }
}
