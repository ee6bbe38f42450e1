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

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace mimo_lab
{
    // Worker count: MIMO_LAB_THREADS if set to a positive integer, else the hardware concurrency.
    inline unsigned worker_count()
    {
        unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        if (const char *env = std::getenv("MIMO_LAB_THREADS"))
        {
            try
            {
                const long v = std::stol(env);
                if (v > 0)
                    return static_cast<unsigned>(std::min<long>(v, 256));
            }
            catch (const std::exception &)
            {
            }
        }
        return hw;
    }

    /// Evaluates fn(0..n-1) on up to worker_count() threads and returns the results
    /// in index order. The first exception (by index) is rethrown.
    template <typename Fn>
    auto parallel_map(std::size_t n, Fn &&fn) -> std::vector<std::invoke_result_t<Fn &, std::size_t>>
    {
        using Result = std::invoke_result_t<Fn &, std::size_t>;
        std::vector<Result> results(n);
        const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
        if (threads <= 1)
        {
            for (std::size_t i = 0; i < n; ++i)
                results[i] = fn(i);
            return results;
        }

        std::vector<std::exception_ptr> errors(n);
        std::atomic<std::size_t> next{0};
        auto work = [&]
        {
            for (std::size_t i = next++; i < n; i = next++)
            {
                try
                {
                    results[i] = fn(i);
                }
                catch (...)
                {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(work);
        for (auto &t : pool)
            t.join();
        for (auto &e : errors)
            if (e)
                std::rethrow_exception(e);
        return results;
    }
}
