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

#include <stdexcept>
#include <string>

namespace mimo_lab
{
    // Argument outside the mathematical domain of an operation.
    struct DomainError : std::domain_error
    {
        using std::domain_error::domain_error;
    };

    // Operation not defined for the given kind of input (e.g. density of a point mass).
    struct UnsupportedOperation : std::logic_error
    {
        using std::logic_error::logic_error;
    };

    // Non-finite or otherwise broken numerical result.
    struct NumericError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // Search space or workload larger than the configured cap.
    struct ResourceError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // Input for which the requested construction is undefined (e.g. all-zero channel estimate).
    struct DegenerateInput : std::domain_error
    {
        using std::domain_error::domain_error;
    };

    // Invalid experiment configuration.
    struct ConfigError : std::invalid_argument
    {
        using std::invalid_argument::invalid_argument;
    };
}
