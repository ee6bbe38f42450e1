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
// Library walk-through: build a correlated scenario, schedule pilots greedily,
// then compare detection MSE, its lower bound and the UL sum rate against
// orthogonal training.

#include "mimo_lab/simulation.hpp"

#include <cstdio>

int main()
{
    using namespace mimo_lab;

    // 64-antenna half-wavelength ULA, 8 users with 10 degree Laplacian spread.
    const std::vector<double> aoas{-0.9, -0.6, -0.3, 0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<PowerAngleSpectrum> users;
    for (double a : aoas)
        users.push_back(PowerAngleSpectrum::laplacian(a, 10.0 * pi / 180.0));
    const Scenario scenario = make_scenario(ArrayGeometry::ula(64), users);

    const int tau = 4;
    const PilotPattern pattern = sgps(scenario.covariances, tau);
    const LinkConfig link = LinkConfig::common_snr_db(10.0, tau, 20);
    std::printf("SGPS pattern %s\n", pattern.to_string().c_str());
    std::printf("MSE-CE %.4f (floor %.4f)\n", mse_ce(pattern, scenario.covariances, link.pilot_config()),
                mse_ce_minimum(scenario.covariances, link.pilot_config()));

    const std::uint64_t seed = 1;
    const Estimate mse = avg_mse_sd(scenario, pattern, link, ReceiverKind::robust, 200, seed);
    std::printf("detection MSE %.4f +- %.4f, lower bound %.4f\n", mse.mean, mse.stderr,
                mse_sd_lower_bound(pattern, scenario.covariances, link.pilot_config(), link.ul_snr));

    const Estimate reuse = ul_sum_rate(scenario, pattern, link, 200, seed);
    const BaselineResult ot = ot_baseline(scenario, link, Direction::ul, 200, seed);
    std::printf("net UL rate: pilot reuse %.2f, orthogonal training %.2f bits/s/Hz\n",
                net_spectral_efficiency(tau, link.block_length, reuse.mean), ot.net_rate.mean);
    return 0;
}
