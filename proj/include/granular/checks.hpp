#pragma once

#include <cstdint>
#include <vector>

namespace granular {

/// Randomised property suite over collide / precollide / dissipation in
/// d in {1, 2, 3}. Errors are relative to the momentum scale of each case.
struct CollisionCheckReport {
    std::size_t cases = 0;
    double momentum_error = 0.0;
    double restitution_error = 0.0;
    double roundtrip_error = 0.0;
    double dissipation_error = 0.0;
    bool passed = false;
};

CollisionCheckReport collision_property_suite(std::size_t cases, std::uint64_t seed);

struct CumulantCheckReport {
    std::vector<long long> coefficient_sums; // cumulant orders 2..6
    std::size_t independent_cases = 0;
    double independent_max = 0.0; // max |A_{1+n} b| over separated configurations, n in {1, 2}
    std::size_t identity_cases = 0;
    double identity_error = 0.0; // V_2 against its nested composition
    bool passed = false;
};

CumulantCheckReport cumulant_property_suite(std::size_t cases, std::uint64_t seed);

} // namespace granular
