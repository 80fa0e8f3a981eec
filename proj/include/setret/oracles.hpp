#pragma once

#include "setret/transport.hpp"
#include "setret/transition.hpp"

namespace setret {

// Brute-force references for the main transport code paths. Deliberately
// written as plain scalar loops on a separate code path so agreement with
// the batched implementations is meaningful evidence.

double ct_oracle(const CaptionDistribution& p, const TargetDistribution& q, double tau,
                 bool raw_sum = false);

// Exact optimal transport with uniform marginals by permutation enumeration.
// Requires K == M <= 8; raises TooLargeForExactOT otherwise.
double ot_oracle_exact(const CaptionDistribution& p, const TargetDistribution& q);

}  // namespace setret
