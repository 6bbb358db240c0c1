#pragma once

#include <cstdint>
#include <vector>

#include "bhsrs/layers.hpp"

namespace bhsrs {

// Connection salience, lowest first across all conv and dense weights:
// point-estimate networks rank by |w|, variational ones by the
// signal-to-noise ratio |mu| / sigma. Biases and normalization parameters
// are never pruned.
std::vector<double> prune_scores(const Network& net);

// Zero out the weakest `fraction` of the prunable weights, in place.
// Point-estimate weights become 0; variational weights get mu = 0 and a
// rho so strongly negative that sigma is exactly 0, so the connection
// neither fires nor carries noise. Returns the number of weights removed.
// Weights already removed score 0 and are removed again first, so repeated
// calls with growing fractions are cumulative.
int64_t prune_network(Network& net, double fraction);

// Total prunable weight count.
int64_t prunable_count(const Network& net);

}  // namespace bhsrs
