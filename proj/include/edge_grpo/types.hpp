#pragma once

#include <cstdint>
#include <vector>

namespace edge_grpo {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// One next-token probability vector per position, each of length V.
using DistributionSeq = std::vector<std::vector<double>>;

}  // namespace edge_grpo
