#pragma once

#include <string>

#include "hybridctl/policy.hpp"

namespace hybridctl {

// JSON checkpoint of named tensors with shape headers. Values round-trip
// bit-exactly (shortest-round-trip double serialization).
//
// Layout:
//   { "format": "hybridctl-checkpoint-v1",
//     "tensors": { "<name>": { "shape": [rows, cols], "data": [ ... ] } } }
// Vector shapes are [len]; scalars are [].

void save_dyn_net(const DynNet& net, const std::string& path);
DynNet load_dyn_net(const std::string& path);

void save_reward_net(const RewardNet& net, const std::string& path);
RewardNet load_reward_net(const std::string& path);

void save_policy_net(const PolicyNet& net, const std::string& path);
PolicyNet load_policy_net(const std::string& path);

}  // namespace hybridctl
