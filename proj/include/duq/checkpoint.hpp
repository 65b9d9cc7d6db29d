#pragma once

#include <string>

#include "duq/dual.hpp"

namespace duq {

// Versioned text checkpoint: every tensor in hex float (%a), so round-trips
// are bit-exact. One file holds both networks, the shared normalization and
// the config hash.
void save_checkpoint(const DualModel& model, const std::string& path);
DualModel load_checkpoint(const std::string& path);

}  // namespace duq
