#pragma once

#include <filesystem>
#include <iosfwd>

#include "cpr/trainer.hpp"

namespace cpr {

inline constexpr int kCheckpointVersion = 1;

// Text checkpoint: a "cpr-checkpoint <version>" header, then schedule
// position, RNG state, every encoder (live/ema/frozen) and the full bank.
// Doubles are written with 17 significant digits so a load reproduces the
// saved state bit for bit.
void write_checkpoint(std::ostream& out, const TrainerState& state);
TrainerState read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state);
TrainerState load_checkpoint(const std::filesystem::path& path);

}  // namespace cpr
