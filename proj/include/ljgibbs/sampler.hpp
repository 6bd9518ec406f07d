#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ljgibbs/geometry.hpp"
#include "ljgibbs/model.hpp"

namespace ljgibbs {

struct SamplerConfig {
  std::uint64_t n_steps = 0;   // proposals after burn-in; must be > 0
  std::int64_t burn_in = -1;   // proposals to discard; -1 picks the default
                               // ceil(10 * |window| * e^{-theta1})
  double p_birth = 0.4;        // birth and death probabilities must match
  double p_death = 0.4;
  double p_move = 0.2;
  double move_sigma = 0.0;     // <= 0 picks interaction range / 4
  std::uint64_t seed = 0;
  std::uint64_t trace_every = 100;  // energy trace stride; 0 disables
};

struct ChainStats {
  std::uint64_t steps = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t seed = 0;
  // Proposal and acceptance counts over the post-burn-in phase.
  std::uint64_t birth_proposed = 0, birth_accepted = 0;
  std::uint64_t death_proposed = 0, death_accepted = 0;
  std::uint64_t move_proposed = 0, move_accepted = 0;
  std::size_t final_count = 0;
  double final_energy = 0.0;             // total energy V of the final state
  std::vector<double> energy_trace;      // subsampled running total energy

  double birth_rate() const {
    return birth_proposed ? static_cast<double>(birth_accepted) / birth_proposed
                          : 0.0;
  }
  double death_rate() const {
    return death_proposed ? static_cast<double>(death_accepted) / death_proposed
                          : 0.0;
  }
  double move_rate() const {
    return move_proposed ? static_cast<double>(move_accepted) / move_proposed
                         : 0.0;
  }
};

// Birth-death-move Metropolis-Hastings chain started from the empty
// configuration, targeting the Gibbs density e^{-V(phi; theta)} relative
// to the unit-rate Poisson process on the window. Free (empty) boundary:
// points interact only within the window.
std::pair<Configuration, ChainStats> simulate(const ModelSpec& spec,
                                              const Theta& theta,
                                              const Window& window,
                                              const SamplerConfig& cfg);

}  // namespace ljgibbs
