#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "storyalign/trainer.hpp"

namespace storyalign {

/// Finite-difference comparison of one training objective over random batches.
struct ObjectiveGradCheck {
  std::string name;
  std::size_t batches = 0;
  std::size_t evaluations = 0;
  double max_rel_error = 0.0;
  std::string worst_parameter;
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t batches = 20;
  double step = 1e-4;
};

/// Random batch of base embeddings and a matching random model for `objective`.
/// Every parameter is perturbed away from its initial value.
struct GradCheckCase {
  BatchInputs batch;
  Model model;
  TrainConfig config;
  PcmeNoise noise;
};
GradCheckCase make_gradcheck_case(Objective objective, std::mt19937_64& rng);

/// Runs the checks for InfoNCE, MIL-NCE, the probabilistic soft contrastive loss and MIL-SIM.
/// Gradients are taken with respect to every model parameter, log-temperature included.
std::vector<ObjectiveGradCheck> run_gradcheck(const GradCheckOptions& opts);

}  // namespace storyalign
