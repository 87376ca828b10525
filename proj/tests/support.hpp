#pragma once

#include "lure/step.hpp"

#include <random>
#include <string>

namespace lure::testing {

/// A randomized step problem with a constant box carrier.
struct RandomStep {
    LureSystem sys;
    Vector x_prev;
    Vector y;
    double h = 0.1;
};

/// B = P^{-1}(C^T + E Pi) with Pi the projector onto rge(D + D^T), so the
/// kernel condition holds by construction; D = S + U X U^T with S = U U^T
/// (rank-deficient when rank < m); C has full row rank.
RandomStep random_step(std::mt19937_64& rng, int max_m = 3, bool random_storage = true);

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols);
Vector random_vector(std::mt19937_64& rng, Eigen::Index size);

/// Path of a bundled scenario, e.g. scenario_path("example_thm4").
std::string scenario_path(const std::string& name);

}  // namespace lure::testing
