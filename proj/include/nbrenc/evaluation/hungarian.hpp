#pragma once

#include "nbrenc/matrix.hpp"

#include <cstddef>
#include <vector>

namespace nbrenc::evaluation {

// Minimum-cost one-to-one assignment on a square cost matrix. Returns the
// column assigned to each row. Among optimal permutations the
// lexicographically smallest one is returned.
std::vector<std::size_t> hungarian(const Matrix<double>& cost);

// Minimum total cost only (no tie-breaking pass).
double hungarian_min_cost(const Matrix<double>& cost);

double assignment_cost(const Matrix<double>& cost, const std::vector<std::size_t>& perm);

}  // namespace nbrenc::evaluation
