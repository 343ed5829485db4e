#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dwa/core.hpp"

namespace dwa {

// Match set produced by the asymmetric DTW between a filter's weight rows
// and a window of the input. Every weight row i is paired with exactly one
// window row matched[i] (0-based). The window indices are non-decreasing,
// start at 0, end at J-1, advance by 0, 1 or 2 per step, and never repeat
// twice in a row.
struct AlignmentPath {
    std::vector<int> matched;
    double cost = 0.0;

    std::vector<std::pair<int, int>> pairs() const;
};

// Structural check for a candidate match vector against the rules above.
bool valid_match_vector(const std::vector<int>& matched, std::size_t weight_len,
                        std::size_t window_len);

// Geometry admitted by the asymmetric slope constraint: the global warp
// slope must stay within [1/2, 2], so J in [ceil((I+1)/2), 2I-1] for I > 1
// and J == 1 for I == 1.
bool itakura_feasible(std::size_t weight_len, std::size_t window_len);

// Euclidean distance between row ai of a and row bi of b.
double local_distance(const Matrix& a, std::size_t ai, const Matrix& b, std::size_t bi);

// Minimum-cost alignment of the weight rows onto the window rows, with the
// path recovered by backtracking. Ties prefer the diagonal predecessor,
// then the two-step skip, then the repeat, so equal-cost alignments
// degenerate to the linear (diagonal) matching.
AlignmentPath align(const Matrix& weights, const Matrix& window);

// Alignment cost only; identical arithmetic to align().cost.
double dtw_distance(const Matrix& weights, const Matrix& window);

}  // namespace dwa
