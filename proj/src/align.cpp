#include "dwa/align.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace dwa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// The DP carries two values per cell so the no-two-consecutive-repeats rule
// is exact:
//   A(i,j): best cost reaching (i,j) with the last window increment 1 or 2
//           (or the path start),
//   B(i,j): best cost reaching (i,j) with the last increment 0.
// A repeat step may only extend an A state.
//
// Parent codes for A states, in tie-break preference order:
//   0 = diagonal from A, 1 = diagonal from B, 2 = skip from A, 3 = skip from B.
// B states always descend from A(i-1, j).

void check_inputs(const Matrix& weights, const Matrix& window) {
    if (weights.cols() != window.cols()) {
        throw std::invalid_argument("align: feature dim mismatch " + weights.shape_str() +
                                    " vs " + window.shape_str());
    }
    if (!weights.all_finite() || !window.all_finite()) {
        throw std::domain_error("align: non-finite input");
    }
    if (!itakura_feasible(weights.rows(), window.rows())) {
        throw std::invalid_argument("align: infeasible geometry " + weights.shape_str() +
                                    " vs " + window.shape_str());
    }
}

}  // namespace

std::vector<std::pair<int, int>> AlignmentPath::pairs() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(matched.size());
    for (std::size_t i = 0; i < matched.size(); ++i) {
        out.emplace_back(static_cast<int>(i), matched[i]);
    }
    return out;
}

bool valid_match_vector(const std::vector<int>& matched, std::size_t weight_len,
                        std::size_t window_len) {
    if (matched.size() != weight_len || weight_len == 0 || window_len == 0) return false;
    if (matched.front() != 0) return false;
    if (matched.back() != static_cast<int>(window_len) - 1) return false;
    bool prev_repeat = false;
    for (std::size_t i = 1; i < matched.size(); ++i) {
        int step = matched[i] - matched[i - 1];
        if (step < 0 || step > 2) return false;
        if (step == 0) {
            if (prev_repeat) return false;
            prev_repeat = true;
        } else {
            prev_repeat = false;
        }
    }
    return true;
}

bool itakura_feasible(std::size_t weight_len, std::size_t window_len) {
    if (weight_len == 0 || window_len == 0) return false;
    if (weight_len == 1) return window_len == 1;
    return window_len >= (weight_len + 2) / 2 && window_len <= 2 * weight_len - 1;
}

double local_distance(const Matrix& a, std::size_t ai, const Matrix& b, std::size_t bi) {
    const double* pa = a.row(ai);
    const double* pb = b.row(bi);
    double acc = 0.0;
    for (std::size_t d = 0; d < a.cols(); ++d) {
        double diff = pa[d] - pb[d];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

AlignmentPath align(const Matrix& weights, const Matrix& window) {
    check_inputs(weights, window);
    const std::size_t I = weights.rows();
    const std::size_t J = window.rows();

    Matrix a(I, J, kInf), b(I, J, kInf);
    std::vector<std::uint8_t> parent_a(I * J, 255);
    a(0, 0) = local_distance(weights, 0, window, 0);

    for (std::size_t i = 1; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            double d = local_distance(weights, i, window, j);
            double best = kInf;
            std::uint8_t code = 255;
            if (j >= 1) {
                if (a(i - 1, j - 1) < best) { best = a(i - 1, j - 1); code = 0; }
                if (b(i - 1, j - 1) < best) { best = b(i - 1, j - 1); code = 1; }
            }
            if (j >= 2) {
                if (a(i - 1, j - 2) < best) { best = a(i - 1, j - 2); code = 2; }
                if (b(i - 1, j - 2) < best) { best = b(i - 1, j - 2); code = 3; }
            }
            if (code != 255) {
                a(i, j) = d + best;
                parent_a[i * J + j] = code;
            }
            if (a(i - 1, j) < kInf) {
                b(i, j) = d + a(i - 1, j);
            }
        }
    }

    bool in_a = a(I - 1, J - 1) <= b(I - 1, J - 1);
    double cost = in_a ? a(I - 1, J - 1) : b(I - 1, J - 1);
    if (!std::isfinite(cost)) {
        throw std::logic_error("align: no feasible path for " + weights.shape_str() + " vs " +
                               window.shape_str());
    }

    AlignmentPath path;
    path.cost = cost;
    path.matched.assign(I, 0);
    std::size_t i = I - 1;
    std::size_t j = J - 1;
    while (i > 0) {
        path.matched[i] = static_cast<int>(j);
        if (in_a) {
            std::uint8_t code = parent_a[i * J + j];
            j -= (code < 2) ? 1 : 2;
            in_a = (code % 2) == 0;
        } else {
            in_a = true;
        }
        --i;
    }
    path.matched[0] = static_cast<int>(j);
    return path;
}

double dtw_distance(const Matrix& weights, const Matrix& window) {
    check_inputs(weights, window);
    const std::size_t I = weights.rows();
    const std::size_t J = window.rows();

    std::vector<double> prev_a(J, kInf), prev_b(J, kInf);
    std::vector<double> cur_a(J, kInf), cur_b(J, kInf);
    prev_a[0] = local_distance(weights, 0, window, 0);

    for (std::size_t i = 1; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            double d = local_distance(weights, i, window, j);
            double best = kInf;
            if (j >= 1) {
                if (prev_a[j - 1] < best) best = prev_a[j - 1];
                if (prev_b[j - 1] < best) best = prev_b[j - 1];
            }
            if (j >= 2) {
                if (prev_a[j - 2] < best) best = prev_a[j - 2];
                if (prev_b[j - 2] < best) best = prev_b[j - 2];
            }
            cur_a[j] = (best < kInf) ? d + best : kInf;
            cur_b[j] = (prev_a[j] < kInf) ? d + prev_a[j] : kInf;
        }
        std::swap(prev_a, cur_a);
        std::swap(prev_b, cur_b);
    }

    double cost = prev_a[J - 1] <= prev_b[J - 1] ? prev_a[J - 1] : prev_b[J - 1];
    if (!std::isfinite(cost)) {
        throw std::logic_error("dtw_distance: no feasible path for " + weights.shape_str() +
                               " vs " + window.shape_str());
    }
    return cost;
}

}  // namespace dwa
