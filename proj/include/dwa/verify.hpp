#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dwa/align.hpp"
#include "dwa/model.hpp"

namespace dwa {

// Every match vector satisfying the alignment-path rules, by direct
// enumeration of the increment sequences. Exhaustive range only.
std::vector<std::vector<int>> enumerate_paths(std::size_t weight_len, std::size_t window_len);

struct BruteForceDtw {
    double cost = 0.0;
    std::vector<std::vector<int>> argmin;
};

// Exact minimum over every enumerated path; the independent check for align().
BruteForceDtw brute_force_dtw(const Matrix& weights, const Matrix& window);

struct GradGroupReport {
    std::string name;
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::size_t worst_index = 0;
    bool pass = true;
};

struct GradReport {
    std::vector<GradGroupReport> groups;
    double h = 1e-5;
    double threshold = 1e-4;
    bool freeze_alignment = true;

    bool pass() const;
    std::string to_delimited() const;
};

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double relative_error(double analytic, double numeric);

struct FdHooks {
    // Test-only mutation of the analytic gradients before comparison.
    std::function<void(ModelGrads&)> mutate_grads;
};

// Central-difference check of every parameter against the analytic backward
// pass. With freeze_alignment the perturbed passes reuse the unperturbed
// forward's match sets; without it the report is informational, since path
// switches make the loss piecewise.
GradReport finite_diff_check(ModelState& model, const std::vector<Matrix>& batch,
                             const std::vector<int>& labels, double h, double threshold,
                             bool freeze_alignment, const FdHooks* hooks = nullptr);

}  // namespace dwa
