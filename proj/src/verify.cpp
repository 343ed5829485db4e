#include "dwa/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dwa {

namespace {

constexpr std::size_t kEnumerationLimit = 12;

void extend_path(std::vector<int>& prefix, bool last_was_repeat, std::size_t weight_len,
                 std::size_t window_len, std::vector<std::vector<int>>& out) {
    if (prefix.size() == weight_len) {
        if (prefix.back() == static_cast<int>(window_len) - 1) out.push_back(prefix);
        return;
    }
    for (int step = 0; step <= 2; ++step) {
        if (step == 0 && last_was_repeat) continue;
        int next = prefix.back() + step;
        if (next > static_cast<int>(window_len) - 1) break;
        prefix.push_back(next);
        extend_path(prefix, step == 0, weight_len, window_len, out);
        prefix.pop_back();
    }
}

}  // namespace

std::vector<std::vector<int>> enumerate_paths(std::size_t weight_len, std::size_t window_len) {
    if (weight_len == 0 || window_len == 0) {
        throw std::invalid_argument("enumerate_paths: lengths must be positive");
    }
    if (weight_len > kEnumerationLimit || window_len > kEnumerationLimit) {
        throw std::invalid_argument("enumerate_paths: exhaustive range is 1.." +
                                    std::to_string(kEnumerationLimit));
    }
    std::vector<std::vector<int>> out;
    std::vector<int> prefix{0};
    if (weight_len == 1) {
        if (window_len == 1) out.push_back(prefix);
        return out;
    }
    extend_path(prefix, false, weight_len, window_len, out);
    return out;
}

BruteForceDtw brute_force_dtw(const Matrix& weights, const Matrix& window) {
    if (weights.cols() != window.cols()) {
        throw std::invalid_argument("brute_force_dtw: feature dim mismatch " +
                                    weights.shape_str() + " vs " + window.shape_str());
    }
    if (!weights.all_finite() || !window.all_finite()) {
        throw std::domain_error("brute_force_dtw: non-finite input");
    }
    auto paths = enumerate_paths(weights.rows(), window.rows());
    if (paths.empty()) {
        throw std::invalid_argument("brute_force_dtw: no feasible path for " +
                                    weights.shape_str() + " vs " + window.shape_str());
    }

    BruteForceDtw result;
    bool first = true;
    for (const auto& matched : paths) {
        double cost = 0.0;
        for (std::size_t i = 0; i < matched.size(); ++i) {
            cost += local_distance(weights, i, window, static_cast<std::size_t>(matched[i]));
        }
        if (first || cost < result.cost) {
            result.cost = cost;
            result.argmin.clear();
            first = false;
        }
        if (cost == result.cost) result.argmin.push_back(matched);
    }
    return result;
}

bool GradReport::pass() const {
    for (const auto& g : groups) {
        if (!g.pass) return false;
    }
    return true;
}

std::string GradReport::to_delimited() const {
    std::ostringstream os;
    os << "group\tmax_rel\tmax_abs\tworst_index\tstatus\n";
    os.precision(6);
    os << std::scientific;
    for (const auto& g : groups) {
        os << g.name << '\t' << g.max_rel << '\t' << g.max_abs << '\t' << g.worst_index << '\t'
           << (g.pass ? "pass" : "FAIL") << '\n';
    }
    return os.str();
}

double relative_error(double analytic, double numeric) {
    double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

GradReport finite_diff_check(ModelState& model, const std::vector<Matrix>& batch,
                             const std::vector<int>& labels, double h, double threshold,
                             bool freeze_alignment, const FdHooks* hooks) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be positive");

    GradReport report;
    report.h = h;
    report.threshold = threshold;
    report.freeze_alignment = freeze_alignment;

    // Analytic gradients from one unperturbed round. Loss evaluations leave
    // the running statistics untouched so the function being differentiated
    // is exactly the one the perturbations probe.
    ForwardOptions base_opts;
    base_opts.use_batch_stats = true;
    base_opts.update_running = false;
    ModelTrace trace;
    model_forward(batch, model, base_opts, &trace);
    double base_loss = 0.0;
    ModelGrads grads = model_backward(batch, model, trace, labels, &base_loss);
    if (hooks && hooks->mutate_grads) hooks->mutate_grads(grads);

    // Central differences cannot resolve gradients below the rounding noise
    // of the two loss evaluations, about one ulp of the loss spread over 2h.
    // Parameters whose true gradient is exactly zero exist here (conv biases
    // are normalized away by batch norm), so differences inside that
    // resolution count as agreement.
    const double noise_tol = 64.0 * std::numeric_limits<double>::epsilon() *
                             std::max(1.0, std::fabs(base_loss)) / (2.0 * h);

    FrozenAlignments frozen;
    frozen.conv1 = trace.conv1_traces;
    frozen.conv2 = trace.conv2_traces;

    ForwardOptions probe_opts;
    probe_opts.use_batch_stats = true;
    probe_opts.update_running = false;
    if (freeze_alignment && model.geom.mode == ConvMode::Dwa) probe_opts.frozen = &frozen;

    auto loss_at = [&]() {
        Matrix logits = model_forward(batch, model, probe_opts, nullptr);
        double loss = batch_loss(logits, labels, nullptr);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("finite_diff_check: non-finite loss during perturbation");
        }
        return loss;
    };

    std::vector<ParamGroup> params = param_groups(model);
    std::vector<ParamGroup> analytic = grad_groups(grads);

    for (std::size_t gi = 0; gi < params.size(); ++gi) {
        GradGroupReport group;
        group.name = params[gi].name;
        for (std::size_t k = 0; k < params[gi].values.size(); ++k) {
            double* p = params[gi].values[k];
            const double saved = *p;
            *p = saved + h;
            double plus = loss_at();
            *p = saved - h;
            double minus = loss_at();
            *p = saved;
            double numeric = (plus - minus) / (2.0 * h);
            double a = *analytic[gi].values[k];
            double abs = std::fabs(a - numeric);
            double rel = abs <= noise_tol ? 0.0 : relative_error(a, numeric);
            if (rel > group.max_rel) {
                group.max_rel = rel;
                group.worst_index = k;
            }
            group.max_abs = std::max(group.max_abs, abs);
        }
        group.pass = group.max_rel <= threshold;
        report.groups.push_back(std::move(group));
    }
    return report;
}

}  // namespace dwa
