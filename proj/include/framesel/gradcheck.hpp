#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "framesel/errors.hpp"
#include "framesel/tape.hpp"
#include "framesel/tensor.hpp"

namespace framesel {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::string worst_name;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;

    bool pass(double tol) const { return max_rel_err < tol; }
};

// Compares tape gradients against central finite differences, at 64-bit
// precision. `build` constructs the scalar loss on a fresh tape from leaves
// bound to `params` (in order); it is invoked once for the analytic gradient
// and twice per parameter element for the numeric one. Any decision that is
// not differentiable (binarized gates, keep/delete selections) must be frozen
// inside `build` so every evaluation sees the same discrete structure.
template <typename BuildFn>
inline GradCheckReport grad_check(BuildFn&& build,
                                  const std::vector<std::pair<std::string, Tensor<double>*>>& params,
                                  double h = 1e-5) {
    Tape<double> tape;

    auto eval = [&](bool want_grad, std::vector<Tensor<double>>* grads) -> double {
        tape.reset();
        std::vector<Var> leaves;
        leaves.reserve(params.size());
        for (const auto& [name, t] : params) leaves.push_back(tape.leaf(*t));
        Var loss = build(tape, leaves);
        double value = tape.scalar_value(loss);
        if (!std::isfinite(value)) throw NumericError("grad_check: non-finite loss");
        if (want_grad) {
            tape.backward(loss);
            grads->clear();
            for (Var l : leaves) grads->push_back(tape.adjoint(l));
        }
        return value;
    };

    std::vector<Tensor<double>> analytic;
    eval(true, &analytic);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<double>& tensor = *params[pi].second;
        for (std::size_t k = 0; k < tensor.size(); ++k) {
            double saved = tensor.data[k];
            tensor.data[k] = saved + h;
            double fp = eval(false, nullptr);
            tensor.data[k] = saved - h;
            double fm = eval(false, nullptr);
            tensor.data[k] = saved;

            double numeric = (fp - fm) / (2.0 * h);
            double a = analytic[pi].data[k];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_name = params[pi].first;
                report.worst_index = k;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace framesel
