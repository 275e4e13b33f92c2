#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cardioforge/common.hpp"
#include "cardioforge/tensor.hpp"

namespace cftest {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t n_probed = 0;
    std::string worst;
};

// Compares analytic gradients against central finite differences. loss_fn must
// rebuild the graph from the store's current parameter values on every call.
// max_probes_per_param == 0 probes every element; otherwise a random subset.
inline GradCheckResult check_gradients(
    cardioforge::tensor::ParamStore& ps,
    const std::function<cardioforge::tensor::Tensor()>& loss_fn,
    double h = 1e-5, std::size_t max_probes_per_param = 0,
    cardioforge::Rng* probe_rng = nullptr) {
    namespace ts = cardioforge::tensor;

    ps.zero_grad();
    ts::Tensor loss = loss_fn();
    ts::backward(loss);

    GradCheckResult res;
    for (const auto& name : ps.names()) {
        ts::Tensor p = ps.get(name);
        std::vector<std::size_t> probes;
        if (max_probes_per_param == 0 || p->size() <= max_probes_per_param) {
            probes.resize(p->size());
            for (std::size_t i = 0; i < p->size(); ++i) probes[i] = i;
        } else {
            for (std::size_t k = 0; k < max_probes_per_param; ++k) {
                probes.push_back(static_cast<std::size_t>(probe_rng->below(p->size())));
            }
        }
        for (std::size_t i : probes) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            const double up = loss_fn()->value[0];
            p->value[i] = orig - h;
            const double down = loss_fn()->value[0];
            p->value[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p->grad[i];
            const double denom =
                std::max(1e-6, std::abs(numeric) + std::abs(analytic));
            const double rel = std::abs(numeric - analytic) / denom;
            ++res.n_probed;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace cftest
