#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tsb/tensor.hpp"

namespace tsb {

struct GradCheckReport {
    bool pass = false;
    double max_rel_dev = 0.0;
    double tol = 0.0;
    std::string worst_leaf;
    std::int64_t worst_index = -1;
    double worst_autodiff = 0.0;
    double worst_central = 0.0;
};

// Compares reverse-mode gradients of a scalar-valued function against central
// finite differences over every element of every listed leaf. The function is
// re-evaluated from the leaves on each call, so it must rebuild its graph.
// Deviation is |ad - fd| / max(1, |ad|, |fd|).
GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& leaves,
                           double h = 1e-5, double tol = 1e-4);

}  // namespace tsb
