#include "tsb/gradcheck.hpp"

#include <cmath>

namespace tsb {

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<std::pair<std::string, Tensor>>& leaves,
                           double h, double tol) {
    if (h <= 0.0) throw ContractError("grad_check: h must be positive");

    GradCheckReport report;
    report.tol = tol;

    for (const auto& [name, leaf] : leaves) {
        Tensor t = leaf;  // handles share the node
        t.zero_grad();
    }
    Tensor loss = f();
    if (loss.numel() != 1)
        throw ContractError("grad_check: function must be scalar-valued");
    backward(loss);

    std::vector<std::vector<double>> ad_grads;
    ad_grads.reserve(leaves.size());
    for (const auto& [name, leaf] : leaves) {
        if (leaf.grad().empty())
            ad_grads.emplace_back(static_cast<std::size_t>(leaf.numel()), 0.0);
        else
            ad_grads.push_back(leaf.grad());
    }

    NoGradGuard no_grad;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor leaf = leaves[li].second;
        auto& values = leaf.leaf_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = f().item();
            values[i] = saved - h;
            const double down = f().item();
            values[i] = saved;

            const double fd = (up - down) / (2.0 * h);
            const double ad = ad_grads[li][i];
            const double denom = std::max({1.0, std::fabs(ad), std::fabs(fd)});
            const double dev = std::fabs(ad - fd) / denom;
            if (dev > report.max_rel_dev) {
                report.max_rel_dev = dev;
                report.worst_leaf = leaves[li].first;
                report.worst_index = static_cast<std::int64_t>(i);
                report.worst_autodiff = ad;
                report.worst_central = fd;
            }
        }
    }
    report.pass = report.max_rel_dev < tol;
    return report;
}

}  // namespace tsb
