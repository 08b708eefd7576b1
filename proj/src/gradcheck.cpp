#include "asm2tv/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asm2tv {

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double step) {
    return finite_diff_check([&] { return f(x); }, {x}, step);
}

double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
    for (auto& x : leaves) {
        if (!x.requires_grad() || !x.node()->is_leaf())
            throw std::invalid_argument("finite_diff_check: inputs must be requires-grad leaves");
        x.zero_grad();
    }

    const Tensor base = f();
    const double f0 = base.item();
    if (f().item() != f0) throw std::runtime_error("finite_diff_check: function is not deterministic");
    base.backward();

    double worst = 0.0;
    for (auto& x : leaves) {
        const std::vector<double> analytic(x.grad().begin(), x.grad().end());
        auto data = x.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + step;
            const double up = f().item();
            data[i] = saved - step;
            const double down = f().item();
            data[i] = saved;
            const double central = (up - down) / (2.0 * step);
            const double err = std::abs(analytic[i] - central) / (std::abs(analytic[i]) + std::abs(central) + 1e-12);
            worst = std::max(worst, err);
        }
        x.zero_grad();
    }
    return worst;
}

}  // namespace asm2tv
