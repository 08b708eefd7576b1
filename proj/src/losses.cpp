#include "asm2tv/losses.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "asm2tv/format.hpp"

namespace asm2tv {

UncertaintyParams UncertaintyParams::zeros(std::size_t tasks) {
    return {Tensor::zeros({tasks}, true), Tensor::zeros({tasks}, true)};
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.rows() != labels.size()) throw ShapeError("cross_entropy: one label per row required");
    return neg(mean(pick(log_softmax(logits), labels)));
}

Tensor supervised_loss(const Tensor& fusion_logits, const std::vector<Tensor>& view_logits,
                       std::span<const int> labels) {
    Tensor loss = cross_entropy(fusion_logits, labels);
    if (view_logits.empty()) return loss;
    std::vector<Tensor> views;
    for (const auto& v : view_logits) views.push_back(cross_entropy(v, labels));
    Tensor view_sum = views[0];
    for (std::size_t v = 1; v < views.size(); ++v) view_sum = add(view_sum, views[v]);
    return add(loss, scale(view_sum, 1.0 / static_cast<double>(views.size())));
}

Tensor fusion_regularizer(const std::vector<std::vector<Tensor>>& view_probs, const std::vector<Tensor>& fusion_probs) {
    if (view_probs.size() != fusion_probs.size() || view_probs.empty())
        throw ShapeError("fusion_regularizer: need one view list per task");
    Tensor total;
    for (std::size_t t = 0; t < view_probs.size(); ++t) {
        const double inv_v = 1.0 / static_cast<double>(view_probs[t].size());
        for (const auto& p : view_probs[t]) {
            if (p.shape() != fusion_probs[t].shape())
                throw ShapeError("fusion_regularizer: view probs " + shape_str(p.shape()) + " vs fusion probs " +
                                 shape_str(fusion_probs[t].shape()));
            Tensor term = scale(mean(l2_norm(sub(p, fusion_probs[t]))), inv_v);
            total = total.defined() ? add(total, term) : term;
        }
    }
    return total;
}

Tensor kl_divergence(const Tensor& p, const Tensor& q) {
    return mean(kl_rows(p, q));
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeError("kl_divergence: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw std::domain_error("kl_divergence: negative probability");
        if (p[i] > 0.0) s += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kProbFloor)));
    }
    return s;
}

GcaLoss gca_loss(const std::vector<GcaTaskDistributions>& tasks, const UncertaintyParams& params, double margin) {
    if (tasks.size() != params.tasks()) throw ShapeError("gca_loss: uncertainty params do not match task count");
    if (!(margin > 0.0)) throw std::invalid_argument("gca_loss: margin must be positive");
    Tensor consistency, discrimination;
    auto accumulate = [](Tensor& acc, const Tensor& term) { acc = acc.defined() ? add(acc, term) : term; };
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto& d = tasks[t];
        if (d.internal.empty()) throw std::invalid_argument("gca_loss: K must be at least 1");
        if (!d.external[0].defined() || !d.external[1].defined())
            throw std::invalid_argument("gca_loss: both external distributions are required");
        const Tensor ref = stop_gradient(d.reference);
        const Tensor alpha = element(params.alpha, t);
        const Tensor beta = element(params.beta, t);
        const Tensor w_cons = exp(neg(alpha));
        const Tensor w_disc = exp(neg(beta));
        for (const auto& q : d.internal)
            accumulate(consistency, add(mul(w_cons, kl_divergence(ref, q)), alpha));
        for (const auto& q : d.external) {
            const Tensor div = mean(minimum(kl_rows(ref, q), margin));
            accumulate(discrimination, add(neg(mul(w_disc, div)), beta));
        }
    }
    return {consistency, discrimination, add(consistency, discrimination)};
}

Tensor total_objective(const Tensor& supervised, const Tensor& fusion, const Tensor& unsupervised, double lambda,
                       double mu) {
    return add(add(supervised, scale(fusion, mu)), scale(unsupervised, lambda));
}

void write_loss_row(std::ostream& out, const LossBreakdown& r) {
    out << r.step << ',' << format_double(r.supervised) << ',' << format_double(r.fusion) << ','
        << format_double(r.consistency) << ',' << format_double(r.discrimination) << ',' << format_double(r.total)
        << ',' << format_double(r.tau) << ',' << format_double(r.alpha_mean) << ',' << format_double(r.beta_mean)
        << '\n';
}

std::string describe(const LossBreakdown& r) {
    std::ostringstream os;
    os << "step=" << r.step << " L_s=" << r.supervised << " L_f=" << r.fusion << " L_u_cons=" << r.consistency
       << " L_u_disc=" << r.discrimination << " J=" << r.total << " tau=" << r.tau << " alpha_mean=" << r.alpha_mean
       << " beta_mean=" << r.beta_mean;
    return os.str();
}

}  // namespace asm2tv
