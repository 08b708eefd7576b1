#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "asm2tv/tensor.hpp"

namespace asm2tv {

/// Per-task learnable log-variances: alpha weights the consistency terms,
/// beta the discrimination terms. Both start at zero.
struct UncertaintyParams {
    Tensor alpha;
    Tensor beta;

    static UncertaintyParams zeros(std::size_t tasks);
    std::size_t tasks() const { return alpha.numel(); }
};

/// Mean over the batch of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Cross-entropy on the fusion head plus the mean cross-entropy of the view heads.
Tensor supervised_loss(const Tensor& fusion_logits, const std::vector<Tensor>& view_logits,
                       std::span<const int> labels);

/// sum_t sum_v (1/V) * mean_b || p^{t,v}_b - p^t_b ||_2 over probability rows.
/// view_probs[t][v] and fusion_probs[t] are (B_t, C_t).
Tensor fusion_regularizer(const std::vector<std::vector<Tensor>>& view_probs, const std::vector<Tensor>& fusion_probs);

/// KL(p || q) averaged over rows; q is floored at 1e-12 before the log.
Tensor kl_divergence(const Tensor& p, const Tensor& q);
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Output distributions for one task of one GCA draw batch. Each tensor is
/// (B_u, C_t) probabilities. `reference` is detached inside gca_loss.
struct GcaTaskDistributions {
    Tensor reference;
    std::vector<Tensor> internal;
    std::array<Tensor, 2> external;
};

struct GcaLoss {
    Tensor consistency;
    Tensor discrimination;
    Tensor total;
};

/// Uncertainty-weighted gathering-consistency objective:
///   sum_t sum_k [ e^{-alpha_t} KL(ref || internal_k) + alpha_t ]
/// + sum_t sum_i [ -e^{-beta_t} min(KL(ref || external_i), margin) + beta_t ]
/// with each KL averaged over the unlabeled batch (clamped per sample).
GcaLoss gca_loss(const std::vector<GcaTaskDistributions>& tasks, const UncertaintyParams& params, double margin);

/// J = supervised + mu * fusion + lambda * unsupervised.
Tensor total_objective(const Tensor& supervised, const Tensor& fusion, const Tensor& unsupervised, double lambda,
                       double mu);

struct LossBreakdown {
    std::size_t step = 0;
    double supervised = 0.0;
    double fusion = 0.0;
    double consistency = 0.0;
    double discrimination = 0.0;
    double total = 0.0;
    double tau = 0.0;
    double alpha_mean = 0.0;
    double beta_mean = 0.0;
};

inline constexpr const char* kLossCsvHeader = "step,L_s,L_f,L_u_cons,L_u_disc,J,tau,alpha_mean,beta_mean";
void write_loss_row(std::ostream& out, const LossBreakdown& row);
std::string describe(const LossBreakdown& row);

}  // namespace asm2tv
