#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dac/matrix.hpp"

namespace dac {

/// Loss for training a k-class classifier with an extra abstention output.
///
/// Outputs are indexed 0..k: indices 0..k-1 are the real classes, index k is
/// the abstention class. For a sample with true class j and softmax
/// probabilities p (abstention mass P = p[k]):
///
///     L = (1 - P) * (-log(p_j / (1 - P))) + alpha * log(1 / (1 - P))
///
/// At P = 0 this is exactly the standard cross entropy; alpha prices
/// abstention. Gradient evaluation works in log space from the logits, so
/// losses and gradients stay finite even when p_j underflows to zero in
/// probability space.

/// Abstention mass this close to 1 makes the loss meaningless; evaluation
/// refuses with a SaturationError instead of emitting infinities.
inline constexpr double kAbstentionEps = 1e-12;

/// Probability vectors must sum to 1 within this tolerance.
inline constexpr double kProbSumTol = 1e-9;

/// Throws InvalidInputError unless probs has >= 3 entries, every component is
/// finite and in [0, 1], and the components sum to 1 within kProbSumTol.
void validate_probs(std::span<const double> probs);

/// Throws InvalidTargetError unless 0 <= true_class < k (the abstention index
/// k is not a legal target), and InvalidInputError for a negative or
/// non-finite alpha.
void validate_target_and_alpha(std::size_t n_outputs, std::int64_t true_class, double alpha);

/// Numerically stable softmax (max-subtracted). Throws on non-finite logits.
std::vector<double> softmax(std::span<const double> logits);

/// Row-wise softmax of a logits matrix.
Matrix softmax_rows(const Matrix& logits);

/// Loss evaluated from a probability vector. Returns +infinity when p_j = 0
/// exactly (the log-space path below never produces that for finite logits).
double dac_loss(std::span<const double> probs, std::int64_t true_class, double alpha);

/// Loss evaluated from logits in log space.
double dac_loss_from_logits(std::span<const double> logits, std::int64_t true_class, double alpha);

/// Per-sample quantities produced alongside the gradient.
struct SampleEval {
    double loss = 0.0;
    double abst_mass = 0.0;  // P = p[k]
    double true_ce = 0.0;    // -log(p_j / (1 - P)), the renormalized cross entropy
};

/// Gradient of the loss with respect to the logits; fills grad (size k+1) and
/// returns the per-sample evaluation. All components are finite whenever the
/// abstention mass is below 1 - kAbstentionEps, and they sum to zero.
SampleEval dac_loss_grad(std::span<const double> logits, std::int64_t true_class, double alpha,
                         std::span<double> grad);

/// Closed-form gradient component for the true-class logit, evaluated from
/// probabilities. The p_j * log((1-P)/p_j) term is continuously extended to 0
/// at p_j = 0. Kept as an independent cross-check of dac_loss_grad.
double true_class_grad(std::span<const double> probs, std::int64_t true_class, double alpha);

/// Closed-form gradient component for the abstention logit:
/// P * (alpha + (1-P) * log(p_j / (1-P))). Cross-check of dac_loss_grad.
double abstention_grad(std::span<const double> probs, std::int64_t true_class, double alpha);

/// The alpha value at which the abstention-logit gradient changes sign:
/// (1 - P) * (-log(p_j / (1 - P))). Below this threshold the gradient pushes
/// abstention mass up. Returns +infinity when p_j = 0.
double alpha_threshold(std::span<const double> probs, std::int64_t true_class);

/// Probabilities over the k real classes renormalized by 1 - P.
std::vector<double> normalized_true_probs(std::span<const double> probs);

/// Batch means accumulated in row order (thread-count independent).
struct BatchEval {
    double mean_loss = 0.0;
    double mean_abst_mass = 0.0;
    double mean_true_ce = 0.0;
};

/// Gradient of the mean abstention loss over a batch of logit rows. grad_out
/// is resized to match logits; row i receives d(mean loss)/d(logits row i).
/// Honors kernels::set_parallel; serial and parallel results are bit-identical.
BatchEval dac_batch_grad(const Matrix& logits, std::span<const std::int32_t> labels, double alpha,
                         Matrix& grad_out);

/// Same contract for the plain softmax cross entropy over however many
/// outputs the logits carry (used for warm-up and for k-class baselines).
/// mean_abst_mass and mean_true_ce are 0 and the plain CE respectively.
BatchEval ce_batch_grad(const Matrix& logits, std::span<const std::int32_t> labels,
                        Matrix& grad_out);

/// Batch means of the abstention mass and the renormalized cross entropy,
/// without gradients (the warm-up diagnostics feeding the alpha schedule).
/// mean_loss is the alpha = 0 abstention loss.
BatchEval dac_batch_eval(const Matrix& logits, std::span<const std::int32_t> labels);

}  // namespace dac
