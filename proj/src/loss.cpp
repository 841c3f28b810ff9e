#include "dac/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>

#include "dac/errors.hpp"
#include "dac/kernels.hpp"

namespace dac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Logits are unconstrained reals, so a non-finite value can only be the
// product of an upstream numeric failure -- report it as one so training
// loops can halt cleanly.
void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(what) + ": non-finite logit");
        }
    }
}

/// Shared log-space quantities for one logit row.
struct LogitView {
    double log_s;        // log sum exp(a - mx)
    double s;            // sum exp(a - mx)
    double mx;           // max logit
    double p_abst;       // P
    double one_minus_p;  // 1 - P = S_real / S, computed without cancellation
    double log_1mp;      // log(1 - P)
};

LogitView analyze_logits(std::span<const double> a) {
    const std::size_t w = a.size();
    const double mx = *std::max_element(a.begin(), a.end());
    double s_real = 0.0;
    for (std::size_t m = 0; m + 1 < w; ++m) s_real += std::exp(a[m] - mx);
    const double e_abst = std::exp(a[w - 1] - mx);
    const double s = s_real + e_abst;
    LogitView lv;
    lv.mx = mx;
    lv.log_s = std::log(s);
    lv.s = s;
    lv.p_abst = e_abst / s;
    lv.one_minus_p = s_real / s;
    if (lv.one_minus_p < kAbstentionEps) {
        throw SaturationError("abstention mass reached 1 within tolerance");
    }
    lv.log_1mp = std::log(s_real) - lv.log_s;
    return lv;
}

}  // namespace

void validate_probs(std::span<const double> probs) {
    if (probs.size() < 3) {
        throw InvalidInputError("probability vector needs k >= 2 classes plus abstention");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
            throw InvalidInputError("probability component outside [0, 1]");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbSumTol) {
        throw InvalidInputError("probabilities do not sum to 1");
    }
}

void validate_target_and_alpha(std::size_t n_outputs, std::int64_t true_class, double alpha) {
    if (true_class < 0 || static_cast<std::size_t>(true_class) + 1 >= n_outputs) {
        throw InvalidTargetError("true class must index a real class, not the abstention output");
    }
    if (!std::isfinite(alpha) || alpha < 0.0) {
        throw InvalidInputError("alpha must be finite and non-negative");
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw InvalidInputError("softmax: empty input");
    check_finite(logits, "softmax");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        s += p[i];
    }
    for (double& x : p) x /= s;
    return p;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    std::vector<std::exception_ptr> errs(logits.rows());
    auto body = [&](std::size_t i) {
        try {
            auto p = softmax(logits.row(i));
            std::copy(p.begin(), p.end(), out.row(i).begin());
        } catch (...) {
            errs[i] = std::current_exception();
        }
    };
    if (kernels::parallel_enabled()) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(logits.rows()); ++i) {
            body(static_cast<std::size_t>(i));
        }
    } else {
        for (std::size_t i = 0; i < logits.rows(); ++i) body(i);
    }
    for (auto& e : errs) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

double dac_loss(std::span<const double> probs, std::int64_t true_class, double alpha) {
    validate_probs(probs);
    validate_target_and_alpha(probs.size(), true_class, alpha);
    const double p_abst = probs.back();
    const double one_minus_p = 1.0 - p_abst;
    if (one_minus_p < kAbstentionEps) {
        throw SaturationError("abstention mass reached 1 within tolerance");
    }
    const double pj = probs[static_cast<std::size_t>(true_class)];
    if (pj == 0.0) return kInf;
    return one_minus_p * (std::log(one_minus_p) - std::log(pj)) - alpha * std::log(one_minus_p);
}

double dac_loss_from_logits(std::span<const double> logits, std::int64_t true_class, double alpha) {
    if (logits.size() < 3) throw InvalidInputError("need k >= 2 classes plus abstention");
    check_finite(logits, "dac_loss");
    validate_target_and_alpha(logits.size(), true_class, alpha);
    const LogitView lv = analyze_logits(logits);
    const double log_pj = (logits[static_cast<std::size_t>(true_class)] - lv.mx) - lv.log_s;
    const double true_ce = lv.log_1mp - log_pj;  // -log(p_j / (1-P)), >= 0
    return lv.one_minus_p * true_ce - alpha * lv.log_1mp;
}

SampleEval dac_loss_grad(std::span<const double> logits, std::int64_t true_class, double alpha,
                         std::span<double> grad) {
    const std::size_t w = logits.size();
    if (w < 3) throw InvalidInputError("need k >= 2 classes plus abstention");
    if (grad.size() != w) throw InvalidInputError("gradient span has wrong length");
    check_finite(logits, "dac_loss_grad");
    validate_target_and_alpha(w, true_class, alpha);

    const LogitView lv = analyze_logits(logits);
    const std::size_t j = static_cast<std::size_t>(true_class);
    const double p_abst = lv.p_abst;
    const double one_minus_p = lv.one_minus_p;
    const double log_pj = (logits[j] - lv.mx) - lv.log_s;
    const double true_ce = lv.log_1mp - log_pj;

    // For real classes m:
    //   dL/da_m = P * p_m * (true_ce + 1 - alpha/(1-P)) - (1-P) * ([m == j] - p_m)
    // For the abstention output:
    //   dL/da_abst = P * (alpha - (1-P) * true_ce)
    // Both follow from differentiating L through the softmax; true_ce stays
    // finite in log space even when p_j underflows, and p_m = 0 kills the
    // first term exactly, which realizes the continuous extension at p_j = 0.
    const double shared = true_ce + 1.0 - alpha / one_minus_p;
    for (std::size_t m = 0; m + 1 < w; ++m) {
        const double p_m = std::exp(logits[m] - lv.mx) / lv.s;
        const double indicator = (m == j) ? 1.0 : 0.0;
        grad[m] = p_abst * p_m * shared - one_minus_p * (indicator - p_m);
    }
    grad[w - 1] = p_abst * (alpha - one_minus_p * true_ce);

    SampleEval ev;
    ev.loss = one_minus_p * true_ce - alpha * lv.log_1mp;
    ev.abst_mass = p_abst;
    ev.true_ce = true_ce;
    return ev;
}

double true_class_grad(std::span<const double> probs, std::int64_t true_class, double alpha) {
    validate_probs(probs);
    validate_target_and_alpha(probs.size(), true_class, alpha);
    const double p_abst = probs.back();
    const double one_minus_p = 1.0 - p_abst;
    if (one_minus_p < kAbstentionEps) {
        throw SaturationError("abstention mass reached 1 within tolerance");
    }
    const double pj = probs[static_cast<std::size_t>(true_class)];
    // p_j * log((1-P)/p_j) extended continuously to 0 at p_j = 0.
    const double entropy_term = (pj == 0.0) ? 0.0 : pj * std::log(one_minus_p / pj);
    return -(1.0 - pj - p_abst) + p_abst * entropy_term - alpha * p_abst * pj / one_minus_p;
}

double abstention_grad(std::span<const double> probs, std::int64_t true_class, double alpha) {
    validate_probs(probs);
    validate_target_and_alpha(probs.size(), true_class, alpha);
    const double p_abst = probs.back();
    if (p_abst == 0.0) return 0.0;
    const double one_minus_p = 1.0 - p_abst;
    if (one_minus_p < kAbstentionEps) {
        throw SaturationError("abstention mass reached 1 within tolerance");
    }
    const double pj = probs[static_cast<std::size_t>(true_class)];
    const double log_ratio = (pj == 0.0) ? -kInf : std::log(pj / one_minus_p);
    return p_abst * (alpha + one_minus_p * log_ratio);
}

double alpha_threshold(std::span<const double> probs, std::int64_t true_class) {
    validate_probs(probs);
    // alpha itself plays no role here; reuse the target validation with 0.
    validate_target_and_alpha(probs.size(), true_class, 0.0);
    const double p_abst = probs.back();
    const double one_minus_p = 1.0 - p_abst;
    const double pj = probs[static_cast<std::size_t>(true_class)];
    if (pj == 0.0) return kInf;
    if (one_minus_p <= 0.0) return 0.0;
    return one_minus_p * (std::log(one_minus_p) - std::log(pj));
}

std::vector<double> normalized_true_probs(std::span<const double> probs) {
    validate_probs(probs);
    const double one_minus_p = 1.0 - probs.back();
    if (one_minus_p < kAbstentionEps) {
        throw SaturationError("abstention mass reached 1 within tolerance");
    }
    std::vector<double> out(probs.size() - 1);
    for (std::size_t m = 0; m + 1 < probs.size(); ++m) out[m] = probs[m] / one_minus_p;
    return out;
}

namespace {

template <typename RowFn>
void run_rows(std::size_t n, std::vector<std::exception_ptr>& errs, RowFn&& fn) {
    if (kernels::parallel_enabled()) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
            try {
                fn(static_cast<std::size_t>(i));
            } catch (...) {
                errs[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    }
    for (auto& e : errs) {
        if (e) std::rethrow_exception(e);
    }
}

BatchEval reduce_means(const std::vector<SampleEval>& evals) {
    // Accumulated serially in sample order so the result does not depend on
    // the thread count.
    BatchEval b;
    for (const SampleEval& ev : evals) {
        b.mean_loss += ev.loss;
        b.mean_abst_mass += ev.abst_mass;
        b.mean_true_ce += ev.true_ce;
    }
    const double n = static_cast<double>(evals.size());
    b.mean_loss /= n;
    b.mean_abst_mass /= n;
    b.mean_true_ce /= n;
    return b;
}

}  // namespace

BatchEval dac_batch_grad(const Matrix& logits, std::span<const std::int32_t> labels, double alpha,
                         Matrix& grad_out) {
    const std::size_t n = logits.rows();
    if (n == 0) throw InvalidInputError("dac_batch_grad: empty batch");
    if (labels.size() != n) throw InvalidInputError("dac_batch_grad: label count mismatch");
    grad_out = Matrix(n, logits.cols());
    std::vector<SampleEval> evals(n);
    std::vector<std::exception_ptr> errs(n);
    const double dn = static_cast<double>(n);
    run_rows(n, errs, [&](std::size_t i) {
        evals[i] = dac_loss_grad(logits.row(i), labels[i], alpha, grad_out.row(i));
        for (double& g : grad_out.row(i)) g /= dn;
    });
    return reduce_means(evals);
}

BatchEval dac_batch_eval(const Matrix& logits, std::span<const std::int32_t> labels) {
    const std::size_t n = logits.rows();
    if (n == 0) throw InvalidInputError("dac_batch_eval: empty batch");
    if (labels.size() != n) throw InvalidInputError("dac_batch_eval: label count mismatch");
    std::vector<SampleEval> evals(n);
    std::vector<std::exception_ptr> errs(n);
    run_rows(n, errs, [&](std::size_t i) {
        auto a = logits.row(i);
        if (a.size() < 3) throw InvalidInputError("need k >= 2 classes plus abstention");
        check_finite(a, "dac_batch_eval");
        validate_target_and_alpha(a.size(), labels[i], 0.0);
        const LogitView lv = analyze_logits(a);
        const double log_pj = (a[static_cast<std::size_t>(labels[i])] - lv.mx) - lv.log_s;
        SampleEval ev;
        ev.abst_mass = lv.p_abst;
        ev.true_ce = lv.log_1mp - log_pj;
        ev.loss = lv.one_minus_p * ev.true_ce;
        evals[i] = ev;
    });
    return reduce_means(evals);
}

BatchEval ce_batch_grad(const Matrix& logits, std::span<const std::int32_t> labels,
                        Matrix& grad_out) {
    const std::size_t n = logits.rows();
    const std::size_t w = logits.cols();
    if (n == 0) throw InvalidInputError("ce_batch_grad: empty batch");
    if (w < 2) throw InvalidInputError("ce_batch_grad: need at least two outputs");
    if (labels.size() != n) throw InvalidInputError("ce_batch_grad: label count mismatch");
    grad_out = Matrix(n, w);
    std::vector<SampleEval> evals(n);
    std::vector<std::exception_ptr> errs(n);
    const double dn = static_cast<double>(n);
    run_rows(n, errs, [&](std::size_t i) {
        auto a = logits.row(i);
        check_finite(a, "ce_batch_grad");
        const std::int32_t label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= w) {
            throw InvalidTargetError("ce_batch_grad: label out of range");
        }
        const double mx = *std::max_element(a.begin(), a.end());
        double s = 0.0;
        for (double x : a) s += std::exp(x - mx);
        const double log_s = std::log(s);
        auto g = grad_out.row(i);
        for (std::size_t m = 0; m < w; ++m) {
            const double p_m = std::exp(a[m] - mx) / s;
            g[m] = (p_m - ((static_cast<std::size_t>(label) == m) ? 1.0 : 0.0)) / dn;
        }
        SampleEval ev;
        ev.loss = log_s - (a[static_cast<std::size_t>(label)] - mx);
        ev.abst_mass = 0.0;
        ev.true_ce = ev.loss;
        evals[i] = ev;
    });
    return reduce_means(evals);
}

}  // namespace dac
