#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "knowsr/errors.hpp"
#include "knowsr/tensor.hpp"

namespace knowsr::nn {

/// Row-wise tempered softmax q_i = exp(a_i/T) / sum_j exp(a_j/T), computed
/// with max subtraction so large logits cannot overflow.
inline Tensor2 softmax_with_temperature(const Tensor2& logits, double temperature) {
    if (temperature <= 0.0)
        throw ParameterError("softmax_with_temperature: T must be > 0, got " + std::to_string(temperature));
    if (logits.cols == 0 || logits.rows == 0)
        throw DimensionError("softmax_with_temperature: empty input");
    if (!logits.all_finite())
        throw NumericError("softmax_with_temperature: non-finite logits");
    Tensor2 out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* in = logits.row_ptr(i);
        double* q = out.row_ptr(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < logits.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            q[j] = std::exp((in[j] - mx) / temperature);
            sum += q[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) q[j] /= sum;
    }
    return out;
}

/// KL(p || q) = sum_i p_i log(p_i / q_i) over one probability row.
/// Terms with p_i = 0 contribute zero; q_i = 0 where p_i > 0 violates
/// absolute continuity and is rejected.
inline double kl_divergence(const Tensor2& p, const Tensor2& q) {
    require_same_shape(p, q, "kl_divergence");
    if (p.rows != 1) throw DimensionError("kl_divergence: expects single probability rows");
    double sp = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
        if (p.data[j] < 0.0 || q.data[j] < 0.0)
            throw DomainError("kl_divergence: negative probability entry");
        sp += p.data[j];
        sq += q.data[j];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw DomainError("kl_divergence: rows must sum to 1 within 1e-9");
    double kl = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
        if (p.data[j] == 0.0) continue;
        if (q.data[j] == 0.0)
            throw DomainError("kl_divergence: q = 0 where p > 0 (absolute continuity violated)");
        kl += p.data[j] * std::log(p.data[j] / q.data[j]);
    }
    return kl;
}

namespace detail {

// Per-row KL of tempered softmaxes, student row as P. Returns KL and,
// optionally, d(KL)/d(student logits) for that row.
inline double kd_row(const double* student, const double* teacher, std::size_t n, double t,
                     double* grad_out) {
    // Tempered softmax of both rows, max-subtracted.
    double ms = -std::numeric_limits<double>::infinity();
    double mt = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        ms = std::max(ms, student[j]);
        mt = std::max(mt, teacher[j]);
    }
    std::vector<double> p(n), q(n);
    double sp = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        p[j] = std::exp((student[j] - ms) / t);
        q[j] = std::exp((teacher[j] - mt) / t);
        sp += p[j];
        sq += q[j];
    }
    double kl = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        p[j] /= sp;
        q[j] /= sq;
        kl += p[j] * std::log(p[j] / q[j]);
    }
    if (grad_out) {
        // dKL/dz_j = p_j (log(p_j/q_j) - KL) with z = student/T.
        for (std::size_t j = 0; j < n; ++j)
            grad_out[j] = p[j] * (std::log(p[j] / q[j]) - kl) / t;
    }
    return kl;
}

} // namespace detail

/// Distillation loss T^2 * KL(softmax_T(student) || softmax_T(teacher)),
/// averaged over batch rows. Kept as an ablation alternative to the plain
/// logit MSE used for sharing.
inline double kd_loss(const Tensor2& student_logits, const Tensor2& teacher_logits, double temperature) {
    require_same_shape(student_logits, teacher_logits, "kd_loss");
    if (temperature <= 0.0)
        throw ParameterError("kd_loss: T must be > 0");
    double acc = 0.0;
    for (std::size_t i = 0; i < student_logits.rows; ++i)
        acc += detail::kd_row(student_logits.row_ptr(i), teacher_logits.row_ptr(i),
                              student_logits.cols, temperature, nullptr);
    return temperature * temperature * acc / static_cast<double>(student_logits.rows);
}

/// d(kd_loss)/d(student_logits).
inline Tensor2 kd_loss_grad(const Tensor2& student_logits, const Tensor2& teacher_logits,
                            double temperature) {
    require_same_shape(student_logits, teacher_logits, "kd_loss_grad");
    if (temperature <= 0.0)
        throw ParameterError("kd_loss_grad: T must be > 0");
    Tensor2 grad(student_logits.rows, student_logits.cols);
    const double scale = temperature * temperature / static_cast<double>(student_logits.rows);
    for (std::size_t i = 0; i < student_logits.rows; ++i) {
        detail::kd_row(student_logits.row_ptr(i), teacher_logits.row_ptr(i),
                       student_logits.cols, temperature, grad.row_ptr(i));
        double* g = grad.row_ptr(i);
        for (std::size_t j = 0; j < grad.cols; ++j) g[j] *= scale;
    }
    return grad;
}

/// Sharing loss: plain MSE between own and advised logits, averaged over
/// every entry of the batch.
inline double mse_share_loss(const Tensor2& own_logits, const Tensor2& advice_logits) {
    require_same_shape(own_logits, advice_logits, "mse_share_loss");
    if (own_logits.size() == 0) throw DimensionError("mse_share_loss: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < own_logits.data.size(); ++i) {
        const double d = own_logits.data[i] - advice_logits.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(own_logits.size());
}

/// d(mse_share_loss)/d(own_logits) = 2 (own - advice) / n.
inline Tensor2 mse_share_loss_grad(const Tensor2& own_logits, const Tensor2& advice_logits) {
    require_same_shape(own_logits, advice_logits, "mse_share_loss_grad");
    Tensor2 grad(own_logits.rows, own_logits.cols);
    const double scale = 2.0 / static_cast<double>(own_logits.size());
    for (std::size_t i = 0; i < own_logits.data.size(); ++i)
        grad.data[i] = scale * (own_logits.data[i] - advice_logits.data[i]);
    return grad;
}

} // namespace knowsr::nn
