#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "knowsr/errors.hpp"

namespace knowsr::nn {

/// Dense row-major matrix of doubles. Row vectors (1 x n) double as
/// observations, logits and probability rows throughout the library.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Tensor2 row(std::initializer_list<double> values) {
        Tensor2 t(1, values.size());
        std::size_t j = 0;
        for (double v : values) t.data[j++] = v;
        return t;
    }

    static Tensor2 from_rows(std::initializer_list<std::initializer_list<double>> rws) {
        const std::size_t r = rws.size();
        const std::size_t c = r == 0 ? 0 : rws.begin()->size();
        Tensor2 t(r, c);
        std::size_t i = 0;
        for (const auto& rw : rws) {
            if (rw.size() != c) throw DimensionError("from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : rw) t(i, j++) = v;
            ++i;
        }
        return t;
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline std::string shape_str(const Tensor2& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

inline void require_same_shape(const Tensor2& a, const Tensor2& b, const char* where) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(where) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

/// C = A * B, shapes (m x k)(k x n). ikj loop order keeps B traversal contiguous.
inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul: inner dims " + shape_str(a) + " vs " + shape_str(b));
    Tensor2 c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

/// C = A^T * B with A stored untransposed, shapes (m x k)^T (m x n) -> (k x n).
inline Tensor2 matmul_at(const Tensor2& a, const Tensor2& b) {
    if (a.rows != b.rows)
        throw DimensionError("matmul_at: outer dims " + shape_str(a) + " vs " + shape_str(b));
    Tensor2 c(a.cols, b.cols);
    for (std::size_t m = 0; m < a.rows; ++m) {
        const double* arow = a.row_ptr(m);
        const double* brow = b.row_ptr(m);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double ami = arow[i];
            if (ami == 0.0) continue;
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += ami * brow[j];
        }
    }
    return c;
}

/// C = A * B^T, shapes (m x k)(n x k)^T -> (m x n).
inline Tensor2 matmul_bt(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.cols)
        throw DimensionError("matmul_bt: inner dims " + shape_str(a) + " vs " + shape_str(b));
    Tensor2 c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            crow[j] = acc;
        }
    }
    return c;
}

inline void add_row_inplace(Tensor2& t, const Tensor2& row) {
    if (row.rows != 1 || row.cols != t.cols)
        throw DimensionError("add_row_inplace: " + shape_str(t) + " += " + shape_str(row));
    for (std::size_t i = 0; i < t.rows; ++i) {
        double* r = t.row_ptr(i);
        for (std::size_t j = 0; j < t.cols; ++j) r[j] += row.data[j];
    }
}

inline Tensor2 column_sums(const Tensor2& t) {
    Tensor2 s(1, t.cols);
    for (std::size_t i = 0; i < t.rows; ++i) {
        const double* r = t.row_ptr(i);
        for (std::size_t j = 0; j < t.cols; ++j) s.data[j] += r[j];
    }
    return s;
}

} // namespace knowsr::nn
