#include "lossforge/kernels.hpp"

#include <cmath>

namespace lossforge::kernels {

namespace {

void gemm_nn_scalar(int M, int N, int K, const double* A, const double* B, double* C) {
    for (int m = 0; m < M; ++m) {
        const double* a = A + static_cast<long>(m) * K;
        double* c = C + static_cast<long>(m) * N;
        for (int k = 0; k < K; ++k) {
            double av = a[k];
            const double* b = B + static_cast<long>(k) * N;
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

void gemm_nt_scalar(int M, int N, int K, const double* A, const double* B, double* C) {
    for (int m = 0; m < M; ++m) {
        const double* a = A + static_cast<long>(m) * K;
        double* c = C + static_cast<long>(m) * N;
        for (int n = 0; n < N; ++n) {
            const double* b = B + static_cast<long>(n) * K;
            double acc = 0.0;
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[n] += acc;
        }
    }
}

void gemm_tn_scalar(int M, int N, int K, const double* A, const double* B, double* C) {
    for (int k = 0; k < K; ++k) {
        const double* a = A + static_cast<long>(k) * M;
        const double* b = B + static_cast<long>(k) * N;
        for (int m = 0; m < M; ++m) {
            double av = a[m];
            double* c = C + static_cast<long>(m) * N;
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

double dot_scalar(const double* a, const double* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void add_bias_scalar(int M, int N, const double* bias, double* X) {
    for (int m = 0; m < M; ++m) {
        double* row = X + static_cast<long>(m) * N;
        for (int n = 0; n < N; ++n) row[n] += bias[n];
    }
}

void colsum_scalar(int M, int N, const double* X, double* out) {
    for (int m = 0; m < M; ++m) {
        const double* row = X + static_cast<long>(m) * N;
        for (int n = 0; n < N; ++n) out[n] += row[n];
    }
}

void relu_scalar(int n, const double* x, double* y) {
    for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_scalar(int n, const double* x, const double* dy, double* dx) {
    for (int i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void softmax_rows_scalar(int M, int N, const double* Z, double* Y) {
    for (int m = 0; m < M; ++m) {
        const double* z = Z + static_cast<long>(m) * N;
        double* y = Y + static_cast<long>(m) * N;
        double zmax = z[0];
        for (int n = 1; n < N; ++n) zmax = z[n] > zmax ? z[n] : zmax;
        double sum = 0.0;
        for (int n = 0; n < N; ++n) {
            y[n] = std::exp(z[n] - zmax);
            sum += y[n];
        }
        for (int n = 0; n < N; ++n) y[n] /= sum;
    }
}

void adam_step_scalar(int n, double* w, const double* g, double* m, double* v,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2) {
    for (int i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",
        gemm_nn_scalar,
        gemm_nt_scalar,
        gemm_tn_scalar,
        dot_scalar,
        add_bias_scalar,
        colsum_scalar,
        relu_scalar,
        relu_grad_scalar,
        softmax_rows_scalar,
        adam_step_scalar,
    };
    return ops;
}

} // namespace lossforge::kernels
