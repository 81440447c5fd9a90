// AVX2+FMA variants of the dense kernels. This translation unit is compiled
// with -mavx2 -mfma on x86-64; callers must consult avx2_available() before
// selecting this table.

#include "lossforge/kernels.hpp"

#include <cmath>

#if defined(__x86_64__) || defined(_M_X64)
#define LOSSFORGE_X86 1
#include <immintrin.h>
#else
#define LOSSFORGE_X86 0
#endif

namespace lossforge::kernels {

#if LOSSFORGE_X86

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void gemm_nn_avx2(int M, int N, int K, const double* A, const double* B, double* C) {
    for (int m = 0; m < M; ++m) {
        const double* a = A + static_cast<long>(m) * K;
        double* c = C + static_cast<long>(m) * N;
        for (int k = 0; k < K; ++k) {
            __m256d av = _mm256_set1_pd(a[k]);
            const double* b = B + static_cast<long>(k) * N;
            int n = 0;
            for (; n + 4 <= N; n += 4) {
                __m256d cv = _mm256_loadu_pd(c + n);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + n), cv);
                _mm256_storeu_pd(c + n, cv);
            }
            for (; n < N; ++n) c[n] += a[k] * b[n];
        }
    }
}

void gemm_nt_avx2(int M, int N, int K, const double* A, const double* B, double* C) {
    for (int m = 0; m < M; ++m) {
        const double* a = A + static_cast<long>(m) * K;
        double* c = C + static_cast<long>(m) * N;
        for (int n = 0; n < N; ++n) {
            const double* b = B + static_cast<long>(n) * K;
            __m256d acc = _mm256_setzero_pd();
            int k = 0;
            for (; k + 4 <= K; k += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc);
            double s = hsum(acc);
            for (; k < K; ++k) s += a[k] * b[k];
            c[n] += s;
        }
    }
}

void gemm_tn_avx2(int M, int N, int K, const double* A, const double* B, double* C) {
    for (int k = 0; k < K; ++k) {
        const double* a = A + static_cast<long>(k) * M;
        const double* b = B + static_cast<long>(k) * N;
        for (int m = 0; m < M; ++m) {
            __m256d av = _mm256_set1_pd(a[m]);
            double* c = C + static_cast<long>(m) * N;
            int n = 0;
            for (; n + 4 <= N; n += 4) {
                __m256d cv = _mm256_loadu_pd(c + n);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + n), cv);
                _mm256_storeu_pd(c + n, cv);
            }
            for (; n < N; ++n) c[n] += a[m] * b[n];
        }
    }
}

double dot_avx2(const double* a, const double* b, int n) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void add_bias_avx2(int M, int N, const double* bias, double* X) {
    for (int m = 0; m < M; ++m) {
        double* row = X + static_cast<long>(m) * N;
        int n = 0;
        for (; n + 4 <= N; n += 4)
            _mm256_storeu_pd(row + n,
                             _mm256_add_pd(_mm256_loadu_pd(row + n), _mm256_loadu_pd(bias + n)));
        for (; n < N; ++n) row[n] += bias[n];
    }
}

void colsum_avx2(int M, int N, const double* X, double* out) {
    for (int m = 0; m < M; ++m) {
        const double* row = X + static_cast<long>(m) * N;
        int n = 0;
        for (; n + 4 <= N; n += 4)
            _mm256_storeu_pd(out + n,
                             _mm256_add_pd(_mm256_loadu_pd(out + n), _mm256_loadu_pd(row + n)));
        for (; n < N; ++n) out[n] += row[n];
    }
}

void relu_avx2(int n, const double* x, double* y) {
    __m256d zero = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_grad_avx2(int n, const double* x, const double* dy, double* dx) {
    __m256d zero = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void softmax_rows_avx2(int M, int N, const double* Z, double* Y) {
    for (int m = 0; m < M; ++m) {
        const double* z = Z + static_cast<long>(m) * N;
        double* y = Y + static_cast<long>(m) * N;
        int n = 0;
        double zmax = z[0];
        if (N >= 4) {
            __m256d vmax = _mm256_loadu_pd(z);
            for (n = 4; n + 4 <= N; n += 4) vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(z + n));
            double tmp[4];
            _mm256_storeu_pd(tmp, vmax);
            zmax = tmp[0];
            for (int j = 1; j < 4; ++j) zmax = tmp[j] > zmax ? tmp[j] : zmax;
        } else {
            n = 1;
        }
        for (; n < N; ++n) zmax = z[n] > zmax ? z[n] : zmax;

        // exp stays scalar; the sum and the normalization are vectorized
        double sum = 0.0;
        for (int j = 0; j < N; ++j) {
            y[j] = std::exp(z[j] - zmax);
            sum += y[j];
        }
        __m256d inv = _mm256_set1_pd(sum);
        int j = 0;
        for (; j + 4 <= N; j += 4)
            _mm256_storeu_pd(y + j, _mm256_div_pd(_mm256_loadu_pd(y + j), inv));
        for (; j < N; ++j) y[j] /= sum;
    }
}

void adam_step_avx2(int n, double* w, const double* g, double* m, double* v,
                    double lr, double beta1, double beta2, double eps,
                    double bc1, double bc2) {
    __m256d vb1 = _mm256_set1_pd(beta1);
    __m256d vb1c = _mm256_set1_pd(1.0 - beta1);
    __m256d vb2 = _mm256_set1_pd(beta2);
    __m256d vb2c = _mm256_set1_pd(1.0 - beta2);
    __m256d vlr = _mm256_set1_pd(lr);
    __m256d veps = _mm256_set1_pd(eps);
    __m256d vbc1 = _mm256_set1_pd(bc1);
    __m256d vbc2 = _mm256_set1_pd(bc2);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_fmadd_pd(vb1c, gv, _mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)));
        __m256d vv = _mm256_fmadd_pd(vb2c, _mm256_mul_pd(gv, gv),
                                     _mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        __m256d mhat = _mm256_div_pd(mv, vbc1);
        __m256d vhat = _mm256_div_pd(vv, vbc2);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

} // namespace

bool avx2_available() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

const Ops& avx2_ops() {
    if (!avx2_available()) return scalar_ops();
    static const Ops ops = {
        "avx2",
        gemm_nn_avx2,
        gemm_nt_avx2,
        gemm_tn_avx2,
        dot_avx2,
        add_bias_avx2,
        colsum_avx2,
        relu_avx2,
        relu_grad_avx2,
        softmax_rows_avx2,
        adam_step_avx2,
    };
    return ops;
}

#else // !LOSSFORGE_X86

bool avx2_available() { return false; }
const Ops& avx2_ops() { return scalar_ops(); }

#endif

} // namespace lossforge::kernels
