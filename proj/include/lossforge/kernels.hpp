#pragma once

namespace lossforge::kernels {

// Dense numeric kernels used by the trainer's inner loops. Every entry has a
// scalar reference implementation and, on x86-64 with AVX2+FMA, a vectorized
// variant; the two are equivalence-tested against each other. Matrices are
// row-major and contiguous. gemm_* accumulate into C.
struct Ops {
    const char* name;

    // C[M,N] += A[M,K] * B[K,N]
    void (*gemm_nn)(int M, int N, int K, const double* A, const double* B, double* C);
    // C[M,N] += A[M,K] * B[N,K]^T
    void (*gemm_nt)(int M, int N, int K, const double* A, const double* B, double* C);
    // C[M,N] += A[K,M]^T * B[K,N]
    void (*gemm_tn)(int M, int N, int K, const double* A, const double* B, double* C);

    double (*dot)(const double* a, const double* b, int n);
    void (*add_bias)(int M, int N, const double* bias, double* X);
    void (*colsum)(int M, int N, const double* X, double* out);

    void (*relu)(int n, const double* x, double* y);
    void (*relu_grad)(int n, const double* x, const double* dy, double* dx);

    void (*softmax_rows)(int M, int N, const double* Z, double* Y);

    // Adam update; bc1/bc2 are the bias corrections 1-beta1^t / 1-beta2^t.
    void (*adam_step)(int n, double* w, const double* g, double* m, double* v,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2);
};

const Ops& scalar_ops();

bool avx2_available();
const Ops& avx2_ops();  // falls back to the scalar table when unavailable

// Table resolved once at first use: AVX2 when the CPU supports it, scalar
// otherwise. LOSSFORGE_KERNELS=auto|scalar|avx2 overrides.
const Ops& active();

} // namespace lossforge::kernels
