#include "lossforge/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace lossforge::kernels {

namespace {

const Ops& resolve() {
    const char* pref = std::getenv("LOSSFORGE_KERNELS");
    if (pref && std::strcmp(pref, "scalar") == 0) return scalar_ops();
    if (pref && std::strcmp(pref, "avx2") == 0) {
        if (avx2_available()) return avx2_ops();
        std::fprintf(stderr, "lossforge: LOSSFORGE_KERNELS=avx2 but CPU lacks AVX2+FMA; using scalar kernels\n");
        return scalar_ops();
    }
    return avx2_available() ? avx2_ops() : scalar_ops();
}

} // namespace

const Ops& active() {
    static const Ops& ops = resolve();
    return ops;
}

} // namespace lossforge::kernels
