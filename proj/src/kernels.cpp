#include <cstdlib>
#include <cstring>

#include "rose/kernels.hpp"

namespace rose::kernels {

#if !defined(ROSE_KERNELS_AVX2_BUILT)
bool avx2_supported() { return false; }
const Ops& avx2() { return scalar(); }
#endif

namespace {

const Ops& select() {
    const char* env = std::getenv("ROSE_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return scalar();
    if (env && std::strcmp(env, "avx2") == 0) {
        return avx2_supported() ? avx2() : scalar();
    }
    return avx2_supported() ? avx2() : scalar();
}

}  // namespace

const Ops& active() {
    static const Ops& ops = select();
    return ops;
}

}  // namespace rose::kernels
