#include "wegpipe/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "lanes.hpp"
#include "wegpipe/common.hpp"

namespace wegpipe::kernels {
namespace {

const Backend* simd_lane_or_null() {
#if defined(WEGPIPE_HAVE_AVX2_TU)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return avx2_lane();
#elif defined(WEGPIPE_HAVE_NEON_TU)
    return neon_lane();
#endif
    return nullptr;
}

const Backend* resolve(const std::string& name) {
    if (name == "auto" || name.empty()) {
        const Backend* lane = simd_lane_or_null();
        return lane ? lane : &scalar_backend();
    }
    if (name == "scalar") return &scalar_backend();
    const Backend* lane = simd_lane_or_null();
    if (lane && name == lane->name) return lane;
    throw ConfigError("unknown or unsupported kernel backend: " + name);
}

std::atomic<const Backend*> g_active{nullptr};

} // namespace

const Backend& active() {
    const Backend* b = g_active.load(std::memory_order_acquire);
    if (!b) {
        const char* env = std::getenv("WEGPIPE_KERNELS");
        b = resolve(env ? env : "auto");
        g_active.store(b, std::memory_order_release);
    }
    return *b;
}

void set_backend(const std::string& name) {
    g_active.store(resolve(name), std::memory_order_release);
}

std::vector<const Backend*> available_backends() {
    std::vector<const Backend*> out{&scalar_backend()};
    if (const Backend* lane = simd_lane_or_null()) out.push_back(lane);
    return out;
}

} // namespace wegpipe::kernels
