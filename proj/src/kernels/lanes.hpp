#pragma once

#include "wegpipe/kernels.hpp"

// Internal: each SIMD translation unit exposes its lane here; dispatch.cpp
// links whichever ones the build included.
namespace wegpipe::kernels {
const Backend* avx2_lane();
const Backend* neon_lane();
} // namespace wegpipe::kernels
