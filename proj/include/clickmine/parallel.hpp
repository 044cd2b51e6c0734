#pragma once

#include <cstddef>

namespace clickmine::parallel {

/// Caps the worker count used by every OpenMP kernel. n <= 0 restores the
/// runtime default.
void set_jobs(int n);
int jobs();

/// Reductions in the kernels are accumulated over fixed-size blocks and then
/// summed in block order, so the result is identical for any worker count.
inline constexpr std::size_t kReductionBlock = 32;

}  // namespace clickmine::parallel
