#pragma once

#include <cstddef>
#include <functional>

namespace plq {

/// Runs fn(0..n-1) on up to `threads` worker threads. Tasks must be
/// independent; results keyed by index are deterministic regardless of the
/// thread count. threads <= 1 runs inline.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

} // namespace plq
