#pragma once

#include <cstddef>
#include <functional>

namespace saesteer {

// Runs fn(i) for i in [0, n) over up to `workers` threads. Work is split in
// contiguous chunks; callers write results by index so output order never
// depends on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace saesteer
