#pragma once

#include <cstddef>
#include <functional>

namespace lagvort {

// Worker cap for all parallel loops; 0 selects the hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(i) for i in [0, n) over contiguous static blocks. Each index is handled by exactly
// one worker, so results written per index do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Block form: body(begin, end) for contiguous ranges.
void parallel_blocks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace lagvort
