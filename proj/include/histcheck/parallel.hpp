#pragma once

#include <cstddef>

namespace histcheck {

// Selects between the OpenMP kernels and the serial reference loops. Both
// produce identical results; the serial path is kept for testing.
enum class Exec { serial, parallel };

int worker_threads();

template <typename Fn>
void for_each_index(Exec exec, std::size_t n, Fn&& fn) {
  if (exec == Exec::parallel) {
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

}  // namespace histcheck
