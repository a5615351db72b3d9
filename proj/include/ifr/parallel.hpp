#pragma once

#include <cstdint>

namespace ifr {

/// How a data-parallel kernel runs its outer loop. Every kernel produces
/// bit-identical results under both policies; `serial` is the reference path
/// the tests compare against.
enum class Exec { serial, parallel };

/// Run body(i) for i in [0, n). Iterations must be independent.
template <class Body>
void for_each_index(Exec exec, std::int64_t n, Body&& body) {
  if (exec == Exec::serial) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

int max_threads();

}  // namespace ifr
