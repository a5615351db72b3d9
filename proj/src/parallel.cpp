#include "ifr/parallel.hpp"

#include <omp.h>

namespace ifr {

int max_threads() { return omp_get_max_threads(); }

}  // namespace ifr
