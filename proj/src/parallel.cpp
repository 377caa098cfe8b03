#include "histcheck/parallel.hpp"

#include <omp.h>

namespace histcheck {

int worker_threads() { return omp_get_max_threads(); }

}  // namespace histcheck
