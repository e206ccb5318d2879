#include "mfabsde/parallel.hpp"

#include <algorithm>

namespace mfabsde {

namespace {
Exec g_exec = Exec::OpenMP;
}

Exec default_exec() { return g_exec; }
void set_default_exec(Exec e) { g_exec = e; }

int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_worker_count(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

}  // namespace mfabsde
