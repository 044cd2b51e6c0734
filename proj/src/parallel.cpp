#include "clickmine/parallel.hpp"

#include <omp.h>

namespace clickmine::parallel {

namespace {
int g_default_jobs = 0;
}

void set_jobs(int n) {
  if (g_default_jobs == 0) g_default_jobs = omp_get_max_threads();
  omp_set_num_threads(n > 0 ? n : g_default_jobs);
}

int jobs() { return omp_get_max_threads(); }

}  // namespace clickmine::parallel
