#include "rkg/parallel.hpp"

#include <cstdlib>
#include <thread>

#include <Eigen/Core>
#ifdef _OPENMP
#include <omp.h>
#endif

namespace rkg {
namespace {

int default_threads() {
  if (const char* env = std::getenv("RESONANT_KG_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int g_threads = 0;

}  // namespace

void set_threads(int n) {
  g_threads = n > 0 ? n : default_threads();
#ifdef _OPENMP
  omp_set_num_threads(g_threads);
#endif
  // Parallelism lives at the block level; dense kernels stay sequential so that
  // results do not depend on the thread count.
  Eigen::setNbThreads(1);
}

int threads() {
  if (g_threads == 0) set_threads(0);
  return g_threads;
}

}  // namespace rkg
