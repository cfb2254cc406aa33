#include "csgd/parallel.hpp"

#include <omp.h>

#include <atomic>

namespace csgd {

namespace {
std::atomic<int> g_threads{0};
}

void set_thread_count(int n) { g_threads = n > 0 ? n : 0; }

int thread_count() {
  const int n = g_threads.load();
  return n > 0 ? n : omp_get_max_threads();
}

} // namespace csgd
