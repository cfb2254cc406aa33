#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <vector>

namespace csgd {

/// Serial is the reference path; Parallel spreads independent tasks over
/// OpenMP threads. Results never depend on the choice: tasks write into
/// their own slots and reductions run serially in index order.
enum class Exec { Serial, Parallel };

/// Thread count used by Exec::Parallel (0 = OpenMP default).
void set_thread_count(int n);
int thread_count();

template <class Fn>
void for_each_index(std::size_t n, Exec exec, Fn&& fn) {
  if (exec == Exec::Serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  // Exceptions cannot cross an OpenMP region; keep the one from the lowest
  // index so the rethrown error matches what the serial path would raise.
  std::vector<std::exception_ptr> errors(n);
  const int threads = thread_count();
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

/// out[i] = fn(i) for i in [0, n).
template <class T, class Fn>
std::vector<T> map_indices(std::size_t n, Exec exec, Fn&& fn) {
  std::vector<T> out(n);
  for_each_index(n, exec, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

} // namespace csgd
