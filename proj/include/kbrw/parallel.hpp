#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace kbrw {

/// Replications are grouped into fixed-size blocks. Each block is reduced
/// serially in replication order, then blocks are merged by a pairwise tree
/// in block order. Neither step depends on the worker count, so every
/// accumulator (including floating-point sums) is bit-identical for any
/// number of workers.
struct Schedule {
  int workers = 1;
  std::uint64_t block_size = 2048;
};

/// Worker count from KBRW_WORKERS, defaulting to 1.
inline int workers_from_env() {
  if (const char* env = std::getenv("KBRW_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// In-place pairwise tree reduction; acc[0] holds the result.
template <class Acc>
Acc tree_reduce(std::vector<Acc> parts) {
  if (parts.empty()) return Acc{};
  while (parts.size() > 1) {
    const std::size_t half = parts.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
      Acc merged = std::move(parts[2 * i]);
      merged.merge(parts[2 * i + 1]);
      parts[i] = std::move(merged);
    }
    if (parts.size() % 2 == 1) {
      parts[half] = std::move(parts.back());
      parts.resize(half + 1);
    } else {
      parts.resize(half);
    }
  }
  return std::move(parts.front());
}

namespace detail {

inline std::uint64_t block_count(std::uint64_t reps, std::uint64_t block_size) {
  return block_size == 0 ? 0 : (reps + block_size - 1) / block_size;
}

template <class Acc, class Kernel>
void run_block(Acc& acc, Kernel& kernel, std::uint64_t block, std::uint64_t reps,
               std::uint64_t block_size) {
  const std::uint64_t first = block * block_size;
  const std::uint64_t last = first + block_size < reps ? first + block_size : reps;
  for (std::uint64_t rep = first; rep < last; ++rep) kernel(acc, rep);
}

}  // namespace detail

/// Serial reference: same blocks, same merge tree, no threads.
/// `make_kernel()` returns a callable `(Acc&, std::uint64_t rep)`.
template <class Acc, class MakeKernel>
Acc replicate_serial(std::uint64_t reps, std::uint64_t block_size, MakeKernel&& make_kernel) {
  const std::uint64_t blocks = detail::block_count(reps, block_size);
  std::vector<Acc> parts(blocks);
  auto kernel = make_kernel();
  for (std::uint64_t blk = 0; blk < blocks; ++blk)
    detail::run_block(parts[blk], kernel, blk, reps, block_size);
  return tree_reduce(std::move(parts));
}

/// OpenMP version of replicate_serial. Blocks are handed out dynamically;
/// each thread builds its own kernel (scratch buffers, samplers).
template <class Acc, class MakeKernel>
Acc replicate(std::uint64_t reps, const Schedule& schedule, MakeKernel&& make_kernel) {
#ifdef _OPENMP
  if (schedule.workers <= 1) return replicate_serial<Acc>(reps, schedule.block_size, make_kernel);
  const std::uint64_t blocks = detail::block_count(reps, schedule.block_size);
  std::vector<Acc> parts(blocks);
  std::exception_ptr error;
#pragma omp parallel num_threads(schedule.workers)
  {
    auto kernel = make_kernel();
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(blocks); ++blk) {
      try {
        detail::run_block(parts[static_cast<std::size_t>(blk)], kernel,
                          static_cast<std::uint64_t>(blk), reps, schedule.block_size);
      } catch (...) {
#pragma omp critical(kbrw_replicate_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return tree_reduce(std::move(parts));
#else
  return replicate_serial<Acc>(reps, schedule.block_size, make_kernel);
#endif
}

/// Runs `fn(rep)` for every replication and stores results by index.
template <class T, class MakeFn>
std::vector<T> replicate_collect(std::uint64_t reps, const Schedule& schedule, MakeFn&& make_fn) {
  std::vector<T> out(reps);
  std::exception_ptr error;
#ifdef _OPENMP
#pragma omp parallel num_threads(schedule.workers > 0 ? schedule.workers : 1)
#endif
  {
    auto fn = make_fn();
#ifdef _OPENMP
#pragma omp for schedule(dynamic, 64)
#endif
    for (std::int64_t rep = 0; rep < static_cast<std::int64_t>(reps); ++rep) {
      try {
        out[static_cast<std::size_t>(rep)] = fn(static_cast<std::uint64_t>(rep));
      } catch (...) {
#ifdef _OPENMP
#pragma omp critical(kbrw_collect_error)
#endif
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

/// Count, sum and sum of squares of a scalar sample, plus censored count.
struct MomentAccumulator {
  std::uint64_t count = 0;
  std::uint64_t censored = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double v) {
    ++count;
    sum += v;
    sum_sq += v * v;
  }
  void merge(const MomentAccumulator& o) {
    count += o.count;
    censored += o.censored;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  /// Standard error of the mean.
  double stderr_mean() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double var = (sum_sq - sum * sum / n) / (n - 1.0);
    return var > 0.0 ? std::sqrt(var / n) : 0.0;
  }
};

}  // namespace kbrw
