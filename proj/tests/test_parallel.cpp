#include <atomic>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "csgd/parallel.hpp"
#include "csgd/rng.hpp"

using namespace csgd;

TEST(Parallel, MapIndicesMatchesSerial) {
  auto fn = [](std::size_t i) {
    SeededRng rng(42, i);
    double acc = 0.0;
    for (int k = 0; k < 100; ++k) {
      acc += rng.normal();
    }
    return acc;
  };
  EXPECT_EQ(map_indices<double>(257, Exec::Serial, fn), map_indices<double>(257, Exec::Parallel, fn));
}

TEST(Parallel, EveryIndexVisitedOnce) {
  std::vector<std::atomic<int>> hits(1000);
  for_each_index(hits.size(), Exec::Parallel, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) {
    ASSERT_EQ(h.load(), 1);
  }
}

TEST(Parallel, LowestIndexExceptionWins) {
  for (Exec exec : {Exec::Serial, Exec::Parallel}) {
    try {
      for_each_index(100, exec, [](std::size_t i) {
        if (i % 7 == 3) {
          throw std::runtime_error(std::to_string(i));
        }
      });
      FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "3");
    }
  }
}

TEST(Rng, StreamsAreIndependentAndReproducible) {
  SeededRng a = SeededRng::for_stream(1, Purpose::StochasticGradient, 0, 5);
  SeededRng b = SeededRng::for_stream(1, Purpose::StochasticGradient, 0, 5);
  SeededRng c = SeededRng::for_stream(1, Purpose::StochasticGradient, 1, 5);
  const std::uint64_t va = a.next_u64();
  EXPECT_EQ(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
  EXPECT_NE(SeededRng::stream_id(Purpose::Trial, 1, 0), SeededRng::stream_id(Purpose::Trial, 0, 1));
}

TEST(Rng, ResumeAtCounter) {
  SeededRng a(9, 3);
  for (int i = 0; i < 17; ++i) {
    a.next_u64();
  }
  SeededRng b = SeededRng::at(9, 3, 17);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, BelowIsUniform) {
  SeededRng rng(2);
  std::vector<int> counts(5, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    ++counts[rng.below(5)];
  }
  for (int c : counts) {
    EXPECT_NEAR(c / static_cast<double>(n), 0.2, 0.01);
  }
}
