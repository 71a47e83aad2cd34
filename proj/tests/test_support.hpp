#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "surfcp/grid.hpp"

namespace surfcp::testing {

inline Surface random_surface(Index n1, Index n2, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Surface s(n1, n2);
  for (Index k = 0; k < s.size(); ++k) s.data()[k] = nd(rng);
  return s;
}

inline FtsDataset random_dataset(Index n1, Index n2, Index t, std::uint64_t seed,
                                 std::optional<Mask> mask = std::nullopt) {
  std::mt19937_64 rng(seed);
  std::vector<Surface> frames;
  for (Index k = 0; k < t; ++k) frames.push_back(random_surface(n1, n2, rng));
  return FtsDataset(GridDomain::unit(n1, n2), std::move(frames), std::move(mask));
}

inline std::vector<Index> iota_indices(Index first, Index last_exclusive) {
  std::vector<Index> v(static_cast<std::size_t>(last_exclusive - first));
  std::iota(v.begin(), v.end(), first);
  return v;
}

/// Left half of the u-axis inside.
inline Mask half_mask(Index n1, Index n2) {
  MaskArray m = MaskArray::Constant(n1, n2, false);
  m.topRows(n1 / 2).setConstant(true);
  return Mask(m);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("surfcp_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

#define EXPECT_SURFCP_ERROR(stmt, expected_kind)                              \
  do {                                                                        \
    try {                                                                     \
      stmt;                                                                   \
      ADD_FAILURE() << "expected surfcp::Error from " #stmt;                  \
    } catch (const ::surfcp::Error& e_) {                                     \
      EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                       \
    }                                                                         \
  } while (0)

}  // namespace surfcp::testing
