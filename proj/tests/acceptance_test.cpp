#include <gtest/gtest.h>

#include <cstdio>

#include "gikf/acceptance.hpp"

namespace gikf {
namespace {

TEST(Acceptance, AllCriteria) {
  const auto results = run_acceptance_suite(0);
  ASSERT_EQ(results.size(), 10u);
  for (const auto& r : results) {
    std::printf("[%s] criterion %2d %-32s %s\n", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.detail.c_str());
    std::fflush(stdout);
    EXPECT_TRUE(r.pass) << "criterion " << r.id << " (" << r.name << "): " << r.detail;
  }
}

}  // namespace
}  // namespace gikf
