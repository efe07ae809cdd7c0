#include <gtest/gtest.h>

#include "properties.hpp"

namespace {

void expect_holds(const props::Summary& s) {
  EXPECT_GE(s.cases, 200);
  EXPECT_EQ(s.failures, 0) << s.name << ": " << s.first_failure;
}

TEST(Properties, BranchIsolation) { expect_holds(props::branch_isolation()); }
TEST(Properties, Purity) { expect_holds(props::purity()); }
TEST(Properties, RoundCounter) { expect_holds(props::round_counter()); }
TEST(Properties, NormalizeIdentities) { expect_holds(props::normalize_identities()); }
TEST(Properties, VectorSymmetry) { expect_holds(props::vector_symmetry()); }
TEST(Properties, PreferenceState) { expect_holds(props::preference_state()); }

}  // namespace
