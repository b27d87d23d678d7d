#include <gtest/gtest.h>

#include "oracle/dense_ridge.hpp"

using ats_oracle::Dense;

TEST(DenseRidgeOracle, IdentityDesign)
{
    Dense x(2, 2), y(2, 2);
    x(0, 0) = x(1, 1) = 1.0;
    y(0, 0) = y(1, 1) = 1.0;
    const auto w = ats_oracle::ridge_solve(x, y, 1.0);
    EXPECT_DOUBLE_EQ(w(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(w(1, 1), 0.5);
    EXPECT_DOUBLE_EQ(w(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(w(1, 0), 0.0);
}

TEST(DenseRidgeOracle, ScalarClosedForm)
{
    // w = sum(x y) / (sum(x^2) + gamma)
    Dense x(3, 1), y(3, 1);
    x(0, 0) = 1.0; x(1, 0) = 2.0; x(2, 0) = -1.0;
    y(0, 0) = 0.5; y(1, 0) = 1.0; y(2, 0) = 2.0;
    const auto w = ats_oracle::ridge_solve(x, y, 3.0);
    EXPECT_NEAR(w(0, 0), (0.5 + 2.0 - 2.0) / (6.0 + 3.0), 1e-15);
}

TEST(DenseRidgeOracle, PivotingHandlesZeroLeadingEntry)
{
    // gamma tiny makes the first pivot tiny relative to the second row
    Dense x(2, 2), y(2, 1);
    x(0, 1) = 1.0;
    x(1, 0) = 1.0;
    x(1, 1) = 1.0;
    y(0, 0) = 1.0;
    y(1, 0) = 3.0;
    const auto w = ats_oracle::ridge_solve(x, y, 1e-12);
    // unregularized solution of [0 1; 1 1] w = [1; 3] is w = [2, 1]
    EXPECT_NEAR(w(0, 0), 2.0, 1e-9);
    EXPECT_NEAR(w(1, 0), 1.0, 1e-9);
}

TEST(DenseRidgeOracle, ObjectiveAtZeroIsLabelEnergy)
{
    Dense x(2, 1), y(2, 1), w(1, 1);
    x(0, 0) = 1.0;
    y(0, 0) = 3.0;
    y(1, 0) = 4.0;
    EXPECT_DOUBLE_EQ(ats_oracle::ridge_objective(x, y, w, 1.0), 25.0);
}
