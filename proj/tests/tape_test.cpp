#include <gtest/gtest.h>

#include "tall/ops.hpp"

using namespace tall;

TEST(Tape, BackwardOnForeignVarIsUsageError) {
    Tape<double> a, b;
    auto x = b.leaf(Tensor<double>::scalar(1.0), true);
    EXPECT_THROW(a.backward(x), UsageError);
}

TEST(Tape, GradBeforeBackwardIsUsageError) {
    Tape<double> t;
    auto x = t.leaf(Tensor<double>::scalar(2.0), true);
    EXPECT_THROW(t.grad(x), UsageError);
}

TEST(Tape, ParameterNamesAreUnique) {
    Tape<float> t;
    t.param("w", Tensor<float>::scalar(1.0f));
    EXPECT_THROW(t.param("w", Tensor<float>::scalar(1.0f)), UsageError);
}

TEST(Tape, FanOutAccumulatesGradients) {
    // f(x) = x*x + 3x, f'(2) = 7
    Tape<double> t;
    auto x = t.leaf(Tensor<double>::scalar(2.0), true);
    auto f = add(mul(x, x), scale(x, 3.0));
    t.backward(f);
    EXPECT_DOUBLE_EQ(t.grad(x)[0], 7.0);
}

TEST(Tape, ConstantsReceiveNoGradient) {
    Tape<double> t;
    auto c = t.constant(Tensor<double>::scalar(5.0));
    auto x = t.leaf(Tensor<double>::scalar(2.0), true);
    auto f = mul(c, x);
    t.backward(f);
    EXPECT_DOUBLE_EQ(t.grad(x)[0], 5.0);
    EXPECT_DOUBLE_EQ(t.grad(c)[0], 0.0);
}

TEST(Tape, RepeatedBackwardDoesNotAccumulateAcrossCalls) {
    Tape<double> t;
    auto x = t.leaf(Tensor<double>::scalar(3.0), true);
    auto f = mul(x, x);
    t.backward(f);
    t.backward(f);
    EXPECT_DOUBLE_EQ(t.grad(x)[0], 6.0);
}

TEST(Tape, SeededBackwardScalesGradient) {
    Tape<double> t;
    auto x = t.leaf(Tensor<double>(Shape{2}, std::vector<double>{1.0, 2.0}), true);
    auto y = scale(x, 2.0);
    t.backward(y, Tensor<double>(Shape{2}, std::vector<double>{10.0, 100.0}));
    EXPECT_DOUBLE_EQ(t.grad(x)[0], 20.0);
    EXPECT_DOUBLE_EQ(t.grad(x)[1], 200.0);
}

TEST(Tape, ParamGradsAreKeyedByName) {
    Tape<double> t;
    auto w = t.param("w", Tensor<double>::scalar(4.0));
    auto b = t.param("b", Tensor<double>::scalar(1.0));
    t.backward(add(mul(w, w), b));
    const auto g = t.param_grads();
    EXPECT_DOUBLE_EQ(g.at("w")[0], 8.0);
    EXPECT_DOUBLE_EQ(g.at("b")[0], 1.0);
}

TEST(Tape, MixedTapesAreRejected) {
    Tape<double> a, b;
    auto x = a.leaf(Tensor<double>::scalar(1.0), true);
    auto y = b.leaf(Tensor<double>::scalar(1.0), true);
    EXPECT_THROW(add(x, y), UsageError);
}
