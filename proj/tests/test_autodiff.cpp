#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "snn/gradcheck.hpp"
#include "snn/ops.hpp"
#include "snn/rng.hpp"
#include "snn/surrogate.hpp"

using namespace snn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v));
}

}  // namespace

TEST(Primitives, MatmulTwoByTwo) {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {1, 1});
    Tensor c = matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{2, 1}));
    EXPECT_EQ(c[0], 3.0);
    EXPECT_EQ(c[1], 7.0);
}

TEST(Primitives, SigmoidAtZero) { EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5); }

TEST(Primitives, SumOfOnes) { EXPECT_EQ(sum(Tensor::full({2, 3}, 1.0)).item(), 6.0); }

TEST(Primitives, ShapeMismatchNamesOpAndShapes) {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 1});
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("matmul"), std::string::npos);
        EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
        EXPECT_NE(msg.find("[4, 1]"), std::string::npos);
    }
    EXPECT_THROW(add(a, Tensor::zeros({2})), ShapeError);
}

TEST(Primitives, LogOfNonPositiveIsDomainError) {
    EXPECT_THROW(snn::log(Tensor({2}, {1.0, 0.0})), DomainError);
    EXPECT_THROW(snn::log(Tensor({1}, {-3.0})), DomainError);
}

TEST(Primitives, LeadingAxisBroadcast) {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3}, {10, 20, 30}, true);
    Tensor c = add(a, b);
    EXPECT_EQ(c[4], 25.0);
    sum(c).backward();
    for (double g : b.grad()) EXPECT_EQ(g, 2.0);
}

TEST(Primitives, ConcatSliceSelectTransposeRoundTrip) {
    Rng rng(3);
    Tensor x = random_tensor({2, 3, 4}, rng);
    Tensor parts = concat({slice(x, 1, 0, 1), slice(x, 1, 1, 2)}, 1);
    ASSERT_EQ(parts.shape(), x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(parts[i], x[i]);
    Tensor s = select(x, 1, 2);
    ASSERT_EQ(s.shape(), (Shape{2, 4}));
    EXPECT_EQ(s[5], x[1 * 12 + 2 * 4 + 1]);
    Tensor m = random_tensor({3, 5}, rng);
    Tensor tt = transpose(transpose(m));
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(tt[i], m[i]);
}

TEST(Backward, LinearMapGradientIsInput) {
    Tensor x({3}, {1, 2, 3});
    Tensor w({3}, {0.3, -0.1, 2.0}, true);
    sum(mul(w, x)).backward();
    ASSERT_TRUE(w.has_grad());
    EXPECT_EQ(w.grad()[0], 1.0);
    EXPECT_EQ(w.grad()[1], 2.0);
    EXPECT_EQ(w.grad()[2], 3.0);
}

TEST(Backward, SigmoidSlopeAtZero) {
    Tensor x = Tensor::scalar(0.0, true);
    affine(sigmoid(x), 2.0).backward();
    EXPECT_DOUBLE_EQ(x.grad()[0], 0.5);
}

TEST(Backward, FanOutAccumulatesAdditively) {
    Tensor x = Tensor::scalar(3.0, true);
    // y = x*x + x  -> dy/dx = 2x + 1
    add(mul(x, x), x).backward();
    EXPECT_EQ(x.grad()[0], 7.0);
}

TEST(Backward, NonScalarLossRejected) {
    Tensor x = Tensor::zeros({2}, true);
    EXPECT_THROW(affine(x, 2.0).backward(), ShapeError);
}

TEST(Backward, DeterministicAcrossRuns) {
    Rng rng(11);
    Tensor a = random_tensor({4, 5}, rng).set_requires_grad(true);
    Tensor b = random_tensor({5, 3}, rng).set_requires_grad(true);
    Tensor loss = sum(tanh(matmul(a, b)));
    loss.backward();
    const std::vector<double> first(a.grad().begin(), a.grad().end());
    a.zero_grad();
    b.zero_grad();
    loss.backward();
    const std::vector<double> second(a.grad().begin(), a.grad().end());
    EXPECT_EQ(first, second);
}

TEST(Backward, NoGradGuardSkipsTape) {
    Tensor x = Tensor::scalar(1.0, true);
    Tensor y;
    {
        NoGradGuard g;
        y = affine(x, 2.0);
    }
    EXPECT_FALSE(y.requires_grad());
    EXPECT_TRUE(affine(x, 2.0).requires_grad());
}

TEST(Backward, LongChainDoesNotOverflowOnDestruction) {
    Tensor x = Tensor::scalar(1.0, true);
    Tensor y = x;
    for (int i = 0; i < 200000; ++i) y = affine(y, 1.0, 0.0);
    y.backward();
    EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Surrogate, BoxcarExamples) {
    const SurrogateSpec spec;
    Tensor u({3}, {1.2, 0.5, 2.0}, true);
    Tensor s = heaviside_surrogate(u, spec);
    EXPECT_EQ(s[0], 1.0);
    EXPECT_EQ(s[1], 0.0);
    EXPECT_EQ(s[2], 1.0);
    sum(s).backward();
    EXPECT_EQ(u.grad()[0], 0.5);
    EXPECT_EQ(u.grad()[1], 0.5);  // |0.5 - 1| = 0.5 sits on the closed boundary
    EXPECT_EQ(u.grad()[2], 0.0);
}

TEST(Surrogate, ForwardIsExactlyBinary) {
    Rng rng(5);
    Tensor u = random_tensor({1000}, rng, -5.0, 5.0);
    Tensor s = heaviside_surrogate(u, SurrogateSpec{});
    for (double v : s.values()) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(Surrogate, InvalidSpecRejected) {
    EXPECT_THROW((SurrogateSpec{1.0, 0.0, 0.5}.validate()), std::invalid_argument);
    EXPECT_THROW((SurrogateSpec{1.0, 0.5, -1.0}.validate()), std::invalid_argument);
}

TEST(GradCheck, SumOfSquares) {
    auto f = [](const Tensor& x) { return sum(mul(x, x)); };
    EXPECT_LT(finite_diff_check(f, Tensor({2}, {1.0, -2.0}), 1e-5), 1e-6);
}

TEST(GradCheck, LinearIsExact) {
    Tensor w({3}, {0.5, -1.5, 2.0});
    auto f = [&](const Tensor& x) { return sum(mul(x, w)); };
    EXPECT_LT(finite_diff_check(f, Tensor({3}, {0.1, 7.0, -3.0}), 1e-5), 1e-10);
}

TEST(GradCheck, EpsilonOutOfRangeRejected) {
    auto f = [](const Tensor& x) { return sum(x); };
    EXPECT_THROW(finite_diff_check(f, Tensor({1}, {1.0}), 1e-2), std::invalid_argument);
}

TEST(GradCheck, NonScalarOutputRejected) {
    auto f = [](const Tensor& x) { return affine(x, 1.0); };
    EXPECT_THROW(finite_diff_check(f, Tensor({2}, {1.0, 2.0}), 1e-5), ShapeError);
}

// Random compositions of every smooth primitive.
TEST(GradCheck, RandomSmoothCompositions) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({4, 2}, rng);
        Tensor c = random_tensor({2}, rng);
        auto f = [&]() {
            Tensor h = add(matmul(a, b), c);
            Tensor joined = concat({sigmoid(h), tanh(h), relu(affine(h, 1.0, 0.3))}, 1);
            Tensor picked = slice(joined, 1, 1, 4);
            Tensor logs = snn::log(add(snn::exp(picked), Tensor::scalar(1.0)));
            Tensor ls = log_softmax(transpose(logs));
            return add(mean(sub(ls, affine(ls, 0.5))), sum(mul(picked, picked)));
        };
        EXPECT_LT(finite_diff_check(f, {a, b, c}, 1e-5), 1e-4) << "seed " << seed;
    }
}
