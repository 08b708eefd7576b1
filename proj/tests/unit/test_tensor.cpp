#include <doctest.h>

#include <cmath>
#include <limits>

#include "asm2tv/gradcheck.hpp"
#include "asm2tv/tensor.hpp"

using namespace asm2tv;

namespace {

Tensor random_leaf(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = uniform(rng, lo, hi);
    return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

TEST_CASE("matmul forward matches a hand product") {
    const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor b = Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12});
    const Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 2});
    CHECK(c.at(0, 0) == 58);
    CHECK(c.at(0, 1) == 64);
    CHECK(c.at(1, 0) == 139);
    CHECK(c.at(1, 1) == 154);
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("matmul rows depend only on their own input row") {
    const Tensor w = random_leaf({5, 4}, 3);
    const Tensor x = random_leaf({3, 5}, 4);
    const Tensor full = matmul(x, w);
    for (std::size_t r = 0; r < 3; ++r) {
        const Tensor one = matmul(slice_rows(x, r, r + 1), w);
        for (std::size_t c = 0; c < 4; ++c) CHECK(one.at(0, c) == full.at(r, c));
    }
}

TEST_CASE("softmax rows sum to one and survive large logits") {
    const Tensor x = Tensor::from({2, 3}, {1000.0, 1001.0, 999.0, -5.0, 0.0, 5.0});
    const Tensor p = softmax(x);
    for (std::size_t r = 0; r < 2; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c) s += p.at(r, c);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    }
    const Tensor lp = log_softmax(x);
    CHECK(lp.at(0, 1) == doctest::Approx(std::log(p.at(0, 1))).epsilon(1e-12));
}

TEST_CASE("non-finite results raise NumericError") {
    const Tensor big = Tensor::from({1}, {800.0});
    CHECK_THROWS_AS(asm2tv::exp(big), NumericError);
    CHECK_THROWS_AS(Tensor::from({1}, {std::numeric_limits<double>::infinity()}), NumericError);
    CHECK_THROWS_AS(Tensor::from({1}, {std::nan("")}), NumericError);
    CHECK_THROWS_AS(scale(big, 1e307), NumericError);
}

TEST_CASE("backward requires a one-element root and leaves accumulate") {
    Tensor x = random_leaf({2, 2}, 9);
    CHECK_THROWS(x.backward());
    const Tensor y = sum(mul(x, x));
    y.backward();
    y.backward();
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(4.0 * x[i]));
    x.zero_grad();
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == 0.0);
}

TEST_CASE("a tensor used twice receives both gradient paths") {
    Tensor x = Tensor::from({1}, {3.0}, true);
    const Tensor y = add(mul(x, x), scale(x, 2.0));
    sum(y).backward();
    CHECK(x.grad()[0] == doctest::Approx(8.0));
}

TEST_CASE("stop_gradient blocks the backward sweep") {
    Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
    const Tensor y = add(mul(x, stop_gradient(x)), x);
    sum(y).backward();
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(3.0));
}

TEST_CASE("bias add broadcasts a row vector") {
    const Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
    const Tensor b = Tensor::from({2}, {10, 20});
    const Tensor y = add(m, b);
    CHECK(y.at(1, 1) == 24);
    CHECK_THROWS_AS(add(m, Tensor::from({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("kl_rows matches direct summation and treats 0 log 0 as 0") {
    const Tensor p = Tensor::from({2, 3}, {0.2, 0.3, 0.5, 0.0, 0.4, 0.6});
    const Tensor q = Tensor::from({2, 3}, {0.1, 0.6, 0.3, 0.3, 0.3, 0.4});
    const Tensor kl = kl_rows(p, q);
    const double r0 = 0.2 * std::log(0.2 / 0.1) + 0.3 * std::log(0.3 / 0.6) + 0.5 * std::log(0.5 / 0.3);
    const double r1 = 0.4 * std::log(0.4 / 0.3) + 0.6 * std::log(0.6 / 0.4);
    CHECK(kl[0] == doctest::Approx(r0).epsilon(1e-14));
    CHECK(kl[1] == doctest::Approx(r1).epsilon(1e-14));
    CHECK(kl_rows(p, p)[0] == doctest::Approx(0.0));
}

TEST_CASE("dropout is inverted and identity outside training") {
    Rng rng(5);
    const Tensor x = Tensor::full({1, 1000}, 1.0);
    const Tensor off = dropout(x, 0.5, rng, false);
    CHECK(off.same_node(x));
    const Tensor on = dropout(x, 0.5, rng, true);
    std::size_t kept = 0;
    for (double v : on.data()) {
        CHECK((v == 0.0 || v == 2.0));
        kept += v != 0.0;
    }
    CHECK(kept > 400);
    CHECK(kept < 600);
}

TEST_CASE("every differentiable op passes a central-difference check") {
    const double tol = 1e-6;
    const Tensor w = random_leaf({3, 4}, 21);
    const std::vector<int> labels{0, 3};

    SUBCASE("matmul") { CHECK(finite_diff_check([&](const Tensor& x) { return sum(matmul(x, w)); }, random_leaf({2, 3}, 1), 1e-6) < tol); }
    SUBCASE("softmax") {
        CHECK(finite_diff_check([&](const Tensor& x) { return sum(mul(softmax(x), w)); }, random_leaf({3, 4}, 2), 1e-6) < tol);
    }
    SUBCASE("log_softmax and pick") {
        CHECK(finite_diff_check([&](const Tensor& x) { return mean(pick(log_softmax(x), labels)); }, random_leaf({2, 4}, 3), 1e-6) < tol);
    }
    SUBCASE("relu away from the kink") {
        CHECK(finite_diff_check([&](const Tensor& x) { return sum(mul(relu(x), x)); }, random_leaf({2, 4}, 4, 0.1, 1.0), 1e-6) < tol);
    }
    SUBCASE("exp, neg, sub") {
        CHECK(finite_diff_check([&](const Tensor& x) { return sum(sub(asm2tv::exp(x), neg(mul(x, x)))); }, random_leaf({5}, 5), 1e-6) < tol);
    }
    SUBCASE("l2_norm") {
        CHECK(finite_diff_check([&](const Tensor& x) { return mean(l2_norm(x)); }, random_leaf({3, 4}, 6), 1e-6) < tol);
    }
    SUBCASE("concat, concat_rows, slice_rows") {
        CHECK(finite_diff_check(
                  [&](const Tensor& x) {
                      const Tensor c = concat({x, mul(x, x)});
                      const Tensor r = concat_rows({c, scale(c, 3.0)});
                      return sum(mul(slice_rows(r, 1, 3), slice_rows(r, 2, 4)));
                  },
                  random_leaf({2, 3}, 7), 1e-6) < tol);
    }
    SUBCASE("mul_scalar, element, row_sum") {
        CHECK(finite_diff_check([&](const Tensor& x) { return sum(mul_scalar(row_sum(x), element(x, 2))); }, random_leaf({2, 3}, 8), 1e-6) < tol);
    }
    SUBCASE("kl_rows in both arguments") {
        const Tensor p = softmax(random_leaf({2, 4}, 9)).detach();
        CHECK(finite_diff_check([&](const Tensor& x) { return sum(kl_rows(p, softmax(x))); }, random_leaf({2, 4}, 10), 1e-6) < tol);
        const Tensor q = softmax(random_leaf({2, 4}, 11)).detach();
        CHECK(finite_diff_check([&](const Tensor& x) { return sum(kl_rows(softmax(x), q)); }, random_leaf({2, 4}, 12), 1e-6) < tol);
    }
    SUBCASE("minimum below and above the cap") {
        CHECK(finite_diff_check([&](const Tensor& x) { return sum(mul(minimum(x, 0.0), x)); }, random_leaf({6}, 13), 1e-6) < tol);
    }
}
