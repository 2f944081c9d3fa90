#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stv/rng.hpp"
#include "stv/tensor.hpp"

#include <cmath>
#include <limits>

using namespace stv;

namespace {

Tensor random_tensor(std::size_t m, std::size_t n, RngState& rng, double scale = 1.0) {
    Tensor t({m, n});
    for (double& v : t.data) v = rng.normal() * scale;
    return t;
}

}  // namespace

TEST_CASE("matmul identity and hand-expanded cases") {
    RngState rng(1);
    Tensor a = random_tensor(3, 3, rng);
    Tensor r = matmul(Tensor::identity(3), a);
    for (std::size_t i = 0; i < 9; ++i) CHECK(r.data[i] == doctest::Approx(a.data[i]).epsilon(1e-15));

    Tensor x = Tensor::from_rows(2, 2, {1, 2, 3, 4});
    Tensor y = Tensor::from_rows(2, 1, {0, 1});
    Tensor z = matmul(x, y);
    CHECK(z.shape == std::vector<std::size_t>{2, 1});
    CHECK(z.data[0] == 2.0);
    CHECK(z.data[1] == 4.0);

    Tensor zero({2, 3});
    Tensor b = random_tensor(3, 4, rng);
    Tensor zr = matmul(zero, b);
    for (double v : zr.data) CHECK(v == 0.0);

    CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), dim_error);
}

TEST_CASE("matmul associativity on random triples") {
    RngState rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        Tensor a = random_tensor(4, 3, rng);
        Tensor b = random_tensor(3, 5, rng);
        Tensor c = random_tensor(5, 2, rng);
        Tensor lhs = matmul(matmul(a, b), c);
        Tensor rhs = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < lhs.data.size(); ++i) {
            const double denom = std::max({1.0, std::abs(lhs.data[i]), std::abs(rhs.data[i])});
            CHECK(std::abs(lhs.data[i] - rhs.data[i]) / denom < 1e-9);
        }
    }
}

TEST_CASE("matmul transpose variants agree with explicit transposition") {
    RngState rng(3);
    Tensor a = random_tensor(4, 3, rng);
    Tensor b = random_tensor(4, 5, rng);
    Tensor at({3, 4});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) at.at(j, i) = a.at(i, j);
    Tensor ref = matmul(at, b);
    Tensor got = matmul_tn(a, b);
    for (std::size_t i = 0; i < ref.data.size(); ++i)
        CHECK(got.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));

    Tensor c = random_tensor(6, 3, rng);
    Tensor ct({3, 6});
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) ct.at(j, i) = c.at(i, j);
    Tensor ref2 = matmul(a, ct);
    Tensor got2 = matmul_nt(a, c);
    for (std::size_t i = 0; i < ref2.data.size(); ++i)
        CHECK(got2.data[i] == doctest::Approx(ref2.data[i]).epsilon(1e-12));
}

TEST_CASE("softmax_rows closed forms and stability") {
    Tensor eq = Tensor::row({2.5, 2.5, 2.5});
    Tensor r = softmax_rows(eq);
    for (double v : r.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    Tensor t = softmax_rows(Tensor::row({0.0, std::log(3.0)}));
    CHECK(t.data[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(t.data[1] == doctest::Approx(0.75).epsilon(1e-12));

    Tensor big = softmax_rows(Tensor::row({1000.0, 0.0}));
    CHECK(big.all_finite());
    CHECK(big.data[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(big.data[1] < 1e-300);

    Tensor bad = Tensor::row({1.0, std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(softmax_rows(bad), numeric_error);
}

TEST_CASE("softmax_rows rows sum to one for random inputs") {
    RngState rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        Tensor x = random_tensor(3, 7, rng, 20.0);
        Tensor s = softmax_rows(x);
        for (std::size_t i = 0; i < 3; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 7; ++j) {
                sum += s.at(i, j);
                CHECK(s.at(i, j) > 0.0);
                CHECK(s.at(i, j) <= 1.0);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("l2_norm") {
    CHECK(l2_norm(Tensor({4})) == 0.0);
    CHECK(l2_norm(Tensor::vec({3, 4})) == doctest::Approx(5.0).epsilon(1e-15));

    RngState rng(13);
    Tensor v = random_tensor(1, 31, rng);
    double brute = 0.0;
    for (double x : v.data) brute += x * x;
    CHECK(l2_norm(v) == doctest::Approx(std::sqrt(brute)).epsilon(1e-14));

    // zero iff all-zero
    Tensor w = Tensor::vec({0, 0, 1e-30, 0});
    CHECK(l2_norm(w) > 0.0);
}

TEST_CASE("layer_norm closed forms") {
    Tensor gain = Tensor::full({3}, 1.0);
    Tensor bias = Tensor::vec({0.5, -1.0, 2.0});
    Tensor c = layer_norm(Tensor::full({1, 3}, 4.0), gain, bias);
    // constant input: variance epsilon dominates, output == bias
    for (std::size_t j = 0; j < 3; ++j) CHECK(c.data[j] == doctest::Approx(bias.data[j]).epsilon(1e-12));

    Tensor g2 = Tensor::full({2}, 1.0);
    Tensor b2 = Tensor({2});
    Tensor r = layer_norm(Tensor::row({1.0, -1.0}), g2, b2);
    // mean 0, var 1 already; eps pulls values slightly inside +-1
    CHECK(r.data[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.data[1] == doctest::Approx(-1.0).epsilon(1e-4));

    RngState rng(17);
    Tensor x = random_tensor(5, 16, rng, 3.0);
    Tensor g = Tensor::full({16}, 1.7);
    Tensor b = Tensor({16});
    Tensor y = layer_norm(x, g, b);
    for (std::size_t i = 0; i < 5; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < 16; ++j) mean += y.at(i, j);
        CHECK(std::abs(mean / 16.0) < 1e-12);
    }

    CHECK_THROWS_AS(layer_norm(Tensor({4, 1}), Tensor({1}), Tensor({1})), dim_error);
}

TEST_CASE("argmax_with_ties") {
    CHECK(argmax_with_ties(Tensor::row({0, 5, 5})) == 1);
    CHECK(argmax_with_ties(Tensor::row({7})) == 0);
    CHECK_THROWS_AS(argmax_with_ties(Tensor::row({})), dim_error);

    RngState rng(19);
    for (int rep = 0; rep < 30; ++rep) {
        Tensor v = random_tensor(1, 9, rng);
        std::size_t best = 0;
        for (std::size_t j = 1; j < 9; ++j)
            if (v.data[j] > v.data[best]) best = j;
        CHECK(argmax_with_ties(v) == best);
    }
}

TEST_CASE("rng streams are reproducible and split streams disjoint") {
    RngState a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

    RngState base(42);
    RngState s1 = base.split("tasks");
    RngState s2 = base.split("training");
    CHECK(s1.seed != s2.seed);
    CHECK(s1.next_u64() != s2.next_u64());

    // same (seed, counter) resumes identically
    RngState c(9, 0);
    c.next_u64();
    c.next_u64();
    RngState d(9, 2);
    CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("rng uniform range and below bounds") {
    RngState rng(5);
    for (int i = 0; i < 5000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 2000; ++i) CHECK(rng.below(7) < 7);
    CHECK(rng.below(1) == 0);
    CHECK_THROWS(rng.below(0));
}

TEST_CASE("sample_without_replacement yields distinct indices") {
    RngState rng(23);
    auto idx = rng.sample_without_replacement(10, 10);
    std::vector<bool> seen(10, false);
    for (std::size_t i : idx) {
        CHECK(!seen[i]);
        seen[i] = true;
    }
    CHECK_THROWS(rng.sample_without_replacement(3, 4));
}

TEST_CASE("sample_categorical matches weights roughly") {
    RngState rng(31);
    std::vector<double> w = {1.0, 3.0};
    int hits = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i)
        if (sample_categorical(w, rng) == 1) ++hits;
    const double f = static_cast<double>(hits) / n;
    CHECK(std::abs(f - 0.75) < 0.02);
}
