#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <unistd.h>

#include "oracles.hpp"
#include "siglev/dataset.hpp"
#include "siglev/rng.hpp"

using namespace siglev;

namespace {

std::string write_temp(const std::string& contents) {
    char path[] = "/tmp/siglev_test_XXXXXX";
    const int fd = mkstemp(path);
    REQUIRE(fd >= 0);
    close(fd);
    std::ofstream out(path);
    out << contents;
    return path;
}

}  // namespace

TEST_CASE("load_csv: basic parse, response removal, row order") {
    const auto path = write_temp("a,b,y\n1,2,5\n0,1,3\n2,0,1\n");
    const auto d = load_csv(path, std::string("y"));
    CHECK(d.n() == 3);
    CHECK(d.p() == 2);
    CHECK(d.y == std::vector<double>{5, 3, 1});
    CHECK(d.x(0, 0) == 1.0);
    CHECK(d.x(2, 1) == 0.0);
    REQUIRE(d.column_names.has_value());
    CHECK((*d.column_names)[0] == "a");
    std::remove(path.c_str());
}

TEST_CASE("load_csv: missing response column") {
    const auto path = write_temp("a,b,y\n1,2,5\n0,1,3\n");
    CHECK_THROWS_WITH_AS(load_csv(path, std::string("z")), doctest::Contains("response column absent"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("load_csv: non-finite cell is rejected with its location") {
    const auto path = write_temp("a,b,y\n1,2,5\n0,NaN,3\n");
    CHECK_THROWS_WITH_AS(load_csv(path, std::string("y")), doctest::Contains("row 2, column 2"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("load_csv: missing file and response by index") {
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", std::string("y")), std::runtime_error);
    const auto path = write_temp("1,2,5\n0,1,3\n");
    const auto d = load_csv(path, std::size_t{2}, /*has_header=*/false);
    CHECK(d.p() == 2);
    CHECK(d.y == std::vector<double>{5, 3});
    std::remove(path.c_str());
}

TEST_CASE("write_csv then load_csv is the identity on values") {
    Rng rng(11, 0);
    LabeledDataset d;
    d.x = oracle::random_matrix(rng, 17, 5);
    d.y.resize(17);
    for (auto& v : d.y) v = rng.next_normal() * 1e-7;  // exercise round-trip on small magnitudes
    char path[] = "/tmp/siglev_rt_XXXXXX.csv";
    const auto file = write_temp("");
    write_csv(d, file);
    const auto back = load_csv(file, std::string("y"));
    REQUIRE(back.n() == d.n());
    REQUIRE(back.p() == d.p());
    for (std::size_t i = 0; i < d.n(); ++i) {
        CHECK(back.y[i] == d.y[i]);
        for (std::size_t j = 0; j < d.p(); ++j) CHECK(back.x(i, j) == d.x(i, j));
    }
    std::remove(file.c_str());
    (void)path;
}

TEST_CASE("add_pairwise_interactions: column counts") {
    Rng rng(3, 0);
    LabeledDataset d;
    d.x = oracle::random_matrix(rng, 4, 3);
    d.y = {1, 2, 3, 4};
    CHECK(add_pairwise_interactions(d).p() == 6);

    LabeledDataset wide;
    wide.x = oracle::random_matrix(rng, 5, 21);
    wide.y = {1, 2, 3, 4, 5};
    CHECK(add_pairwise_interactions(wide).p() == 231);

    const auto unchanged = add_pairwise_interactions(d, std::vector<std::size_t>{0});
    CHECK(unchanged.p() == 3);

    CHECK_THROWS_AS(add_pairwise_interactions(d, std::vector<std::size_t>{7}),
                    std::invalid_argument);
}

TEST_CASE("add_pairwise_interactions: values and names") {
    LabeledDataset d;
    d.x = Matrix(2, 3);
    d.x(0, 0) = 1;
    d.x(0, 1) = 2;
    d.x(0, 2) = 3;
    d.x(1, 0) = -1;
    d.x(1, 1) = 4;
    d.x(1, 2) = 0.5;
    d.y = {0, 0};
    d.column_names = std::vector<std::string>{"a", "b", "c"};
    const auto out = add_pairwise_interactions(d);
    CHECK(out.x(0, 3) == 2.0);   // a*b
    CHECK(out.x(0, 4) == 3.0);   // a*c
    CHECK(out.x(0, 5) == 6.0);   // b*c
    CHECK(out.x(1, 3) == -4.0);
    CHECK((*out.column_names)[3] == "a\xC3\x97" "b");

    // property: count formula over random subsets
    Rng rng(9, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t p = 2 + rng.next_below(8);
        LabeledDataset t;
        t.x = oracle::random_matrix(rng, 3, p);
        t.y = {0, 0, 0};
        std::vector<std::size_t> subset;
        for (std::size_t j = 0; j < p; ++j) {
            if (rng.next_unit() < 0.6) subset.push_back(j);
        }
        const auto got = add_pairwise_interactions(t, subset);
        CHECK(got.p() == p + subset.size() * (subset.size() - 1) / 2);
    }
}

TEST_CASE("drop_collinear: duplicate direction and orthonormal cases") {
    // columns (v, 2v, u) with u orthogonal to v
    LabeledDataset d;
    d.x = Matrix(4, 3);
    const double v[4] = {1, 1, 1, 1};
    const double u[4] = {1, -1, 1, -1};
    for (std::size_t i = 0; i < 4; ++i) {
        d.x(i, 0) = v[i];
        d.x(i, 1) = 2 * v[i];
        d.x(i, 2) = u[i];
    }
    d.y = {0, 0, 0, 0};
    auto [pruned, kept] = drop_collinear(d, 1e-8);
    CHECK(kept == std::vector<std::size_t>{0, 2});
    CHECK(pruned.p() == 2);

    LabeledDataset ortho;
    ortho.x = Matrix(4, 4);
    for (std::size_t i = 0; i < 4; ++i) ortho.x(i, i) = 1.0;
    ortho.y = {0, 0, 0, 0};
    auto [pruned2, kept2] = drop_collinear(ortho, 1e-8);
    CHECK(kept2.size() == 4);
}

TEST_CASE("drop_collinear: rank oracle on random matrix with a duplicated column") {
    Rng rng(21, 0);
    LabeledDataset d;
    d.x = Matrix(50, 41);
    Matrix base = oracle::random_matrix(rng, 50, 40);
    for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t j = 0; j < 40; ++j) d.x(i, j) = base(i, j);
        d.x(i, 40) = base(i, 7);  // duplicate
    }
    d.y.assign(50, 0.0);
    auto [pruned, kept] = drop_collinear(d, 1e-8);
    CHECK(kept.size() == 40);
    CHECK(oracle::svd_rank(base, 1e-10) == 40);

    // kept block has numerically full column rank per SVD oracle
    CHECK(oracle::svd_rank(pruned.x, 1e-8) == pruned.p());
}

TEST_CASE("drop_collinear: full column rank property on random instances") {
    Rng rng(77, 0);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t n = 20 + rng.next_below(10);
        const std::size_t p = 5 + rng.next_below(10);
        LabeledDataset d;
        d.x = oracle::random_matrix(rng, n, p + 3);
        // plant some exact linear combinations
        for (std::size_t i = 0; i < n; ++i) {
            d.x(i, p) = d.x(i, 0) + d.x(i, 1);
            d.x(i, p + 1) = 3.0 * d.x(i, 2);
            d.x(i, p + 2) = d.x(i, 3) - 2.0 * d.x(i, 4);
        }
        d.y.assign(n, 0.0);
        auto [pruned, kept] = drop_collinear(d, 1e-8);
        CHECK(kept.size() == p);
        CHECK(oracle::svd_rank(pruned.x, 1e-8) == pruned.p());
    }
}

TEST_CASE("top_t_value_columns ranks dominant covariates first") {
    Rng rng(5, 2);
    LabeledDataset d;
    d.x = oracle::random_matrix(rng, 200, 6);
    d.y.resize(200);
    for (std::size_t i = 0; i < 200; ++i) {
        d.y[i] = 5.0 * d.x(i, 2) + 1.5 * d.x(i, 4) + 0.1 * rng.next_normal();
    }
    const auto top2 = top_t_value_columns(d, 2);
    CHECK(top2 == std::vector<std::size_t>{2, 4});
    CHECK_THROWS_AS(top_t_value_columns(d, 9), std::invalid_argument);
}

TEST_CASE("binary cache round-trips datasets bit-exactly") {
    Rng rng(31, 0);
    LabeledDataset d;
    d.x = oracle::random_matrix(rng, 23, 7);
    d.y.resize(23);
    for (auto& v : d.y) v = rng.next_normal();
    d.whitened = true;
    d.column_names = std::vector<std::string>{"c1", "c2", "c3", "c4", "c5", "c6", "c7"};
    const auto file = write_temp("");
    save_cache(d, file);
    const auto back = load_cache(file);
    CHECK(back.x == d.x);
    CHECK(back.y == d.y);
    CHECK(back.whitened == d.whitened);
    CHECK(back.column_names == d.column_names);
    CHECK_THROWS_AS(load_cache("/nonexistent.bin"), std::runtime_error);
    std::remove(file.c_str());
}
