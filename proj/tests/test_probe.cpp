#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "soma/probe.hpp"

using namespace soma;
using namespace soma::probe;

namespace {

ActivationMatrix matrix(int n_images, int n_neurons) {
    ActivationMatrix m;
    m.n_images = n_images;
    m.n_neurons = n_neurons;
    m.a.assign(static_cast<std::size_t>(n_images) * n_neurons, 0.0);
    return m;
}

}  // namespace

TEST_CASE("heaviside threshold") {
    CHECK(heaviside(0.5) == 1);
    CHECK(heaviside(1e-12) == 1);
    CHECK(heaviside(0.0) == 0);
    CHECK(heaviside(-0.3) == 0);
}

TEST_CASE("fire rate, activation and discernibility worked example") {
    // one neuron; C sees +0.5 and +0.2, R sees -0.1 and +0.3
    auto m = matrix(4, 1);
    m.at(0, 0) = 0.5;
    m.at(1, 0) = 0.2;
    m.at(2, 0) = -0.1;
    m.at(3, 0) = 0.3;
    const std::vector<int> C{0, 1}, R{2, 3};
    const double f = fire_rate(m, C, R, 0);
    const double a = activation_score(m, C, R, 0);
    CHECK(f == doctest::Approx(1.0 - 0.5).epsilon(1e-12));          // 0.5
    CHECK(a == doctest::Approx(0.5 * 0.35 - 0.5 * 0.1).epsilon(1e-12));  // 0.125
    CHECK(discernibility(f, a) == doctest::Approx(0.3125).epsilon(1e-12));
}

TEST_CASE("extremal and anti-correlated neurons") {
    auto m = matrix(4, 2);
    // neuron 0: perfectly selective (saturated +1 on C, -1 on R)
    m.at(0, 0) = 1.0;
    m.at(1, 0) = 1.0;
    m.at(2, 0) = -1.0;
    m.at(3, 0) = -1.0;
    // neuron 1: perfectly anti-correlated
    m.at(0, 1) = -1.0;
    m.at(1, 1) = -1.0;
    m.at(2, 1) = 1.0;
    m.at(3, 1) = 1.0;
    const std::vector<int> C{0, 1}, R{2, 3};
    CHECK(fire_rate(m, C, R, 0) == doctest::Approx(1.0));
    CHECK(activation_score(m, C, R, 0) == doctest::Approx(1.0));
    CHECK(discernibility(fire_rate(m, C, R, 0), activation_score(m, C, R, 0)) ==
          doctest::Approx(1.0));
    CHECK(discernibility(fire_rate(m, C, R, 1), activation_score(m, C, R, 1)) ==
          doctest::Approx(-1.0));
    // swapping C and R negates every score
    CHECK(fire_rate(m, R, C, 0) == doctest::Approx(-fire_rate(m, C, R, 0)));
    CHECK(activation_score(m, R, C, 0) == doctest::Approx(-activation_score(m, C, R, 0)));
}

TEST_CASE("scores are invariant to row order within each set") {
    SeededRng rng(3);
    auto m = matrix(8, 3);
    for (auto& x : m.a) x = rng.uniform(-1.0, 1.0);
    std::vector<int> C{0, 1, 2, 3}, R{4, 5, 6, 7};
    std::vector<int> Cs{3, 0, 2, 1}, Rs{7, 6, 4, 5};
    for (int n = 0; n < 3; ++n) {
        CHECK(fire_rate(m, C, R, n) == fire_rate(m, Cs, Rs, n));
        CHECK(activation_score(m, C, R, n) == activation_score(m, Cs, Rs, n));
    }
}

TEST_CASE("probe split validation") {
    ProbeSplit s;
    s.c_rows = {0, 1};
    s.r_rows = {2, 3};
    s.e_rows = {4, 5};
    s.characteristic = "gender==female";
    CHECK_NOTHROW(s.validate());
    auto overlap_lr = s;
    overlap_lr.r_rows = {1, 2};
    CHECK_THROWS_AS(overlap_lr.validate(), std::invalid_argument);
    auto overlap_e = s;
    overlap_e.e_rows = {3, 4};
    CHECK_THROWS_AS(overlap_e.validate(), std::invalid_argument);
    auto empty_c = s;
    empty_c.c_rows.clear();
    CHECK_THROWS_AS(empty_c.validate(), std::invalid_argument);
}

TEST_CASE("score table sorts descending by discernibility") {
    SeededRng rng(5);
    auto m = matrix(10, 6);
    for (auto& x : m.a) x = rng.uniform(-1.0, 1.0);
    // plant a strongly selective neuron 4
    for (int i = 0; i < 5; ++i) m.at(i, 4) = 0.95;
    for (int i = 5; i < 10; ++i) m.at(i, 4) = -0.95;
    ProbeSplit s;
    s.c_rows = {0, 1, 2, 3, 4};
    s.r_rows = {5, 6, 7, 8, 9};
    auto table = score_all(m, s);
    REQUIRE(table.rows.size() == 6);
    std::set<int> seen;
    for (const auto& r : table.rows) {
        seen.insert(r.neuron);
        CHECK(r.discernibility ==
              doctest::Approx((r.fire + r.activation) / 2.0).epsilon(1e-12));
    }
    CHECK(seen.size() == 6);
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        CHECK(table.rows[i - 1].discernibility >= table.rows[i].discernibility);
    CHECK(table.rows[0].neuron == 4);

    auto top = top_k(table, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0] == 4);
    CHECK_THROWS_AS(top_k(table), std::invalid_argument);  // default k=10 > 6 neurons
}

TEST_CASE("top_k bounds") {
    NeuronScoreTable table;
    for (int i = 0; i < 4; ++i) table.rows.push_back({i, 0, 0, 0.5 - 0.1 * i});
    CHECK(top_k(table, 4) == std::vector<int>{0, 1, 2, 3});
    CHECK_THROWS_AS(top_k(table, 0), std::invalid_argument);
    CHECK_THROWS_AS(top_k(table, 5), std::invalid_argument);
}

TEST_CASE("exploration ranks characteristic-bearing images first") {
    auto m = matrix(6, 5);
    const std::vector<int> S{0, 1};  // specialized neurons
    // row 4 activates S strongly, row 5 not at all
    m.at(4, 0) = 0.9;
    m.at(4, 1) = 0.8;
    m.at(4, 2) = 0.1;
    m.at(5, 0) = -0.9;
    m.at(5, 1) = -0.8;
    m.at(5, 2) = 0.9;
    m.at(5, 3) = 0.8;
    auto entries = explore(m, {4, 5}, S);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].row == 4);
    CHECK(entries[0].score == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(entries[0].overlap == 2);  // its top-2 neurons are exactly S
    CHECK(entries[1].row == 5);
    CHECK(entries[1].score == doctest::Approx(-0.85).epsilon(1e-12));
    CHECK(entries[1].overlap == 0);
}

TEST_CASE("permutation baseline separates signal from noise") {
    SeededRng data_rng(7);
    ProbeSplit s;
    for (int i = 0; i < 10; ++i) s.c_rows.push_back(i);
    for (int i = 10; i < 20; ++i) s.r_rows.push_back(i);

    // planted signal: neuron 0 discriminates perfectly
    auto planted = matrix(20, 4);
    for (auto& x : planted.a) x = data_rng.uniform(-0.2, 0.2);
    for (int i = 0; i < 10; ++i) planted.at(i, 0) = 0.9;
    for (int i = 10; i < 20; ++i) planted.at(i, 0) = -0.9;
    SeededRng rng1(11);
    auto r = permutation_baseline(planted, s, 199, rng1);
    CHECK(r.null_max_d.size() == 199);
    CHECK(r.observed_max_d == doctest::Approx(discernibility(1.0, 0.9)).epsilon(1e-9));
    CHECK(r.p_value <= 0.05);

    // pure noise: p should not be extreme
    auto noise = matrix(20, 4);
    SeededRng noise_rng(13);
    for (auto& x : noise.a) x = noise_rng.uniform(-1.0, 1.0);
    SeededRng rng2(17);
    auto rn = permutation_baseline(noise, s, 199, rng2);
    CHECK(rn.p_value > 0.05);
    CHECK(rn.p_value <= 1.0);

    // deterministic under the same stream
    SeededRng rng3(11);
    auto r2 = permutation_baseline(planted, s, 199, rng3);
    CHECK(r2.null_max_d == r.null_max_d);
    CHECK(r2.p_value == r.p_value);
}
