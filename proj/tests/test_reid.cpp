#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "soma/reid.hpp"

using namespace soma;
using namespace soma::reid;

namespace {

std::vector<double> random_vec(int n, SeededRng& rng) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.normal(0.0, 1.0);
    return v;
}

GalleryIndex random_gallery(int n_entries, int dim, int n_identities, SeededRng& rng) {
    GalleryIndex g;
    for (int i = 0; i < n_entries; ++i) {
        GalleryEntry e;
        e.descriptor.values = random_vec(dim, rng);
        e.descriptor.image_id = i;
        e.identity = i % n_identities;
        e.camera = static_cast<int>(rng.uniform() * 3.0);
        g.entries.push_back(std::move(e));
    }
    return g;
}

}  // namespace

TEST_CASE("cosine distance identities") {
    std::vector<double> v{1.0, 2.0, -3.0};
    std::vector<double> neg{-1.0, -2.0, 3.0};
    std::vector<double> a{1.0, 0.0}, b{0.0, 5.0};
    CHECK(cosine_distance(v, v) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cosine_distance(v, neg) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(cosine_distance(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    // scale invariance
    std::vector<double> v3{3.0, 6.0, -9.0};
    std::vector<double> w{0.4, -1.0, 0.7};
    CHECK(cosine_distance(v, w) == doctest::Approx(cosine_distance(v3, w)).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_distance({0.0, 0.0}, {1.0, 0.0}), std::domain_error);
    CHECK_THROWS_AS(cosine_distance({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("descriptor is the mirror-concat of embeddings") {
    auto cfg = NetworkConfig::tiny();
    Network<float> net;
    SeededRng rng(31);
    net.build(cfg, rng);
    Image img(cfg.in_w, cfg.in_h);
    SeededRng pr(32);
    for (auto& p : img.rgb) p = static_cast<unsigned char>(pr.uniform() * 256.0);

    auto d = describe(net, img, 5);
    CHECK(d.image_id == 5);
    REQUIRE(static_cast<int>(d.values.size()) == 2 * cfg.embed_dim);
    // mirroring the input swaps the two halves
    auto dm = describe(net, hflip(img));
    for (int k = 0; k < cfg.embed_dim; ++k) {
        CHECK(dm.values[static_cast<std::size_t>(k)] ==
              d.values[static_cast<std::size_t>(cfg.embed_dim + k)]);
        CHECK(dm.values[static_cast<std::size_t>(cfg.embed_dim + k)] ==
              d.values[static_cast<std::size_t>(k)]);
    }
    // default profile yields the full 512-dim descriptor
    CHECK(2 * NetworkConfig::mini(10).embed_dim == 512);
}

TEST_CASE("single-shot ranking matches a brute-force oracle") {
    SeededRng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        auto gallery = random_gallery(30, 8, 6, rng);
        Descriptor q;
        q.values = random_vec(8, rng);
        const int qid = trial % 6;
        const int qcam = trial % 3;
        for (bool filter : {false, true}) {
            auto ranked = rank_single_shot(q, qid, qcam, gallery, filter);

            std::vector<int> expect;
            for (int i = 0; i < 30; ++i) {
                const auto& e = gallery.entries[static_cast<std::size_t>(i)];
                if (filter && e.identity == qid && e.camera == qcam) continue;
                expect.push_back(i);
            }
            std::stable_sort(expect.begin(), expect.end(), [&](int a, int b) {
                return cosine_distance(q.values,
                                       gallery.entries[static_cast<std::size_t>(a)].descriptor.values) <
                       cosine_distance(q.values,
                                       gallery.entries[static_cast<std::size_t>(b)].descriptor.values);
            });
            CHECK(ranked == expect);
        }
    }
}

TEST_CASE("single-shot ranking is scale invariant and filters correctly") {
    SeededRng rng(43);
    auto gallery = random_gallery(20, 6, 4, rng);
    Descriptor q;
    q.values = random_vec(6, rng);
    auto base = rank_single_shot(q, 0, 0, gallery, true);
    // no entry of identity 0 seen by camera 0 survives the filter
    for (int i : base) {
        const auto& e = gallery.entries[static_cast<std::size_t>(i)];
        CHECK((e.identity != 0 || e.camera != 0));
    }
    auto scaled = gallery;
    for (auto& e : scaled.entries)
        for (auto& x : e.descriptor.values) x *= 3.0;
    CHECK(rank_single_shot(q, 0, 0, scaled, true) == base);

    GalleryIndex tiny;
    GalleryEntry only;
    only.descriptor.values = {1.0, 0.0};
    only.identity = 0;
    only.camera = 0;
    tiny.entries.push_back(only);
    CHECK_THROWS_AS(rank_single_shot(q, 0, 0, tiny, true), std::invalid_argument);
}

TEST_CASE("multi-shot ranking matches a brute-force oracle") {
    SeededRng rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        auto gallery = random_gallery(24, 8, 5, rng);
        std::vector<Descriptor> probes;
        for (int i = 0; i < 3; ++i) {
            Descriptor d;
            d.values = random_vec(8, rng);
            probes.push_back(std::move(d));
        }
        auto scores = rank_multi_shot(probes, gallery);
        REQUIRE(scores.size() == 5);
        for (std::size_t k = 1; k < scores.size(); ++k)
            CHECK(scores[k - 1].mean_distance <= scores[k].mean_distance);
        for (const auto& s : scores) {
            double sum = 0.0;
            int count = 0;
            for (const auto& e : gallery.entries) {
                if (e.identity != s.identity) continue;
                for (const auto& p : probes) {
                    sum += cosine_distance(p.values, e.descriptor.values);
                    ++count;
                }
            }
            CHECK(s.mean_distance == doctest::Approx(sum / count).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(rank_multi_shot({}, GalleryIndex{}), std::invalid_argument);
}

TEST_CASE("cmc curve from first-match ranks") {
    auto curve = cmc({1, 2, 2, 5}, 5);
    CHECK(curve.at(1) == doctest::Approx(0.25));
    CHECK(curve.at(2) == doctest::Approx(0.75));
    CHECK(curve.at(3) == doctest::Approx(0.75));
    CHECK(curve.at(4) == doctest::Approx(0.75));
    CHECK(curve.at(5) == doctest::Approx(1.0));
    for (std::size_t i = 1; i < curve.rates.size(); ++i)
        CHECK(curve.rates[i] >= curve.rates[i - 1]);
    CHECK_THROWS_AS(cmc({}, 5), std::invalid_argument);
    CHECK_THROWS_AS(cmc({0}, 5), std::invalid_argument);
}

TEST_CASE("random descriptors give chance-level rank 1") {
    SeededRng rng(53);
    const int G = 10, dim = 16, n_queries = 2000;
    std::vector<int> first_ranks;
    for (int qi = 0; qi < n_queries; ++qi) {
        auto gallery = random_gallery(G, dim, G, rng);  // one image per identity
        Descriptor q;
        q.values = random_vec(dim, rng);
        const int qid = qi % G;
        auto ranked = rank_single_shot(q, qid, -1, gallery, false);
        for (std::size_t k = 0; k < ranked.size(); ++k) {
            if (gallery.entries[static_cast<std::size_t>(ranked[k])].identity == qid) {
                first_ranks.push_back(static_cast<int>(k) + 1);
                break;
            }
        }
    }
    auto curve = cmc(first_ranks, G);
    CHECK(curve.at(1) == doctest::Approx(1.0 / G).epsilon(0.25));
    CHECK(curve.at(G) == doctest::Approx(1.0));
}

TEST_CASE("average precision worked examples") {
    CHECK(average_precision({1, 0, 1}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
    CHECK(average_precision({0, 0, 1, 0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(average_precision({1, 1, 1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(average_precision({0, 0, 0}), std::invalid_argument);

    std::vector<double> aps{0.5, 0.75, 1.0};
    CHECK(mean_average_precision(aps) ==
          doctest::Approx(std::accumulate(aps.begin(), aps.end(), 0.0) / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(mean_average_precision({}), std::invalid_argument);
}

TEST_CASE("cross validation is deterministic and partitions correctly") {
    std::vector<int> ids(20);
    std::iota(ids.begin(), ids.end(), 100);

    auto run = [&](std::uint64_t seed) {
        SeededRng rng(seed);
        std::vector<std::vector<int>> seen;
        auto summary = cross_validate(ids, 4, 0.25, rng,
                                      [&](int /*round*/, const std::vector<int>& test_ids) {
                                          seen.push_back(test_ids);
                                          EvalReport r;
                                          r.curve.rates = {0.5, 1.0};
                                          r.map = 0.4;
                                          return r;
                                      });
        return std::make_pair(summary, seen);
    };
    auto [s1, seen1] = run(7);
    auto [s2, seen2] = run(7);
    REQUIRE(s1.reports.size() == 4);
    CHECK(seen1 == seen2);
    for (const auto& t : seen1) {
        CHECK(t.size() == 5);  // 25% of 20
        CHECK(std::is_sorted(t.begin(), t.end()));
        for (int id : t) CHECK(std::find(ids.begin(), ids.end(), id) != ids.end());
    }
    CHECK(s1.mean_rank1 == doctest::Approx(0.5));
    CHECK(s1.stddev_rank1 == doctest::Approx(0.0));
    CHECK(s1.mean_map == doctest::Approx(0.4));
    for (int i = 0; i < 4; ++i) CHECK(s1.reports[static_cast<std::size_t>(i)].round_index == i);

    SeededRng rng(1);
    CHECK_THROWS_AS(cross_validate({1}, 2, 0.5, rng,
                                   [](int, const std::vector<int>&) { return EvalReport{}; }),
                    std::invalid_argument);
}
