#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "soma/image.hpp"
#include "soma/network.hpp"
#include "soma/rng.hpp"

namespace soma {
namespace reid {

// Mirror-concat descriptor: embedding of the image followed by the embedding
// of its horizontal mirror. Length 2 * embed_dim (512 under defaults).
struct Descriptor {
    std::vector<double> values;
    int image_id = -1;
};

template <class T>
Descriptor describe(Network<T>& net, const Image& img, int image_id = -1) {
    auto e1 = net.extract_embedding(image_to_tensor<T>(img));
    auto e2 = net.extract_embedding(image_to_tensor<T>(hflip(img)));
    Descriptor d;
    d.image_id = image_id;
    d.values.reserve(e1.numel() + e2.numel());
    for (auto x : e1.v) d.values.push_back(static_cast<double>(x));
    for (auto x : e2.v) d.values.push_back(static_cast<double>(x));
    return d;
}

// 1 - cosine similarity; range [0,2]. Throws on a zero vector.
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

struct GalleryEntry {
    Descriptor descriptor;
    int identity = 0;
    int camera = -1;
};

struct GalleryIndex {
    std::vector<GalleryEntry> entries;

    std::vector<int> identities() const;  // distinct, in first-appearance order
    std::vector<int> indices_of_identity(int identity) const;
};

// Ascending cosine distance over the filtered gallery; ties broken by gallery
// index. The cross-camera filter removes entries of the query's identity seen
// by the query's camera. Returns gallery entry indices.
std::vector<int> rank_single_shot(const Descriptor& query, int query_identity, int query_camera,
                                  const GalleryIndex& gallery, bool cross_camera_filter);

struct IdentityScore {
    int identity = 0;
    double mean_distance = 0.0;
};

// score(identity) = mean cosine distance over all (probe, gallery-image)
// pairs; ascending. Identities with no gallery images are skipped.
std::vector<IdentityScore> rank_multi_shot(const std::vector<Descriptor>& probe_set,
                                           const GalleryIndex& gallery,
                                           std::vector<std::string>* warnings = nullptr);

struct CMCCurve {
    std::vector<double> rates;  // rates[r-1] = fraction matched at rank <= r

    double at(int rank) const { return rates.at(static_cast<std::size_t>(rank - 1)); }
};

// first_match_ranks: 1-based rank of the first correct match per query.
CMCCurve cmc(const std::vector<int>& first_match_ranks, int num_ranks);

// relevance flags in ranked order; AP = mean over relevant positions k of
// (relevant in top k) / k. Throws when nothing is relevant.
double average_precision(const std::vector<char>& relevance);

double mean_average_precision(const std::vector<double>& per_query_ap);

struct EvalReport {
    CMCCurve curve;
    double map = 0.0;
    std::vector<double> per_query_ap;
    std::string protocol;  // "single-shot" | "multi-shot"
    std::uint64_t seed = 0;
    int round_index = 0;
};

std::string report_to_json(const EvalReport& report);
void write_report_json(const std::string& path, const EvalReport& report);
void write_cmc_csv(const std::string& path, const CMCCurve& curve);

struct CrossValidationSummary {
    std::vector<EvalReport> reports;
    double mean_rank1 = 0.0;
    double stddev_rank1 = 0.0;
    double mean_map = 0.0;
};

// Runs round_fn once per round with a seeded identity partition and
// aggregates rank-1 statistics.
CrossValidationSummary cross_validate(
    const std::vector<int>& identities, int rounds, double test_fraction, SeededRng& rng,
    const std::function<EvalReport(int round, const std::vector<int>& test_identities)>& round_fn);

}  // namespace reid
}  // namespace soma
