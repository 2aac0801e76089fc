#include "soma/reid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace soma {
namespace reid {

using nlohmann::json;

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine_distance: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw std::domain_error("cosine_distance: zero vector");
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<int> GalleryIndex::identities() const {
    std::vector<int> ids;
    for (const auto& e : entries)
        if (std::find(ids.begin(), ids.end(), e.identity) == ids.end()) ids.push_back(e.identity);
    return ids;
}

std::vector<int> GalleryIndex::indices_of_identity(int identity) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].identity == identity) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> rank_single_shot(const Descriptor& query, int query_identity, int query_camera,
                                  const GalleryIndex& gallery, bool cross_camera_filter) {
    std::vector<int> candidates;
    for (std::size_t i = 0; i < gallery.entries.size(); ++i) {
        const auto& e = gallery.entries[i];
        if (cross_camera_filter && e.identity == query_identity && e.camera == query_camera)
            continue;
        candidates.push_back(static_cast<int>(i));
    }
    if (candidates.empty())
        throw std::invalid_argument("rank_single_shot: gallery empty after filtering");
    std::vector<double> dist(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k)
        dist[k] = cosine_distance(query.values,
                                  gallery.entries[static_cast<std::size_t>(candidates[k])]
                                      .descriptor.values);
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&dist](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    std::vector<int> out(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) out[k] = candidates[order[k]];
    return out;
}

std::vector<IdentityScore> rank_multi_shot(const std::vector<Descriptor>& probe_set,
                                           const GalleryIndex& gallery,
                                           std::vector<std::string>* warnings) {
    if (probe_set.empty())
        throw std::invalid_argument("rank_multi_shot: empty probe set");
    std::vector<IdentityScore> scores;
    for (int identity : gallery.identities()) {
        const auto idx = gallery.indices_of_identity(identity);
        if (idx.empty()) {
            if (warnings)
                warnings->push_back("identity " + std::to_string(identity) +
                                    " has no gallery images; excluded");
            continue;
        }
        double sum = 0.0;
        for (const auto& p : probe_set)
            for (int gi : idx)
                sum += cosine_distance(p.values,
                                       gallery.entries[static_cast<std::size_t>(gi)]
                                           .descriptor.values);
        scores.push_back({identity, sum / (static_cast<double>(probe_set.size()) * idx.size())});
    }
    std::stable_sort(scores.begin(), scores.end(),
                     [](const IdentityScore& a, const IdentityScore& b) {
                         return a.mean_distance < b.mean_distance;
                     });
    return scores;
}

CMCCurve cmc(const std::vector<int>& first_match_ranks, int num_ranks) {
    if (first_match_ranks.empty())
        throw std::invalid_argument("cmc: no queries");
    CMCCurve curve;
    curve.rates.assign(static_cast<std::size_t>(num_ranks), 0.0);
    for (int r : first_match_ranks) {
        if (r < 1) throw std::invalid_argument("cmc: ranks are 1-based");
        for (int k = r; k <= num_ranks; ++k) curve.rates[static_cast<std::size_t>(k - 1)] += 1.0;
    }
    for (auto& x : curve.rates) x /= static_cast<double>(first_match_ranks.size());
    return curve;
}

double average_precision(const std::vector<char>& relevance) {
    int relevant_seen = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < relevance.size(); ++k) {
        if (relevance[k]) {
            ++relevant_seen;
            sum += static_cast<double>(relevant_seen) / static_cast<double>(k + 1);
        }
    }
    if (relevant_seen == 0)
        throw std::invalid_argument("average_precision: no relevant entries");
    return sum / relevant_seen;
}

double mean_average_precision(const std::vector<double>& per_query_ap) {
    if (per_query_ap.empty())
        throw std::invalid_argument("mean_average_precision: no queries");
    double sum = 0.0;
    for (double x : per_query_ap) sum += x;
    return sum / static_cast<double>(per_query_ap.size());
}

static json report_json(const EvalReport& report) {
    json curve = json::array();
    for (std::size_t i = 0; i < report.curve.rates.size(); ++i)
        curve.push_back({{"rank", i + 1}, {"rate", report.curve.rates[i]}});
    return {{"protocol", report.protocol},
            {"seed", report.seed},
            {"round", report.round_index},
            {"cmc", curve},
            {"mAP", report.map},
            {"per_query_ap", report.per_query_ap}};
}

std::string report_to_json(const EvalReport& report) { return report_json(report).dump(2); }

void write_report_json(const std::string& path, const EvalReport& report) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_report_json: cannot open " + path);
    f << report_to_json(report) << "\n";
}

void write_cmc_csv(const std::string& path, const CMCCurve& curve) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_cmc_csv: cannot open " + path);
    f << "rank,rate\n";
    for (std::size_t i = 0; i < curve.rates.size(); ++i) f << (i + 1) << "," << curve.rates[i] << "\n";
}

CrossValidationSummary cross_validate(
    const std::vector<int>& identities, int rounds, double test_fraction, SeededRng& rng,
    const std::function<EvalReport(int, const std::vector<int>&)>& round_fn) {
    if (rounds < 1) throw std::invalid_argument("cross_validate: rounds must be >= 1");
    const int n_test = std::max(1, static_cast<int>(identities.size() * test_fraction));
    if (n_test >= static_cast<int>(identities.size()))
        throw std::invalid_argument("cross_validate: too few identities to partition");
    CrossValidationSummary summary;
    for (int round = 0; round < rounds; ++round) {
        std::vector<int> shuffled = identities;
        rng.shuffle(shuffled);
        std::vector<int> test_ids(shuffled.begin(), shuffled.begin() + n_test);
        std::sort(test_ids.begin(), test_ids.end());
        EvalReport report = round_fn(round, test_ids);
        report.round_index = round;
        summary.reports.push_back(std::move(report));
    }
    double sum = 0.0, sq = 0.0, map_sum = 0.0;
    for (const auto& r : summary.reports) {
        const double r1 = r.curve.rates.empty() ? 0.0 : r.curve.rates[0];
        sum += r1;
        sq += r1 * r1;
        map_sum += r.map;
    }
    const double n = static_cast<double>(summary.reports.size());
    summary.mean_rank1 = sum / n;
    summary.stddev_rank1 = n > 1 ? std::sqrt(std::max(0.0, sq / n - summary.mean_rank1 * summary.mean_rank1)) : 0.0;
    summary.mean_map = map_sum / n;
    return summary;
}

}  // namespace reid
}  // namespace soma
