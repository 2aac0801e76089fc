#include "soma/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>

namespace soma {
namespace pipeline {

namespace fs = std::filesystem;

int IdentityMap::class_of(int subject_id) const {
    auto it = std::lower_bound(subject_ids.begin(), subject_ids.end(), subject_id);
    if (it == subject_ids.end() || *it != subject_id)
        throw std::invalid_argument("identity_map: unknown subject id " +
                                    std::to_string(subject_id));
    return static_cast<int>(it - subject_ids.begin());
}

IdentityMap identity_map(const synth::DatasetManifest& manifest) {
    std::set<int> ids;
    for (const auto& r : manifest.records) ids.insert(r.subject_id);
    IdentityMap m;
    m.subject_ids.assign(ids.begin(), ids.end());
    return m;
}

Image load_record_image(const synth::DatasetManifest& manifest, const synth::ImageRecord& rec,
                        const std::string& root_dir) {
    const fs::path direct(rec.path);
    const fs::path joined = fs::path(root_dir) / rec.path;
    if (fs::exists(joined)) return read_ppm(joined.string());
    if (direct.is_absolute() && fs::exists(direct)) return read_ppm(direct.string());
    if (manifest.n_female + manifest.n_male > 0 && rec.camera_id < 0)
        return synth::render_record(manifest, rec);
    throw std::runtime_error("load_record_image: missing image " + rec.path);
}

std::vector<const synth::ImageRecord*> split_records(const synth::DatasetManifest& manifest,
                                                     const std::string& split) {
    std::vector<const synth::ImageRecord*> out;
    for (const auto& r : manifest.records)
        if (split.empty() || r.split == split) out.push_back(&r);
    return out;
}

LabeledSet labeled_split(const synth::DatasetManifest& manifest, const std::string& root_dir,
                         const std::string& split, const IdentityMap& ids) {
    LabeledSet set;
    for (const auto* r : split_records(manifest, split)) {
        set.images.push_back(load_record_image(manifest, *r, root_dir));
        set.labels.push_back(ids.class_of(r->subject_id));
    }
    return set;
}

namespace {

std::map<int, std::vector<int>> by_identity(const std::vector<TaggedDescriptor>& descriptors) {
    std::map<int, std::vector<int>> groups;
    for (std::size_t i = 0; i < descriptors.size(); ++i)
        groups[descriptors[i].identity].push_back(static_cast<int>(i));
    return groups;
}

}  // namespace

reid::EvalReport single_shot_round(const std::vector<TaggedDescriptor>& descriptors,
                                   SeededRng& rng) {
    auto groups = by_identity(descriptors);
    if (groups.size() < 2)
        throw std::invalid_argument("single_shot_round: need at least 2 identities");

    reid::GalleryIndex gallery;
    std::set<int> in_gallery;
    bool have_cameras = false;
    for (auto& [identity, rows] : groups) {
        const int pick = rows[static_cast<std::size_t>(rng.uniform() * rows.size())];
        in_gallery.insert(pick);
        reid::GalleryEntry e;
        e.descriptor = descriptors[static_cast<std::size_t>(pick)].descriptor;
        e.identity = identity;
        e.camera = descriptors[static_cast<std::size_t>(pick)].camera;
        if (e.camera >= 0) have_cameras = true;
        gallery.entries.push_back(std::move(e));
    }

    reid::EvalReport report;
    report.protocol = "single-shot";
    std::vector<int> first_ranks;
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (in_gallery.count(static_cast<int>(i))) continue;
        const auto& q = descriptors[i];
        auto ranked = reid::rank_single_shot(q.descriptor, q.identity, q.camera, gallery,
                                             have_cameras);
        std::vector<char> relevance;
        int first = -1;
        for (std::size_t k = 0; k < ranked.size(); ++k) {
            const bool rel =
                gallery.entries[static_cast<std::size_t>(ranked[k])].identity == q.identity;
            relevance.push_back(rel ? 1 : 0);
            if (rel && first < 0) first = static_cast<int>(k) + 1;
        }
        if (first < 0) continue;  // query identity filtered out of the gallery
        first_ranks.push_back(first);
        report.per_query_ap.push_back(reid::average_precision(relevance));
    }
    report.curve = reid::cmc(first_ranks, static_cast<int>(gallery.entries.size()));
    report.map = reid::mean_average_precision(report.per_query_ap);
    return report;
}

reid::EvalReport multi_shot_round(const std::vector<TaggedDescriptor>& descriptors,
                                  SeededRng& rng) {
    auto groups = by_identity(descriptors);
    if (groups.size() < 2)
        throw std::invalid_argument("multi_shot_round: need at least 2 identities");

    reid::GalleryIndex gallery;
    std::map<int, std::vector<int>> probe_rows;
    for (auto& [identity, rows] : groups) {
        auto shuffled = rows;
        rng.shuffle(shuffled);
        const std::size_t n_gallery = std::max<std::size_t>(1, shuffled.size() / 2);
        for (std::size_t k = 0; k < shuffled.size(); ++k) {
            if (k < n_gallery) {
                reid::GalleryEntry e;
                e.descriptor = descriptors[static_cast<std::size_t>(shuffled[k])].descriptor;
                e.identity = identity;
                gallery.entries.push_back(std::move(e));
            } else {
                probe_rows[identity].push_back(shuffled[k]);
            }
        }
    }

    reid::EvalReport report;
    report.protocol = "multi-shot";
    std::vector<int> first_ranks;
    for (auto& [identity, rows] : probe_rows) {
        if (rows.empty()) continue;
        std::vector<reid::Descriptor> probes;
        for (int r : rows) probes.push_back(descriptors[static_cast<std::size_t>(r)].descriptor);
        auto scores = reid::rank_multi_shot(probes, gallery);
        for (std::size_t k = 0; k < scores.size(); ++k) {
            if (scores[k].identity == identity) {
                first_ranks.push_back(static_cast<int>(k) + 1);
                report.per_query_ap.push_back(1.0 / static_cast<double>(k + 1));
                break;
            }
        }
    }
    if (first_ranks.empty())
        throw std::invalid_argument("multi_shot_round: no identity had both probes and gallery");
    report.curve = reid::cmc(first_ranks, static_cast<int>(groups.size()));
    report.map = reid::mean_average_precision(report.per_query_ap);
    return report;
}

ProtocolSummary run_protocol(const std::vector<TaggedDescriptor>& descriptors,
                             const std::string& protocol, int rounds, std::uint64_t seed) {
    if (rounds < 1) throw std::invalid_argument("run_protocol: rounds must be >= 1");
    if (protocol != "single-shot" && protocol != "multi-shot")
        throw std::invalid_argument("run_protocol: unknown protocol " + protocol);
    SeededRng base(seed);
    ProtocolSummary summary;
    for (int round = 0; round < rounds; ++round) {
        SeededRng rng = base.substream(static_cast<std::uint64_t>(round));
        auto report = protocol == "single-shot" ? single_shot_round(descriptors, rng)
                                                : multi_shot_round(descriptors, rng);
        report.seed = seed;
        report.round_index = round;
        summary.rounds.push_back(std::move(report));
    }
    const auto& first = summary.rounds.front().curve.rates;
    summary.mean_curve.rates.assign(first.size(), 0.0);
    double sum = 0.0, sq = 0.0, map_sum = 0.0;
    for (const auto& r : summary.rounds) {
        for (std::size_t i = 0; i < first.size(); ++i)
            summary.mean_curve.rates[i] += r.curve.rates[i];
        sum += r.curve.rates[0];
        sq += r.curve.rates[0] * r.curve.rates[0];
        map_sum += r.map;
    }
    const double n = static_cast<double>(summary.rounds.size());
    for (auto& x : summary.mean_curve.rates) x /= n;
    summary.mean_rank1 = sum / n;
    summary.stddev_rank1 = std::sqrt(std::max(0.0, sq / n - summary.mean_rank1 * summary.mean_rank1));
    summary.mean_map = map_sum / n;
    return summary;
}

}  // namespace pipeline
}  // namespace soma
