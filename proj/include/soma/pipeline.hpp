#pragma once

#include <string>
#include <vector>

#include "soma/reid.hpp"
#include "soma/synthset.hpp"
#include "soma/training.hpp"

namespace soma {
namespace pipeline {

// Contiguous class labels for the subject ids present in a manifest.
struct IdentityMap {
    std::vector<int> subject_ids;  // class index -> subject id, ascending

    int num_classes() const { return static_cast<int>(subject_ids.size()); }
    int class_of(int subject_id) const;
};

IdentityMap identity_map(const synth::DatasetManifest& manifest);

// Load the image for one record: from disk when present, otherwise re-render
// from manifest provenance. Throws when neither works.
Image load_record_image(const synth::DatasetManifest& manifest, const synth::ImageRecord& rec,
                        const std::string& root_dir);

// Records of one split ("" = all) as a labeled classification set.
LabeledSet labeled_split(const synth::DatasetManifest& manifest, const std::string& root_dir,
                         const std::string& split, const IdentityMap& ids);

std::vector<const synth::ImageRecord*> split_records(const synth::DatasetManifest& manifest,
                                                     const std::string& split);

// A descriptor tagged for ranking.
struct TaggedDescriptor {
    reid::Descriptor descriptor;
    int identity = 0;
    int camera = -1;
};

template <class T>
std::vector<TaggedDescriptor> describe_records(Network<T>& net,
                                               const synth::DatasetManifest& manifest,
                                               const std::vector<const synth::ImageRecord*>& recs,
                                               const std::string& root_dir) {
    std::vector<TaggedDescriptor> out;
    out.reserve(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        TaggedDescriptor t;
        t.descriptor = reid::describe(net, load_record_image(manifest, *recs[i], root_dir),
                                      static_cast<int>(i));
        t.identity = recs[i]->subject_id;
        t.camera = recs[i]->camera_id;
        out.push_back(std::move(t));
    }
    return out;
}

// Single-shot protocol: per round, one seeded gallery image per identity; all
// remaining images are queries. Cross-camera filtering applies when camera
// ids are present.
reid::EvalReport single_shot_round(const std::vector<TaggedDescriptor>& descriptors,
                                   SeededRng& rng);

// Multi-shot protocol: per identity a seeded half of its images forms the
// gallery; the rest are the probe set, ranked by mean distance.
reid::EvalReport multi_shot_round(const std::vector<TaggedDescriptor>& descriptors,
                                  SeededRng& rng);

struct ProtocolSummary {
    std::vector<reid::EvalReport> rounds;
    reid::CMCCurve mean_curve;
    double mean_rank1 = 0.0;
    double stddev_rank1 = 0.0;
    double mean_map = 0.0;
};

ProtocolSummary run_protocol(const std::vector<TaggedDescriptor>& descriptors,
                             const std::string& protocol, int rounds, std::uint64_t seed);

}  // namespace pipeline
}  // namespace soma
