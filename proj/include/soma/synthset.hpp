#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "soma/image.hpp"
#include "soma/rng.hpp"

namespace soma {
namespace synth {

enum class Gender { kFemale, kMale };
enum class SkinTone { kCaucasian, kDark, kBeige };

std::string to_string(Gender g);
std::string to_string(SkinTone s);
Gender gender_from_string(const std::string& s);
SkinTone skin_from_string(const std::string& s);

struct SomatotypeMix {
    double ecto = 0.0;
    double meso = 0.0;
    double endo = 0.0;

    void validate() const;
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

struct SubjectSpec {
    int subject_id = 0;
    Gender gender = Gender::kFemale;
    SomatotypeMix somatotype;
    double height_scale = 1.0;
    double width_scale = 1.0;
    double limb_asymmetry = 0.0;
    SkinTone skin_tone = SkinTone::kCaucasian;
    // Per-subject appearance cues that survive pose/camera variation.
    Rgb hair_color{60, 45, 30};
    double hair_volume = 0.3;  // cap thickness relative to head radius
    double skin_shade = 1.0;   // continuous brightness within the tone class
    Rgb shoe_color{40, 35, 30};
};

enum class Availability { kShared, kFemaleOnly, kMaleOnly };

struct ClothingSpec {
    int clothing_id = 0;
    Availability availability = Availability::kShared;
    std::string name;
    Rgb torso;
    Rgb legs;
    Rgb sleeves;
    bool long_sleeves = false;
    bool skirt = false;
};

// The full 11-outfit catalogue: ids 0-4 shared, 5-7 female-only, 8-10 male-only.
const std::vector<ClothingSpec>& clothing_catalogue();

struct PoseSpec {
    int pose_id = 0;
    double phase = 0.0;  // walk-cycle position in [0,1)
    double stride_amplitude = 0.5;
    double arm_swing = 0.35;
    double body_yaw = 0.0;
};

struct JointAngles {
    double thigh_left = 0.0, thigh_right = 0.0;
    double arm_left = 0.0, arm_right = 0.0;
};

// Walk-cycle kinematics; phase and phase+0.5 give left/right mirrored limbs.
JointAngles joints_for(const PoseSpec& pose);

struct CameraSample {
    double azimuth = 0.0;    // [0, 2pi)
    double elevation = 0.0;  // [0, pi/2]
    double distance = 8.0;   // [6, 10] meters
};

struct ImageRecord {
    std::string path;
    int subject_id = 0;
    Gender gender = Gender::kFemale;
    int clothing_id = 0;
    int pose_id = 0;
    CameraSample camera;
    SkinTone skin_tone = SkinTone::kCaucasian;
    SomatotypeMix somatotype;
    std::string split;   // "", "train", "val", "test"
    int camera_id = -1;  // external datasets only
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    int img_w = 64;
    int img_h = 128;
    // original generation counts (subjects/poses regenerable from seed)
    int n_female = 0;
    int n_male = 0;
    int clothing_per_subject = 8;
    int n_poses = 0;
    std::vector<ImageRecord> records;
};

std::vector<SubjectSpec> make_subjects(int n_female, int n_male, SeededRng& rng);

std::vector<ClothingSpec> clothing_for(const SubjectSpec& subject);

std::vector<PoseSpec> sample_poses(int n, SeededRng& rng);

// Uniform over the hemisphere surface: azimuth ~ U[0,2pi), elevation = asin(u),
// distance ~ U[6,10].
CameraSample sample_camera(SeededRng& rng);

// Deterministic low-fidelity raster. Same inputs give byte-identical output.
Image render(const SubjectSpec& subject, const ClothingSpec& clothing, const PoseSpec& pose,
             const CameraSample& camera, int img_w, int img_h, std::uint64_t tint_seed);

// Background-only render with the same tint, for figure measurements in tests.
Image render_background(const CameraSample& camera, int img_w, int img_h,
                        std::uint64_t tint_seed);

// Tint stream for a record, derived from the dataset seed and the
// (subject, clothing, pose) triple so it survives manifest filtering.
std::uint64_t record_tint_seed(std::uint64_t dataset_seed, int subject_id, int clothing_id,
                               int pose_id);

struct GenConfig {
    int subjects = 10;  // split as evenly as possible female/male
    int clothing = 4;   // sets per subject, <= 8
    int poses = 30;
    int img_w = 64;
    int img_h = 128;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool write_images = true;
};

DatasetManifest generate_dataset(const GenConfig& cfg);

// Re-render one record from manifest metadata alone (provenance check).
Image render_record(const DatasetManifest& manifest, const ImageRecord& rec);

struct SplitFractions {
    double train = 0.70, val = 0.15, test = 0.15;
};

// Per-subject stratified split; floor remainders go to training.
void partition(DatasetManifest& manifest, const SplitFractions& fractions, SeededRng& rng);

DatasetManifest reduce_subjects(const DatasetManifest& manifest, int keep_n, SeededRng& rng,
                                std::vector<std::string>* warnings = nullptr);
DatasetManifest reduce_poses(const DatasetManifest& manifest, int keep_n, SeededRng& rng);

struct NamingRule {
    char field_delim = '_';
    char camera_prefix = 'c';
};

struct ExternalLoadResult {
    DatasetManifest manifest;
    std::vector<std::string> rejects;
    std::vector<std::string> warnings;
};

// Filenames follow `<id>_c<cam>_<idx>.<ext>`; unparseable names go to the
// rejects report.
ExternalLoadResult load_external_dataset(const std::string& root_dir,
                                         const NamingRule& rule = {});

void save_manifest(const std::string& dir, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& dir);

}  // namespace synth
}  // namespace soma
