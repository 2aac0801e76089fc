#include "soma/synthset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace soma {
namespace synth {

using nlohmann::json;
namespace fs = std::filesystem;

static constexpr double kPi = 3.14159265358979323846;

std::string to_string(Gender g) { return g == Gender::kFemale ? "female" : "male"; }
std::string to_string(SkinTone s) {
    switch (s) {
        case SkinTone::kCaucasian: return "caucasian";
        case SkinTone::kDark: return "dark";
        default: return "beige";
    }
}
Gender gender_from_string(const std::string& s) {
    if (s == "female") return Gender::kFemale;
    if (s == "male") return Gender::kMale;
    throw std::invalid_argument("unknown gender: " + s);
}
SkinTone skin_from_string(const std::string& s) {
    if (s == "caucasian") return SkinTone::kCaucasian;
    if (s == "dark") return SkinTone::kDark;
    if (s == "beige") return SkinTone::kBeige;
    throw std::invalid_argument("unknown skin tone: " + s);
}

void SomatotypeMix::validate() const {
    if (ecto < 0 || meso < 0 || endo < 0)
        throw std::invalid_argument("somatotype: negative weight");
    if (std::abs(ecto + meso + endo - 1.0) > 1e-9)
        throw std::invalid_argument("somatotype: weights must sum to 1");
}

const std::vector<ClothingSpec>& clothing_catalogue() {
    static const std::vector<ClothingSpec> kCatalogue = {
        // shared
        {0, Availability::kShared, "white_tshirt_jeans", {235, 235, 230}, {60, 80, 140}, {235, 235, 230}, false, false},
        {1, Availability::kShared, "longsleeve_jeans", {150, 60, 60}, {60, 80, 140}, {150, 60, 60}, true, false},
        {2, Availability::kShared, "blue_tshirt_jeans", {70, 110, 200}, {55, 75, 130}, {70, 110, 200}, false, false},
        {3, Availability::kShared, "jacket_shirt_jeans", {70, 70, 75}, {60, 80, 140}, {70, 70, 75}, true, false},
        {4, Availability::kShared, "overalls", {90, 100, 115}, {90, 100, 115}, {200, 200, 195}, false, false},
        // female only
        {5, Availability::kFemaleOnly, "tshirt_shorts", {220, 120, 160}, {90, 90, 100}, {220, 120, 160}, false, false},
        {6, Availability::kFemaleOnly, "blouse_skirt", {240, 220, 200}, {120, 40, 70}, {240, 220, 200}, false, true},
        {7, Availability::kFemaleOnly, "sport_top_leggings", {40, 40, 45}, {30, 30, 35}, {40, 40, 45}, false, false},
        // male only
        {8, Availability::kMaleOnly, "suit", {40, 45, 60}, {40, 45, 60}, {40, 45, 60}, true, false},
        {9, Availability::kMaleOnly, "striped_shirt_jeans", {180, 180, 90}, {60, 80, 140}, {180, 180, 90}, true, false},
        {10, Availability::kMaleOnly, "shirt_black_trousers", {200, 205, 215}, {25, 25, 30}, {200, 205, 215}, true, false},
    };
    return kCatalogue;
}

std::vector<SubjectSpec> make_subjects(int n_female, int n_male, SeededRng& rng) {
    if (n_female < 0 || n_male < 0)
        throw std::invalid_argument("make_subjects: negative count");
    const int n = n_female + n_male;
    std::vector<SubjectSpec> out;
    out.reserve(static_cast<std::size_t>(n));

    // Stratified cover of the 2-simplex: a fixed barycentric grid walked in
    // order, jittered, then renormalized.
    std::vector<SomatotypeMix> grid;
    const int m = 4;
    for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m - i; ++j)
            grid.push_back({static_cast<double>(i) / m, static_cast<double>(j) / m,
                            static_cast<double>(m - i - j) / m});

    // Skin tones by the 16/16/18 proportion scaled to the population.
    const int n_cauc = static_cast<int>(std::lround(n * 16.0 / 50.0));
    const int n_dark = static_cast<int>(std::lround(n * 16.0 / 50.0));
    std::vector<SkinTone> tones;
    for (int i = 0; i < n; ++i) {
        if (i < n_cauc) tones.push_back(SkinTone::kCaucasian);
        else if (i < n_cauc + n_dark) tones.push_back(SkinTone::kDark);
        else tones.push_back(SkinTone::kBeige);
    }
    rng.shuffle(tones);

    for (int i = 0; i < n; ++i) {
        SubjectSpec s;
        s.subject_id = i;
        s.gender = i < n_female ? Gender::kFemale : Gender::kMale;
        SomatotypeMix mix = grid[static_cast<std::size_t>(i) % grid.size()];
        mix.ecto = std::max(0.0, mix.ecto + rng.normal(0.0, 0.04));
        mix.meso = std::max(0.0, mix.meso + rng.normal(0.0, 0.04));
        mix.endo = std::max(0.0, mix.endo + rng.normal(0.0, 0.04));
        const double z = mix.ecto + mix.meso + mix.endo;
        if (z < 1e-12) mix = {1.0 / 3, 1.0 / 3, 1.0 / 3};
        else { mix.ecto /= z; mix.meso /= z; mix.endo /= z; }
        s.somatotype = mix;
        s.height_scale = 1.0 + rng.normal(0.0, 0.05);
        s.width_scale = 1.0 + rng.normal(0.0, 0.05);
        s.limb_asymmetry = rng.normal(0.0, 0.03);
        s.skin_tone = tones[static_cast<std::size_t>(i)];
        const double t = rng.uniform();  // dark-to-blond hair blend
        auto blend = [&](double lo, double hi) {
            return static_cast<std::uint8_t>(
                std::clamp(lo + t * (hi - lo) + rng.uniform(-18.0, 18.0), 0.0, 255.0));
        };
        s.hair_color = {blend(25, 225), blend(20, 200), blend(15, 140)};
        s.hair_volume = rng.uniform(0.12, 0.45);
        s.skin_shade = rng.uniform(0.82, 1.22);
        s.shoe_color = {static_cast<std::uint8_t>(rng.uniform(20.0, 235.0)),
                        static_cast<std::uint8_t>(rng.uniform(20.0, 235.0)),
                        static_cast<std::uint8_t>(rng.uniform(20.0, 235.0))};
        s.somatotype.validate();
        if (s.height_scale <= 0.5 || s.width_scale <= 0.5)
            s.height_scale = s.width_scale = 1.0;  // extreme jitter, keep proportions valid
        out.push_back(s);
    }
    return out;
}

std::vector<ClothingSpec> clothing_for(const SubjectSpec& subject) {
    std::vector<ClothingSpec> out;
    for (const auto& c : clothing_catalogue()) {
        if (c.availability == Availability::kShared ||
            (c.availability == Availability::kFemaleOnly && subject.gender == Gender::kFemale) ||
            (c.availability == Availability::kMaleOnly && subject.gender == Gender::kMale))
            out.push_back(c);
    }
    return out;  // 5 shared + 3 gender-matching
}

std::vector<PoseSpec> sample_poses(int n, SeededRng& rng) {
    if (n < 1) throw std::invalid_argument("sample_poses: n must be >= 1");
    std::vector<PoseSpec> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        PoseSpec p;
        p.pose_id = i;
        if (n == 1) {
            p.phase = 0.5;  // legs together, neutral mid-stride
            p.stride_amplitude = 0.5;
            p.arm_swing = 0.35;
            p.body_yaw = 0.0;
        } else {
            p.phase = (i + 0.35 + 0.3 * rng.uniform()) / n;
            p.stride_amplitude = 0.45 + 0.15 * rng.uniform();
            p.arm_swing = 0.3 + 0.15 * rng.uniform();
            p.body_yaw = rng.uniform(-0.2, 0.2);
        }
        out.push_back(p);
    }
    return out;
}

JointAngles joints_for(const PoseSpec& pose) {
    JointAngles j;
    const double s = std::sin(2.0 * kPi * pose.phase);
    j.thigh_left = pose.stride_amplitude * s;
    j.thigh_right = -j.thigh_left;
    j.arm_left = -pose.arm_swing * s;
    j.arm_right = -j.arm_left;
    return j;
}

CameraSample sample_camera(SeededRng& rng) {
    CameraSample c;
    c.azimuth = rng.uniform(0.0, 2.0 * kPi);
    c.elevation = std::asin(rng.uniform());
    c.distance = rng.uniform(6.0, 10.0);
    return c;
}

namespace {

struct Frame {
    Image* img;
    Rgb color;
};

void put(Image& img, int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    img.at(x, y, 0) = c.r;
    img.at(x, y, 1) = c.g;
    img.at(x, y, 2) = c.b;
}

void fill_rect(Image& img, double x0, double y0, double x1, double y1, Rgb c) {
    const int ax = static_cast<int>(std::floor(std::min(x0, x1)));
    const int bx = static_cast<int>(std::ceil(std::max(x0, x1)));
    const int ay = static_cast<int>(std::floor(std::min(y0, y1)));
    const int by = static_cast<int>(std::ceil(std::max(y0, y1)));
    for (int y = ay; y < by; ++y)
        for (int x = ax; x < bx; ++x) put(img, x, y, c);
}

void fill_ellipse(Image& img, double cx, double cy, double rx, double ry, Rgb c) {
    if (rx <= 0 || ry <= 0) return;
    const int ax = static_cast<int>(std::floor(cx - rx)), bx = static_cast<int>(std::ceil(cx + rx));
    const int ay = static_cast<int>(std::floor(cy - ry)), by = static_cast<int>(std::ceil(cy + ry));
    for (int y = ay; y <= by; ++y) {
        for (int x = ax; x <= bx; ++x) {
            const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
            if (dx * dx + dy * dy <= 1.0) put(img, x, y, c);
        }
    }
}

void thick_line(Image& img, double x0, double y0, double x1, double y1, double width, Rgb c) {
    const double hw = width * 0.5;
    const int ax = static_cast<int>(std::floor(std::min(x0, x1) - hw));
    const int bx = static_cast<int>(std::ceil(std::max(x0, x1) + hw));
    const int ay = static_cast<int>(std::floor(std::min(y0, y1) - hw));
    const int by = static_cast<int>(std::ceil(std::max(y0, y1) + hw));
    const double vx = x1 - x0, vy = y1 - y0;
    const double len2 = vx * vx + vy * vy;
    for (int y = ay; y <= by; ++y) {
        for (int x = ax; x <= bx; ++x) {
            const double px = x + 0.5 - x0, py = y + 0.5 - y0;
            double t = len2 > 0 ? (px * vx + py * vy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double dx = px - t * vx, dy = py - t * vy;
            if (dx * dx + dy * dy <= hw * hw) put(img, x, y, c);
        }
    }
}

void draw_background(Image& img) {
    const int w = img.width, h = img.height;
    const int horizon = static_cast<int>(0.42 * h);
    for (int y = 0; y < h; ++y) {
        Rgb c;
        if (y < horizon) {
            const double t = static_cast<double>(y) / horizon;
            c = {static_cast<std::uint8_t>(140 + 60 * t), static_cast<std::uint8_t>(175 + 45 * t),
                 static_cast<std::uint8_t>(225 + 25 * t)};
        } else {
            const double t = static_cast<double>(y - horizon) / (h - horizon);
            c = {static_cast<std::uint8_t>(95 - 25 * t), static_cast<std::uint8_t>(130 - 35 * t),
                 static_cast<std::uint8_t>(70 - 20 * t)};
        }
        for (int x = 0; x < w; ++x) put(img, x, y, c);
    }
    // single fixed outdoor scene: a building, a tree, a pavement strip
    fill_rect(img, 0.02 * w, 0.14 * h, 0.30 * w, 1.0 * horizon, {120, 105, 95});
    for (int wy = 0; wy < 3; ++wy)
        for (int wx = 0; wx < 2; ++wx)
            fill_rect(img, (0.06 + 0.11 * wx) * w, (0.17 + 0.08 * wy) * h,
                      (0.12 + 0.11 * wx) * w, (0.22 + 0.08 * wy) * h, {70, 80, 100});
    fill_rect(img, 0.80 * w, 0.26 * h, 0.85 * w, 1.0 * horizon, {85, 60, 40});
    fill_ellipse(img, 0.825 * w, 0.22 * h, 0.14 * w, 0.10 * h, {45, 90, 45});
    fill_rect(img, 0.0, horizon, 1.0 * w, horizon + 0.06 * h, {150, 145, 140});
}

void apply_tint(Image& img, std::uint64_t tint_seed) {
    SeededRng rng(tint_seed);
    const double fr = rng.uniform(0.85, 1.12);
    const double fg = rng.uniform(0.85, 1.12);
    const double fb = rng.uniform(0.85, 1.12);
    for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
        img.rgb[i] = static_cast<std::uint8_t>(std::clamp(img.rgb[i] * fr, 0.0, 255.0));
        img.rgb[i + 1] = static_cast<std::uint8_t>(std::clamp(img.rgb[i + 1] * fg, 0.0, 255.0));
        img.rgb[i + 2] = static_cast<std::uint8_t>(std::clamp(img.rgb[i + 2] * fb, 0.0, 255.0));
    }
}

Rgb skin_color(SkinTone s) {
    switch (s) {
        case SkinTone::kCaucasian: return {235, 200, 175};
        case SkinTone::kDark: return {115, 80, 60};
        default: return {210, 180, 140};
    }
}

}  // namespace

Image render_background(const CameraSample& /*camera*/, int img_w, int img_h,
                        std::uint64_t tint_seed) {
    Image img(img_w, img_h);
    draw_background(img);
    apply_tint(img, tint_seed);
    return img;
}

Image render(const SubjectSpec& subject, const ClothingSpec& clothing, const PoseSpec& pose,
             const CameraSample& camera, int img_w, int img_h, std::uint64_t tint_seed) {
    subject.somatotype.validate();
    Image img(img_w, img_h);
    draw_background(img);

    // Apparent size scales as 8/distance; elevation forshortens mildly.
    const double scale = 8.0 / camera.distance;
    const double elev_factor = 0.55 + 0.45 * std::cos(camera.elevation);
    const double fh = 0.60 * img_h * scale * subject.height_scale;  // figure pixel height
    const double yaw = camera.azimuth + pose.body_yaw;
    const double yaw_factor = 0.55 + 0.45 * std::abs(std::cos(yaw));
    const double wr = 0.13 + 0.16 * subject.somatotype.endo + 0.05 * subject.somatotype.meso +
                      0.02 * subject.somatotype.ecto;
    const double torso_w = fh * wr * subject.width_scale * yaw_factor * elev_factor;
    if (fh < 2.0 || torso_w < 1.0)
        throw std::invalid_argument("render: body collapses to zero area after scaling");

    const double feet_y = 0.90 * img_h;
    const double top_y = feet_y - fh;
    const double cx = 0.5 * img_w + 0.06 * img_w * std::sin(yaw);

    const double head_r = 0.075 * fh;
    const double shoulder_y = top_y + 0.18 * fh;
    const double hip_y = top_y + 0.52 * fh;
    const double leg_len = feet_y - hip_y;
    const double arm_len = 0.37 * fh;
    const double hip_off = 0.28 * torso_w;
    const double leg_w = std::max(1.0, 0.26 * torso_w);
    const double arm_w = std::max(1.0, 0.20 * torso_w);

    const JointAngles j = joints_for(pose);
    const double sway = 0.9;  // screen-space projection of limb swing
    auto shade = [&](Rgb c) {
        return Rgb{static_cast<std::uint8_t>(std::clamp(c.r * subject.skin_shade, 0.0, 255.0)),
                   static_cast<std::uint8_t>(std::clamp(c.g * subject.skin_shade, 0.0, 255.0)),
                   static_cast<std::uint8_t>(std::clamp(c.b * subject.skin_shade, 0.0, 255.0))};
    };
    const Rgb skin = shade(skin_color(subject.skin_tone));
    const Rgb arm_color = clothing.long_sleeves ? clothing.sleeves : skin;
    const double asym = 1.0 + subject.limb_asymmetry;

    auto draw_leg = [&](double side, double thigh, double wmul) {
        const double hx = cx + side * hip_off;
        const double ex = hx + leg_len * std::sin(thigh) * sway;
        const double ey = hip_y + leg_len * std::cos(thigh);
        thick_line(img, hx, hip_y, ex, ey, leg_w * wmul, clothing.legs);
        // feet
        fill_ellipse(img, ex, ey, leg_w * 0.7, leg_w * 0.4, subject.shoe_color);
    };
    auto draw_arm = [&](double side, double ang, double wmul) {
        const double sx = cx + side * (0.5 * torso_w + arm_w * 0.4);
        const double ex = sx + arm_len * std::sin(ang) * sway;
        const double ey = shoulder_y + arm_len * std::cos(ang);
        thick_line(img, sx, shoulder_y, ex, ey, arm_w * wmul, arm_color);
        fill_ellipse(img, ex, ey, arm_w * 0.45, arm_w * 0.45, skin);
    };
    auto draw_torso = [&] {
        fill_ellipse(img, cx, 0.5 * (shoulder_y + hip_y), 0.5 * torso_w,
                     0.5 * (hip_y - shoulder_y) + 0.04 * fh, clothing.torso);
        if (clothing.skirt)
            fill_rect(img, cx - 0.62 * torso_w, hip_y - 0.04 * fh, cx + 0.62 * torso_w,
                      hip_y + 0.22 * fh, clothing.legs);
        // head and neck
        fill_rect(img, cx - 0.06 * fh * 0.5, top_y + 0.12 * fh, cx + 0.06 * fh * 0.5,
                  shoulder_y + 0.02 * fh, skin);
        fill_ellipse(img, cx, top_y + head_r, head_r, head_r, skin);
        // hair cap over the top of the head
        fill_ellipse(img, cx, top_y + 0.40 * head_r, 1.20 * head_r,
                     (0.55 + 0.7 * subject.hair_volume) * head_r, subject.hair_color);
    };

    // limb occlusion order follows the view direction
    const bool left_behind = std::sin(yaw) >= 0.0;
    if (left_behind) {
        draw_leg(-1.0, j.thigh_left, asym);
        draw_arm(-1.0, j.arm_left, asym);
        draw_torso();
        draw_leg(1.0, j.thigh_right, 2.0 - asym);
        draw_arm(1.0, j.arm_right, 2.0 - asym);
    } else {
        draw_leg(1.0, j.thigh_right, 2.0 - asym);
        draw_arm(1.0, j.arm_right, 2.0 - asym);
        draw_torso();
        draw_leg(-1.0, j.thigh_left, asym);
        draw_arm(-1.0, j.arm_left, asym);
    }

    apply_tint(img, tint_seed);
    return img;
}

std::uint64_t record_tint_seed(std::uint64_t dataset_seed, int subject_id, int clothing_id,
                               int pose_id) {
    std::uint64_t h = dataset_seed ^ 0x51ed270b9f112a33ULL;
    auto mix = [&h](std::uint64_t x) {
        h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::uint64_t>(subject_id));
    mix(static_cast<std::uint64_t>(clothing_id));
    mix(static_cast<std::uint64_t>(pose_id));
    return h;
}

namespace {

std::string record_filename(int subject_id, int clothing_id, int pose_id) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "images/s%03d_c%02d_p%04d.ppm", subject_id, clothing_id,
                  pose_id);
    return buf;
}

}  // namespace

DatasetManifest generate_dataset(const GenConfig& cfg) {
    if (cfg.subjects < 1 || cfg.clothing < 1 || cfg.clothing > 8 || cfg.poses < 1)
        throw std::invalid_argument("generate_dataset: invalid counts");
    DatasetManifest m;
    m.seed = cfg.seed;
    m.img_w = cfg.img_w;
    m.img_h = cfg.img_h;
    m.n_female = (cfg.subjects + 1) / 2;
    m.n_male = cfg.subjects / 2;
    m.clothing_per_subject = cfg.clothing;
    m.n_poses = cfg.poses;

    SeededRng base(cfg.seed);
    SeededRng subj_rng = base.substream(1);
    SeededRng pose_rng = base.substream(2);
    const auto subjects = make_subjects(m.n_female, m.n_male, subj_rng);
    const auto poses = sample_poses(cfg.poses, pose_rng);

    if (cfg.write_images) {
        fs::create_directories(fs::path(cfg.out_dir) / "images");
    }

    std::set<std::string> seen_paths;
    std::uint64_t index = 0;
    for (const auto& s : subjects) {
        const auto outfits = clothing_for(s);
        for (int ci = 0; ci < cfg.clothing; ++ci) {
            const auto& c = outfits[static_cast<std::size_t>(ci)];
            for (const auto& p : poses) {
                SeededRng cam_rng = base.substream(0xCA0000 + index);
                ImageRecord rec;
                rec.path = record_filename(s.subject_id, c.clothing_id, p.pose_id);
                rec.subject_id = s.subject_id;
                rec.gender = s.gender;
                rec.clothing_id = c.clothing_id;
                rec.pose_id = p.pose_id;
                rec.camera = sample_camera(cam_rng);
                rec.skin_tone = s.skin_tone;
                rec.somatotype = s.somatotype;
                if (!seen_paths.insert(rec.path).second)
                    throw std::runtime_error("generate_dataset: duplicate output path " + rec.path);
                if (cfg.write_images) {
                    const Image img =
                        render(s, c, p, rec.camera, cfg.img_w, cfg.img_h,
                               record_tint_seed(cfg.seed, s.subject_id, c.clothing_id, p.pose_id));
                    write_ppm((fs::path(cfg.out_dir) / rec.path).string(), img);
                }
                m.records.push_back(std::move(rec));
                ++index;
            }
        }
    }
    return m;
}

Image render_record(const DatasetManifest& manifest, const ImageRecord& rec) {
    SeededRng base(manifest.seed);
    SeededRng subj_rng = base.substream(1);
    SeededRng pose_rng = base.substream(2);
    const auto subjects = make_subjects(manifest.n_female, manifest.n_male, subj_rng);
    const auto poses = sample_poses(manifest.n_poses, pose_rng);
    const auto& subject = subjects.at(static_cast<std::size_t>(rec.subject_id));
    const auto& pose = poses.at(static_cast<std::size_t>(rec.pose_id));
    const auto& clothing = clothing_catalogue().at(static_cast<std::size_t>(rec.clothing_id));
    return render(subject, clothing, pose, rec.camera, manifest.img_w, manifest.img_h,
                  record_tint_seed(manifest.seed, rec.subject_id, rec.clothing_id, rec.pose_id));
}

void partition(DatasetManifest& manifest, const SplitFractions& fractions, SeededRng& rng) {
    if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9)
        throw std::invalid_argument("partition: fractions must sum to 1");
    // per-subject stratified, floor remainders to training
    std::vector<int> subject_order;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const int sid = manifest.records[i].subject_id;
        auto it = std::find(subject_order.begin(), subject_order.end(), sid);
        if (it == subject_order.end()) {
            subject_order.push_back(sid);
            groups.emplace_back();
            it = subject_order.end() - 1;
        }
        groups[static_cast<std::size_t>(it - subject_order.begin())].push_back(i);
    }
    for (auto& g : groups) {
        rng.shuffle(g);
        const std::size_t n = g.size();
        const std::size_t n_val = static_cast<std::size_t>(n * fractions.val);
        const std::size_t n_test = static_cast<std::size_t>(n * fractions.test);
        for (std::size_t k = 0; k < n; ++k) {
            std::string tag = "train";
            if (k < n_val) tag = "val";
            else if (k < n_val + n_test) tag = "test";
            manifest.records[g[k]].split = tag;
        }
    }
}

DatasetManifest reduce_subjects(const DatasetManifest& manifest, int keep_n, SeededRng& rng,
                                std::vector<std::string>* warnings) {
    std::vector<int> ids;
    for (const auto& r : manifest.records)
        if (std::find(ids.begin(), ids.end(), r.subject_id) == ids.end())
            ids.push_back(r.subject_id);
    if (keep_n < 1 || keep_n > static_cast<int>(ids.size()))
        throw std::invalid_argument("reduce_subjects: keep_n out of range");
    if (keep_n < 8 && warnings)
        warnings->push_back("fewer than 8 subjects: training may produce dead neurons");
    rng.shuffle(ids);
    ids.resize(static_cast<std::size_t>(keep_n));
    std::sort(ids.begin(), ids.end());
    DatasetManifest out = manifest;
    out.records.clear();
    for (const auto& r : manifest.records)
        if (std::binary_search(ids.begin(), ids.end(), r.subject_id)) out.records.push_back(r);
    return out;
}

DatasetManifest reduce_poses(const DatasetManifest& manifest, int keep_n, SeededRng& rng) {
    std::vector<int> ids;
    for (const auto& r : manifest.records)
        if (std::find(ids.begin(), ids.end(), r.pose_id) == ids.end()) ids.push_back(r.pose_id);
    if (keep_n < 1 || keep_n > static_cast<int>(ids.size()))
        throw std::invalid_argument("reduce_poses: keep_n out of range");
    rng.shuffle(ids);
    ids.resize(static_cast<std::size_t>(keep_n));
    std::sort(ids.begin(), ids.end());
    DatasetManifest out = manifest;
    out.records.clear();
    for (const auto& r : manifest.records)
        if (std::binary_search(ids.begin(), ids.end(), r.pose_id)) out.records.push_back(r);
    return out;
}

ExternalLoadResult load_external_dataset(const std::string& root_dir, const NamingRule& rule) {
    ExternalLoadResult result;
    result.manifest.seed = 0;
    if (!fs::exists(root_dir))
        throw std::invalid_argument("load_external_dataset: no such directory: " + root_dir);
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root_dir))
        if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
        result.warnings.push_back("empty directory: " + root_dir);

    std::set<std::string> seen;
    for (const auto& path : files) {
        const std::string stem = fs::path(path).stem().string();
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : stem) {
            if (ch == rule.field_delim) { fields.push_back(cur); cur.clear(); }
            else cur += ch;
        }
        fields.push_back(cur);
        bool ok = fields.size() >= 3 && !fields[0].empty() && fields[1].size() >= 2 &&
                  fields[1][0] == rule.camera_prefix;
        int sid = 0, cam = 0;
        if (ok) {
            try {
                sid = std::stoi(fields[0]);
                cam = std::stoi(fields[1].substr(1));
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok) {
            result.rejects.push_back(path);
            continue;
        }
        if (!seen.insert(path).second)
            throw std::runtime_error("load_external_dataset: duplicate path " + path);
        ImageRecord rec;
        rec.path = path;
        rec.subject_id = sid;
        rec.camera_id = cam;
        result.manifest.records.push_back(std::move(rec));
    }
    return result;
}

namespace {

json record_to_json(const ImageRecord& r) {
    json j = {{"path", r.path},
              {"subject_id", r.subject_id},
              {"gender", to_string(r.gender)},
              {"clothing_id", r.clothing_id},
              {"pose_id", r.pose_id},
              {"camera",
               {{"azimuth", r.camera.azimuth},
                {"elevation", r.camera.elevation},
                {"distance", r.camera.distance}}},
              {"skin_tone", to_string(r.skin_tone)},
              {"somatotype",
               {{"ecto", r.somatotype.ecto}, {"meso", r.somatotype.meso}, {"endo", r.somatotype.endo}}},
              {"split", r.split}};
    if (r.camera_id >= 0) j["camera_id"] = r.camera_id;
    return j;
}

ImageRecord record_from_json(const json& j) {
    ImageRecord r;
    r.path = j.at("path");
    r.subject_id = j.at("subject_id");
    r.gender = gender_from_string(j.at("gender"));
    r.clothing_id = j.at("clothing_id");
    r.pose_id = j.at("pose_id");
    r.camera.azimuth = j.at("camera").at("azimuth");
    r.camera.elevation = j.at("camera").at("elevation");
    r.camera.distance = j.at("camera").at("distance");
    r.skin_tone = skin_from_string(j.at("skin_tone"));
    r.somatotype.ecto = j.at("somatotype").at("ecto");
    r.somatotype.meso = j.at("somatotype").at("meso");
    r.somatotype.endo = j.at("somatotype").at("endo");
    r.split = j.at("split");
    if (j.contains("camera_id")) r.camera_id = j.at("camera_id");
    return r;
}

}  // namespace

void save_manifest(const std::string& dir, const DatasetManifest& manifest) {
    fs::create_directories(dir);
    {
        json header = {{"seed", manifest.seed},
                       {"img_w", manifest.img_w},
                       {"img_h", manifest.img_h},
                       {"n_female", manifest.n_female},
                       {"n_male", manifest.n_male},
                       {"clothing_per_subject", manifest.clothing_per_subject},
                       {"n_poses", manifest.n_poses},
                       {"n_records", manifest.records.size()}};
        std::ofstream f(fs::path(dir) / "manifest_header.json");
        if (!f) throw std::runtime_error("save_manifest: cannot write header");
        f << header.dump(2) << "\n";
    }
    std::ofstream f(fs::path(dir) / "manifest.jsonl");
    if (!f) throw std::runtime_error("save_manifest: cannot write manifest");
    for (const auto& r : manifest.records) f << record_to_json(r).dump() << "\n";
}

DatasetManifest load_manifest(const std::string& dir) {
    std::ifstream hf(fs::path(dir) / "manifest_header.json");
    if (!hf) throw std::runtime_error("load_manifest: missing header in " + dir);
    json header = json::parse(hf);
    DatasetManifest m;
    m.seed = header.at("seed");
    m.img_w = header.at("img_w");
    m.img_h = header.at("img_h");
    m.n_female = header.at("n_female");
    m.n_male = header.at("n_male");
    m.clothing_per_subject = header.at("clothing_per_subject");
    m.n_poses = header.at("n_poses");
    std::ifstream f(fs::path(dir) / "manifest.jsonl");
    if (!f) throw std::runtime_error("load_manifest: missing manifest.jsonl in " + dir);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        m.records.push_back(record_from_json(json::parse(line)));
    }
    return m;
}

}  // namespace synth
}  // namespace soma
