#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "soma/checkpoint.hpp"
#include "soma/pipeline.hpp"
#include "soma/probe.hpp"
#include "soma/svgplot.hpp"
#include "soma/synthset.hpp"
#include "soma/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace soma;

namespace {

// Config file values fill in options the user did not pass on the command line.
void apply_config(const json& cfg, CLI::App* cmd) {
    if (cfg.is_null()) return;
    for (auto* opt : cmd->get_options()) {
        if (opt->count() > 0 || opt->get_lnames().empty()) continue;
        const std::string key = opt->get_lnames().front();
        if (!cfg.contains(key)) continue;
        const auto& v = cfg.at(key);
        opt->add_result(v.is_string() ? v.get<std::string>() : v.dump());
    }
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json();
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    return json::parse(f);
}

// Resolved parameters are echoed before any work so a run is reproducible
// from its output directory alone.
void echo_config(const std::string& out_dir, const std::string& command, CLI::App* cmd,
                 int threads) {
    if (out_dir.empty()) throw std::invalid_argument(command + ": --out is required");
    fs::create_directories(out_dir);
    json echo;
    echo["command"] = command;
    echo["threads"] = threads;
    for (auto* opt : cmd->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string key = opt->get_lnames().front();
        if (key == "config") continue;
        echo[key] = opt->count() > 0 || !opt->get_default_str().empty() ? json(opt->as<std::string>())
                                                                        : json();
    }
    std::ofstream f(fs::path(out_dir) / "config.json");
    if (!f) throw std::runtime_error("cannot write config echo in " + out_dir);
    f << echo.dump(2) << "\n";
}

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("SOMA_FORGE_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

NetworkConfig profile_config(const std::string& profile, int num_classes, int img_h, int img_w) {
    if (profile == "mini") return NetworkConfig::mini(num_classes, img_h, img_w);
    if (profile == "small") return NetworkConfig::small(num_classes, img_h, img_w);
    throw std::invalid_argument("unknown profile " + profile + " (expected mini or small)");
}

void ensure_split(synth::DatasetManifest& manifest, std::uint64_t seed) {
    for (const auto& r : manifest.records)
        if (!r.split.empty()) return;
    SeededRng rng(seed ^ 0x5171a0bULL);
    synth::partition(manifest, synth::SplitFractions{}, rng);
}

void write_history_csv(const std::string& path, const std::vector<EvalRecord>& history) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "epoch,train_loss,val_loss,val_accuracy,lr\n";
    f.precision(10);
    for (const auto& r : history)
        f << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.val_accuracy << ","
          << r.lr << "\n";
}

json round_json(const reid::EvalReport& r) {
    return {{"round", r.round_index},
            {"rank1", r.curve.rates.empty() ? 0.0 : r.curve.rates.front()},
            {"cmc", r.curve.rates},
            {"mAP", r.map},
            {"queries", r.per_query_ap.size()}};
}

// --- attribute rules -------------------------------------------------------

struct AttributeRule {
    std::string text;
    std::string field;
    std::string op;
    std::string value;

    bool matches(const synth::ImageRecord& rec) const;
};

AttributeRule parse_rule(const std::string& text) {
    static const std::vector<std::string> kOps = {">=", "<=", "==", "!=", ">", "<"};
    for (const auto& op : kOps) {
        const auto pos = text.find(op);
        if (pos == std::string::npos) continue;
        AttributeRule rule;
        rule.text = text;
        rule.field = text.substr(0, pos);
        rule.op = op;
        rule.value = text.substr(pos + op.size());
        if (rule.field.empty() || rule.value.empty())
            throw std::invalid_argument("malformed attribute rule: " + text);
        return rule;
    }
    throw std::invalid_argument("attribute rule needs a comparison operator: " + text);
}

bool AttributeRule::matches(const synth::ImageRecord& rec) const {
    std::string sval;
    double nval = 0.0;
    bool numeric = true;
    if (field == "gender") { sval = synth::to_string(rec.gender); numeric = false; }
    else if (field == "skin_tone") { sval = synth::to_string(rec.skin_tone); numeric = false; }
    else if (field == "subject_id") nval = rec.subject_id;
    else if (field == "clothing_id") nval = rec.clothing_id;
    else if (field == "pose_id") nval = rec.pose_id;
    else if (field == "camera_id") nval = rec.camera_id;
    else if (field == "somatotype.ecto") nval = rec.somatotype.ecto;
    else if (field == "somatotype.meso") nval = rec.somatotype.meso;
    else if (field == "somatotype.endo") nval = rec.somatotype.endo;
    else throw std::invalid_argument("unknown attribute field in rule: " + text);

    if (!numeric) {
        if (op == "==") return sval == value;
        if (op == "!=") return sval != value;
        throw std::invalid_argument("string field " + field + " only supports == and !=");
    }
    const double rhs = std::stod(value);
    if (op == "==") return nval == rhs;
    if (op == "!=") return nval != rhs;
    if (op == ">") return nval > rhs;
    if (op == "<") return nval < rhs;
    if (op == ">=") return nval >= rhs;
    return nval <= rhs;
}

// --- commands --------------------------------------------------------------

struct GensetArgs {
    int subjects = 10, clothing = 4, poses = 30, img_w = 64, img_h = 128;
    std::uint64_t seed = 0;
    std::string out, manifest;
    int reduce_poses = 0, reduce_subjects = 0;
    bool no_images = false;
};

void cmd_genset(const GensetArgs& a) {
    if (a.out.empty()) throw std::invalid_argument("genset: --out is required");
    if (!a.manifest.empty()) {
        auto m = synth::load_manifest(a.manifest);
        SeededRng rng(a.seed);
        std::vector<std::string> warnings;
        if (a.reduce_subjects > 0) m = synth::reduce_subjects(m, a.reduce_subjects, rng, &warnings);
        if (a.reduce_poses > 0) m = synth::reduce_poses(m, a.reduce_poses, rng);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        synth::save_manifest(a.out, m);
        std::cout << "manifest: " << m.records.size() << " records -> " << a.out << "\n";
        return;
    }
    synth::GenConfig cfg;
    cfg.subjects = a.subjects;
    cfg.clothing = a.clothing;
    cfg.poses = a.poses;
    cfg.img_w = a.img_w;
    cfg.img_h = a.img_h;
    cfg.seed = a.seed;
    cfg.out_dir = a.out;
    cfg.write_images = !a.no_images;
    auto m = synth::generate_dataset(cfg);
    ensure_split(m, a.seed);
    synth::save_manifest(a.out, m);
    std::cout << "generated " << m.records.size() << " images -> " << a.out << "\n";
}

struct TrainArgs {
    std::string manifest, out, checkpoint, profile = "mini";
    double lr = 0.1, momentum = 0.9, wd = 1e-4, plateau_eps = 1e-3, body_lr_ratio = 1.0;
    double min_lr = 1e-6;
    int batch = 32, patience = 5, max_epochs = 60;
    std::uint64_t seed = 0;
};

TrainConfig to_train_config(const TrainArgs& a) {
    TrainConfig tc;
    tc.initial_lr = a.lr;
    tc.batch_size = a.batch;
    tc.momentum = a.momentum;
    tc.weight_decay = a.wd;
    tc.plateau_patience = a.patience;
    tc.plateau_epsilon = a.plateau_eps;
    tc.max_epochs = a.max_epochs;
    tc.body_lr_ratio = a.body_lr_ratio;
    tc.min_lr = a.min_lr;
    tc.seed = a.seed;
    return tc;
}

void cmd_train(const TrainArgs& a, bool is_finetune) {
    if (a.manifest.empty() || a.out.empty())
        throw std::invalid_argument("train: --manifest and --out are required");
    auto manifest = synth::load_manifest(a.manifest);
    ensure_split(manifest, a.seed);
    auto ids = pipeline::identity_map(manifest);
    if (ids.num_classes() < 2) throw std::runtime_error("train: need at least 2 identities");
    auto train_set = pipeline::labeled_split(manifest, a.manifest, "train", ids);
    auto val_set = pipeline::labeled_split(manifest, a.manifest, "val", ids);
    if (train_set.size() == 0 || val_set.size() == 0)
        throw std::runtime_error("train: empty train or val split in manifest");

    TrainConfig tc = to_train_config(a);
    Checkpoint result;
    std::vector<EvalRecord> history;
    if (is_finetune) {
        if (a.checkpoint.empty()) throw std::invalid_argument("finetune: --checkpoint is required");
        auto pretrained = load_checkpoint(a.checkpoint);
        result = finetune<float>(pretrained, train_set, val_set, ids.num_classes(), tc);
        history = result.history;
    } else {
        auto cfg = profile_config(a.profile, ids.num_classes(), manifest.img_h, manifest.img_w);
        Network<float> net;
        SeededRng rng(a.seed);
        net.build(cfg, rng);
        history = train(net, train_set, val_set, tc);
        result = snapshot(net, a.seed, history);
    }
    save_checkpoint((fs::path(a.out) / "checkpoint.somf").string(), result);
    write_history_csv((fs::path(a.out) / "history.csv").string(), history);
    std::cout << (is_finetune ? "finetuned" : "trained") << " " << history.size()
              << " epochs; final val loss "
              << (history.empty() ? 0.0 : history.back().val_loss) << "\n";
}

struct EvalArgs {
    std::string checkpoint, manifest, out, protocol = "single-shot", split = "test";
    int rounds = 10;
    std::uint64_t seed = 0;
};

void cmd_eval(const EvalArgs& a) {
    if (a.checkpoint.empty() || a.manifest.empty() || a.out.empty())
        throw std::invalid_argument("eval: --checkpoint, --manifest and --out are required");
    auto manifest = synth::load_manifest(a.manifest);
    auto recs = pipeline::split_records(manifest, a.split);
    if (recs.empty()) recs = pipeline::split_records(manifest, "");
    if (recs.empty()) throw std::runtime_error("eval: manifest has no records");

    auto net = build_from_checkpoint<float>(load_checkpoint(a.checkpoint));
    auto descriptors = pipeline::describe_records(net, manifest, recs, a.manifest);
    auto summary = pipeline::run_protocol(descriptors, a.protocol, a.rounds, a.seed);

    json report = {{"protocol", a.protocol},
                   {"seed", a.seed},
                   {"rounds", json::array()},
                   {"mean_rank1", summary.mean_rank1},
                   {"stddev_rank1", summary.stddev_rank1},
                   {"mean_mAP", summary.mean_map},
                   {"mean_cmc", summary.mean_curve.rates}};
    for (const auto& r : summary.rounds) report["rounds"].push_back(round_json(r));
    {
        std::ofstream f(fs::path(a.out) / "report.json");
        if (!f) throw std::runtime_error("eval: cannot write report in " + a.out);
        f << report.dump(2) << "\n";
    }
    reid::write_cmc_csv((fs::path(a.out) / "cmc.csv").string(), summary.mean_curve);
    svgplot::Series s;
    s.name = a.protocol;
    for (std::size_t i = 0; i < summary.mean_curve.rates.size(); ++i) {
        s.x.push_back(static_cast<double>(i + 1));
        s.y.push_back(summary.mean_curve.rates[i]);
    }
    svgplot::write_line_chart((fs::path(a.out) / "cmc.svg").string(), "CMC", "rank",
                              "match rate", {s});
    std::cout << "rank-1 " << summary.mean_rank1 << " +/- " << summary.stddev_rank1 << ", mAP "
              << summary.mean_map << " (" << a.rounds << " rounds)\n";
}

struct ProbeArgs {
    std::string checkpoint, manifest, out, attribute, split;
    int k = 10, trials = 1000;
    std::uint64_t seed = 0;
};

void cmd_probe(const ProbeArgs& a) {
    if (a.checkpoint.empty() || a.manifest.empty() || a.out.empty() || a.attribute.empty())
        throw std::invalid_argument(
            "probe: --checkpoint, --manifest, --attribute and --out are required");
    const auto rule = parse_rule(a.attribute);
    auto manifest = synth::load_manifest(a.manifest);
    auto recs = pipeline::split_records(manifest, a.split);
    if (recs.empty()) throw std::runtime_error("probe: manifest has no records");

    auto net = build_from_checkpoint<float>(load_checkpoint(a.checkpoint));
    probe::ActivationMatrix m;
    m.n_images = static_cast<int>(recs.size());
    m.n_neurons = net.cfg.embed_dim;
    m.a.reserve(static_cast<std::size_t>(m.n_images) * m.n_neurons);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        auto e = net.extract_embedding(
            image_to_tensor<float>(pipeline::load_record_image(manifest, *recs[i], a.manifest)));
        for (auto v : e.v) m.a.push_back(static_cast<double>(v));
        m.image_ids.push_back(static_cast<int>(i));
    }

    // localization half defines C/R; the exploration half is held out
    std::vector<int> rows(recs.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    SeededRng rng(a.seed);
    rng.shuffle(rows);
    probe::ProbeSplit split;
    split.characteristic = a.attribute;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& rec = *recs[static_cast<std::size_t>(rows[i])];
        if (i >= rows.size() / 2) split.e_rows.push_back(rows[i]);
        else if (rule.matches(rec)) split.c_rows.push_back(rows[i]);
        else split.r_rows.push_back(rows[i]);
    }
    if (split.c_rows.empty())
        throw std::runtime_error("probe: rule '" + a.attribute + "' selects an empty C set");
    if (split.r_rows.empty())
        throw std::runtime_error("probe: rule '" + a.attribute + "' selects an empty R set");

    probe::DiscernibilityReport report;
    report.characteristic = a.attribute;
    report.table = probe::score_all(m, split);
    report.top_neurons = probe::top_k(report.table, std::min(a.k, m.n_neurons));
    report.exploration = probe::explore(m, split.e_rows, report.top_neurons);
    auto perm = probe::permutation_baseline(m, split, a.trials, rng);
    report.p_value = perm.p_value;

    fs::create_directories(a.out);
    probe::write_report_json((fs::path(a.out) / "probe_report.json").string(), report);
    probe::write_score_csv((fs::path(a.out) / "scores.csv").string(), report.table);

    // contact sheet of the strongest exploration images
    const int n_tiles = std::min<int>(10, static_cast<int>(report.exploration.size()));
    if (n_tiles > 0) {
        Image sheet(manifest.img_w * n_tiles, manifest.img_h);
        for (int t = 0; t < n_tiles; ++t) {
            const auto& rec = *recs[static_cast<std::size_t>(report.exploration[t].row)];
            Image img = pipeline::load_record_image(manifest, rec, a.manifest);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    for (int c = 0; c < 3; ++c)
                        sheet.at(t * manifest.img_w + x, y, c) = img.at(x, y, c);
        }
        write_ppm((fs::path(a.out) / "exploration.ppm").string(), sheet);
    }
    std::cout << "max D " << report.table.rows.front().discernibility << ", p " << perm.p_value
              << "\n";
}

struct AblationArgs {
    std::string manifest, out, profile = "small";
    int seeds = 3, rounds = 3, max_epochs = 8, batch = 32;
    double keep_fraction = 0.4;
    double lr = 0.1;
};

void cmd_ablation(const AblationArgs& a) {
    if (a.manifest.empty() || a.out.empty())
        throw std::invalid_argument("ablation: --manifest and --out are required");
    auto full = synth::load_manifest(a.manifest);
    std::set<int> sids, pids;
    for (const auto& r : full.records) {
        sids.insert(r.subject_id);
        pids.insert(r.pose_id);
    }
    const int keep_s = std::max(2, static_cast<int>(sids.size() * a.keep_fraction + 0.5));
    const int keep_p = std::max(1, static_cast<int>(pids.size() * a.keep_fraction + 0.5));

    fs::create_directories(a.out);
    std::ofstream csv(fs::path(a.out) / "ablation.csv");
    if (!csv) throw std::runtime_error("ablation: cannot write csv");
    csv << "variant,images,rank1,mAP,seed\n";
    csv.precision(8);

    for (int seed = 0; seed < a.seeds; ++seed) {
        for (const std::string variant : {"subjects", "poses"}) {
            SeededRng rng(static_cast<std::uint64_t>(seed) * 977 + 13);
            auto reduced = variant == "subjects"
                               ? synth::reduce_subjects(full, keep_s, rng, nullptr)
                               : synth::reduce_poses(full, keep_p, rng);
            ensure_split(reduced, static_cast<std::uint64_t>(seed));
            auto ids = pipeline::identity_map(reduced);
            auto train_set = pipeline::labeled_split(reduced, a.manifest, "train", ids);
            auto val_set = pipeline::labeled_split(reduced, a.manifest, "val", ids);

            TrainConfig tc;
            tc.initial_lr = a.lr;
            tc.batch_size = a.batch;
            tc.max_epochs = a.max_epochs;
            tc.seed = static_cast<std::uint64_t>(seed);
            Network<float> net;
            SeededRng net_rng(static_cast<std::uint64_t>(seed));
            net.build(profile_config(a.profile, ids.num_classes(), reduced.img_h, reduced.img_w),
                      net_rng);
            train(net, train_set, val_set, tc);

            auto recs = pipeline::split_records(reduced, "test");
            auto descriptors = pipeline::describe_records(net, reduced, recs, a.manifest);
            auto summary = pipeline::run_protocol(descriptors, "single-shot", a.rounds,
                                                  static_cast<std::uint64_t>(seed));
            csv << variant << "," << reduced.records.size() << "," << summary.mean_rank1 << ","
                << summary.mean_map << "," << seed << "\n";
            std::cout << variant << " seed " << seed << ": rank-1 " << summary.mean_rank1 << "\n";
        }
    }
}

struct ReportArgs {
    std::string in, out;
};

std::vector<std::vector<double>> read_csv_columns(const std::string& path, int n_cols) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("report: cannot open " + path);
    std::string line;
    std::getline(f, line);  // header
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(n_cols));
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::size_t start = 0;
        for (int c = 0; c < n_cols; ++c) {
            const auto comma = line.find(',', start);
            cols[static_cast<std::size_t>(c)].push_back(std::stod(line.substr(start, comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return cols;
}

void cmd_report(const ReportArgs& a) {
    if (a.in.empty()) throw std::invalid_argument("report: --in is required");
    const std::string out = a.out.empty() ? a.in : a.out;
    fs::create_directories(out);
    bool produced = false;
    if (fs::exists(fs::path(a.in) / "cmc.csv")) {
        auto cols = read_csv_columns((fs::path(a.in) / "cmc.csv").string(), 2);
        svgplot::write_line_chart((fs::path(out) / "cmc.svg").string(), "CMC", "rank",
                                  "match rate", {{"cmc", cols[0], cols[1]}});
        produced = true;
    }
    if (fs::exists(fs::path(a.in) / "history.csv")) {
        auto cols = read_csv_columns((fs::path(a.in) / "history.csv").string(), 5);
        svgplot::write_line_chart((fs::path(out) / "loss.svg").string(), "Training", "epoch",
                                  "loss",
                                  {{"train loss", cols[0], cols[1]}, {"val loss", cols[0], cols[2]}});
        svgplot::write_line_chart((fs::path(out) / "accuracy.svg").string(), "Validation",
                                  "epoch", "accuracy", {{"val accuracy", cols[0], cols[3]}});
        produced = true;
    }
    if (!produced) throw std::runtime_error("report: no cmc.csv or history.csv in " + a.in);
    std::cout << "plots -> " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"soma_forge: synthetic person re-identification research kit"};
    app.require_subcommand(1);

    std::string config_path;
    int threads_flag = 0;
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    app.add_option("--threads", threads_flag,
                   "worker cap (results are identical for any value; SOMA_FORGE_THREADS fallback)");

    GensetArgs ga;
    auto* genset = app.add_subcommand("genset", "generate or reduce a synthetic dataset");
    genset->add_option("--subjects", ga.subjects, "number of subjects");
    genset->add_option("--clothing", ga.clothing, "clothing sets per subject (<=8)");
    genset->add_option("--poses", ga.poses, "walk-cycle poses");
    genset->add_option("--img-w", ga.img_w, "image width");
    genset->add_option("--img-h", ga.img_h, "image height");
    genset->add_option("--seed", ga.seed, "dataset seed");
    genset->add_option("--out", ga.out, "output directory");
    genset->add_option("--manifest", ga.manifest, "existing manifest dir to reduce");
    genset->add_option("--reduce-poses", ga.reduce_poses, "keep this many poses");
    genset->add_option("--reduce-subjects", ga.reduce_subjects, "keep this many subjects");
    genset->add_flag("--no-images", ga.no_images, "write the manifest only");

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train an identity classifier");
    TrainArgs fa;
    fa.body_lr_ratio = 0.1;
    auto* finetune_cmd = app.add_subcommand("finetune", "fine-tune from a checkpoint");
    for (auto [cmd, args] : {std::pair{train_cmd, &ta}, std::pair{finetune_cmd, &fa}}) {
        cmd->add_option("--manifest", args->manifest, "dataset manifest dir");
        cmd->add_option("--out", args->out, "output directory");
        cmd->add_option("--profile", args->profile, "network profile: mini|small");
        cmd->add_option("--lr", args->lr, "initial learning rate");
        cmd->add_option("--batch", args->batch, "batch size");
        cmd->add_option("--momentum", args->momentum, "sgd momentum");
        cmd->add_option("--wd", args->wd, "weight decay");
        cmd->add_option("--patience", args->patience, "plateau patience");
        cmd->add_option("--max-epochs", args->max_epochs, "epoch cap");
        cmd->add_option("--body-lr-ratio", args->body_lr_ratio, "body lr multiplier");
        cmd->add_option("--seed", args->seed, "training seed");
    }
    finetune_cmd->add_option("--checkpoint", fa.checkpoint, "pretrained checkpoint");

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "re-identification evaluation");
    eval_cmd->add_option("--checkpoint", ea.checkpoint, "trained checkpoint");
    eval_cmd->add_option("--manifest", ea.manifest, "dataset manifest dir");
    eval_cmd->add_option("--out", ea.out, "output directory");
    eval_cmd->add_option("--protocol", ea.protocol, "single-shot|multi-shot");
    eval_cmd->add_option("--split", ea.split, "manifest split to evaluate");
    eval_cmd->add_option("--rounds", ea.rounds, "cross-validation rounds");
    eval_cmd->add_option("--seed", ea.seed, "evaluation seed");

    ProbeArgs pa;
    auto* probe_cmd = app.add_subcommand("probe", "neuron discernibility analysis");
    probe_cmd->add_option("--checkpoint", pa.checkpoint, "trained checkpoint");
    probe_cmd->add_option("--manifest", pa.manifest, "dataset manifest dir");
    probe_cmd->add_option("--out", pa.out, "output directory");
    probe_cmd->add_option("--attribute", pa.attribute,
                          "rule like gender==female or somatotype.endo>0.6");
    probe_cmd->add_option("--k", pa.k, "top neurons to keep");
    probe_cmd->add_option("--trials", pa.trials, "permutation trials");
    probe_cmd->add_option("--split", pa.split, "manifest split to probe (default all)");
    probe_cmd->add_option("--seed", pa.seed, "probe seed");

    AblationArgs aa;
    auto* ablation_cmd = app.add_subcommand("ablation", "subjects-vs-poses sweep");
    ablation_cmd->add_option("--manifest", aa.manifest, "full dataset manifest dir");
    ablation_cmd->add_option("--out", aa.out, "output directory");
    ablation_cmd->add_option("--profile", aa.profile, "network profile: mini|small");
    ablation_cmd->add_option("--seeds", aa.seeds, "seeds per variant");
    ablation_cmd->add_option("--rounds", aa.rounds, "eval rounds per run");
    ablation_cmd->add_option("--max-epochs", aa.max_epochs, "epoch cap per run");
    ablation_cmd->add_option("--batch", aa.batch, "batch size");
    ablation_cmd->add_option("--lr", aa.lr, "initial learning rate");
    ablation_cmd->add_option("--keep-fraction", aa.keep_fraction, "reduction fraction");

    ReportArgs ra;
    auto* report_cmd = app.add_subcommand("report", "render SVG plots from run CSVs");
    report_cmd->add_option("--in", ra.in, "run directory with cmc.csv/history.csv");
    report_cmd->add_option("--out", ra.out, "plot output directory (default --in)");

    try {
        app.parse(argc, argv);
        const json cfg = load_config_file(config_path);
        CLI::App* active = app.get_subcommands().front();
        apply_config(cfg.is_null() ? cfg : cfg.value(active->get_name(), cfg), active);
        const int threads = resolve_threads(threads_flag);
        (void)threads;

        if (active == genset) {
            echo_config(ga.out, "genset", genset, threads);
            cmd_genset(ga);
        } else if (active == train_cmd) {
            echo_config(ta.out, "train", train_cmd, threads);
            cmd_train(ta, false);
        } else if (active == finetune_cmd) {
            echo_config(fa.out, "finetune", finetune_cmd, threads);
            cmd_train(fa, true);
        } else if (active == eval_cmd) {
            echo_config(ea.out, "eval", eval_cmd, threads);
            cmd_eval(ea);
        } else if (active == probe_cmd) {
            echo_config(pa.out, "probe", probe_cmd, threads);
            cmd_probe(pa);
        } else if (active == ablation_cmd) {
            echo_config(aa.out, "ablation", ablation_cmd, threads);
            cmd_ablation(aa);
        } else {
            cmd_report(ra);
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
