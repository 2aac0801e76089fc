#include "soma/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace soma {

using nlohmann::json;

namespace {

json config_to_json(const NetworkConfig& c) {
    json stem = json::array();
    for (const auto& op : c.stem) {
        if (op.kind == StemOp::Kind::kConv)
            stem.push_back({{"type", "conv"},
                            {"out", op.conv.out_channels},
                            {"k", op.conv.kernel},
                            {"s", op.conv.stride},
                            {"p", op.conv.padding}});
        else
            stem.push_back({{"type", "pool"}, {"w", op.pool.window}, {"s", op.pool.stride}});
    }
    json mods = json::array();
    for (const auto& m : c.modules) {
        mods.push_back({{"out_1x1", m.out_1x1},
                        {"reduce_3x3", m.reduce_3x3},
                        {"out_3x3", m.out_3x3},
                        {"reduce_d3x3", m.reduce_d3x3},
                        {"out_d3x3", m.out_d3x3},
                        {"pool_proj", m.pool_proj},
                        {"stride", m.stride},
                        {"include_1x1", m.include_1x1_output}});
    }
    return {{"in_channels", c.in_channels},
            {"in_h", c.in_h},
            {"in_w", c.in_w},
            {"stem", stem},
            {"modules", mods},
            {"tail_pool", {{"w", c.tail_pool.window}, {"s", c.tail_pool.stride}}},
            {"tail_conv",
             {{"out", c.tail_conv.out_channels},
              {"k", c.tail_conv.kernel},
              {"s", c.tail_conv.stride},
              {"p", c.tail_conv.padding}}},
            {"embed_dim", c.embed_dim},
            {"num_classes", c.num_classes}};
}

NetworkConfig config_from_json(const json& j) {
    NetworkConfig c;
    c.in_channels = j.at("in_channels");
    c.in_h = j.at("in_h");
    c.in_w = j.at("in_w");
    for (const auto& op : j.at("stem")) {
        if (op.at("type") == "conv")
            c.stem.push_back(StemOp::make_conv(op.at("out"), op.at("k"), op.at("s"), op.at("p")));
        else
            c.stem.push_back(StemOp::make_pool(op.at("w"), op.at("s")));
    }
    c.modules.clear();
    for (const auto& m : j.at("modules")) {
        InceptionSpec s;
        s.out_1x1 = m.at("out_1x1");
        s.reduce_3x3 = m.at("reduce_3x3");
        s.out_3x3 = m.at("out_3x3");
        s.reduce_d3x3 = m.at("reduce_d3x3");
        s.out_d3x3 = m.at("out_d3x3");
        s.pool_proj = m.at("pool_proj");
        s.stride = m.at("stride");
        s.include_1x1_output = m.at("include_1x1");
        c.modules.push_back(s);
    }
    c.tail_pool = {j.at("tail_pool").at("w"), j.at("tail_pool").at("s"), 0};
    const auto& tc = j.at("tail_conv");
    c.tail_conv = {tc.at("out"), tc.at("k"), tc.at("s"), tc.at("p")};
    c.embed_dim = j.at("embed_dim");
    c.num_classes = j.at("num_classes");
    return c;
}

json history_to_json(const std::vector<EvalRecord>& h) {
    json out = json::array();
    for (const auto& r : h)
        out.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"val_loss", r.val_loss},
                       {"val_accuracy", r.val_accuracy},
                       {"lr", r.lr}});
    return out;
}

std::vector<EvalRecord> history_from_json(const json& j) {
    std::vector<EvalRecord> h;
    for (const auto& r : j)
        h.push_back({r.at("epoch"), r.at("train_loss"), r.at("val_loss"), r.at("val_accuracy"),
                     r.at("lr")});
    return h;
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_blob(std::vector<std::uint8_t>& out, const std::vector<double>& values, bool f64) {
    for (double d : values) {
        if (f64) {
            append_u64(out, std::bit_cast<std::uint64_t>(d));
        } else {
            append_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
        }
    }
}

std::vector<double> read_blob(const std::vector<std::uint8_t>& in, std::size_t offset,
                              std::size_t count, bool f64) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (f64) {
            std::uint64_t u = 0;
            for (int k = 0; k < 8; ++k)
                u |= static_cast<std::uint64_t>(in.at(offset + i * 8 + k)) << (8 * k);
            out[i] = std::bit_cast<double>(u);
        } else {
            std::uint32_t u = 0;
            for (int k = 0; k < 4; ++k)
                u |= static_cast<std::uint32_t>(in.at(offset + i * 4 + k)) << (8 * k);
            out[i] = static_cast<double>(std::bit_cast<float>(u));
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
    const bool f64 = ck.dtype == "f64";
    const std::size_t width = f64 ? 8 : 4;

    json manifest = json::array();
    std::uint64_t offset = 0;
    auto add_entry = [&](const NamedBlob& b, const char* kind) {
        manifest.push_back({{"name", b.name},
                            {"shape", b.shape},
                            {"dtype", ck.dtype},
                            {"offset", offset},
                            {"kind", kind}});
        offset += b.values.size() * width;
    };
    for (const auto& b : ck.params) add_entry(b, "param");
    if (ck.optimizer)
        for (const auto& b : ck.optimizer->momentum) add_entry(b, "momentum");

    json header = {{"config", config_to_json(ck.config)},
                   {"dtype", ck.dtype},
                   {"seed", ck.seed},
                   {"history", history_to_json(ck.history)},
                   {"manifest", manifest}};
    if (ck.optimizer)
        header["optimizer"] = {{"lr", ck.optimizer->lr},
                               {"plateau_counter", ck.optimizer->plateau_counter},
                               {"best_val", ck.optimizer->best_val}};

    const std::string header_str = header.dump();
    std::vector<std::uint8_t> out;
    out.reserve(16 + header_str.size() + offset);
    out.insert(out.end(), {'S', 'O', 'M', 'F'});
    append_u32(out, Checkpoint::kVersion);
    append_u64(out, header_str.size());
    out.insert(out.end(), header_str.begin(), header_str.end());
    for (const auto& b : ck.params) append_blob(out, b.values, f64);
    if (ck.optimizer)
        for (const auto& b : ck.optimizer->momentum) append_blob(out, b.values, f64);
    return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || bytes[0] != 'S' || bytes[1] != 'O' || bytes[2] != 'M' ||
        bytes[3] != 'F')
        throw std::runtime_error("checkpoint: bad magic");
    std::uint32_t version = 0;
    for (int i = 0; i < 4; ++i) version |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
    if (version != Checkpoint::kVersion)
        throw std::runtime_error("checkpoint: unknown format version " + std::to_string(version));
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
    if (16 + hlen > bytes.size()) throw std::runtime_error("checkpoint: truncated header");

    const json header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + hlen);
    Checkpoint ck;
    ck.config = config_from_json(header.at("config"));
    ck.dtype = header.at("dtype");
    ck.seed = header.at("seed");
    ck.history = history_from_json(header.at("history"));
    const bool f64 = ck.dtype == "f64";
    const std::size_t width = f64 ? 8 : 4;
    const std::size_t base = 16 + hlen;

    OptimizerBlob opt;
    bool has_opt = header.contains("optimizer");
    if (has_opt) {
        opt.lr = header["optimizer"].at("lr");
        opt.plateau_counter = header["optimizer"].at("plateau_counter");
        opt.best_val = header["optimizer"].at("best_val");
    }
    for (const auto& entry : header.at("manifest")) {
        NamedBlob b;
        b.name = entry.at("name");
        b.shape = entry.at("shape").get<std::vector<int>>();
        std::size_t count = 1;
        for (int d : b.shape) count *= static_cast<std::size_t>(d);
        const std::size_t off = base + entry.at("offset").get<std::uint64_t>();
        if (off + count * width > bytes.size())
            throw std::runtime_error("checkpoint: truncated blob for " + b.name);
        b.values = read_blob(bytes, off, count, f64);
        if (entry.at("kind") == "momentum") opt.momentum.push_back(std::move(b));
        else ck.params.push_back(std::move(b));
    }
    if (has_opt) ck.optimizer = std::move(opt);
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const auto bytes = serialize_checkpoint(ck);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace soma
