#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "protoflow/error.hpp"
#include "protoflow/model.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace protoflow::model {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'F', 'L', 'W'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("truncated checkpoint");
    return v;
}

void write_tensor(std::ofstream& out, const std::string& name, const num::Tensor& t) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) write_pod<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

struct RawTensor {
    num::Shape shape;
    std::vector<double> data;
};

std::pair<std::string, RawTensor> read_tensor(std::ifstream& in) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("truncated checkpoint");
    const auto rank = read_pod<std::uint32_t>(in);
    RawTensor t;
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
        t.shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(in)));
        numel *= t.shape.back();
    }
    t.data.resize(numel);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint");
    return {std::move(name), std::move(t)};
}

json encoder_to_json(const EncoderConfig& c) {
    json j;
    j["num_layers"] = c.num_layers;
    j["hidden_dim"] = c.hidden_dim;
    j["encoding_dim"] = c.encoding_dim;
    j["heads"] = c.heads;
    j["leaky_slope"] = c.leaky_slope;
    j["num_edge_types"] = c.num_edge_types;
    j["edge_embed_dim"] = c.edge_embed_dim;
    j["input_dim"] = c.input_dim;
    return j;
}

EncoderConfig encoder_from_json(const json& j) {
    EncoderConfig c;
    c.num_layers = j.at("num_layers").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.encoding_dim = j.at("encoding_dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.num_edge_types = j.at("num_edge_types").get<int>();
    c.edge_embed_dim = j.at("edge_embed_dim").get<int>();
    c.input_dim = j.at("input_dim").get<int>();
    return c;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const PrototypeSet* protos,
                     const CheckpointExtras& extras, const std::filesystem::path& path) {
    json cfg;
    cfg["encoder"] = encoder_to_json(params.cfg);
    cfg["num_classes"] = params.num_classes;
    cfg["features"] = {{"node_classes", extras.features.node_classes},
                       {"d_attr", extras.features.d_attr},
                       {"w_max", extras.features.w_max}};
    cfg["window"] = extras.window;
    cfg["seed"] = extras.seed;
    if (protos) {
        json jp;
        jp["k"] = protos->k;
        json med = json::array();
        for (const MedoidRef& m : protos->medoids)
            med.push_back({m.video_id, m.frame_idx});
        jp["medoids"] = std::move(med);
        if (protos->calib) {
            jp["calibration"] = {{"mu", protos->calib->mu},
                                 {"sigma", protos->calib->sigma},
                                 {"lambda", protos->calib->lambda}};
        } else {
            jp["calibration"] = nullptr;
        }
        cfg["prototypes"] = std::move(jp);
    } else {
        cfg["prototypes"] = nullptr;
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    const std::string cfg_str = cfg.dump();
    write_pod<std::uint64_t>(out, cfg_str.size());
    out.write(cfg_str.data(), static_cast<std::streamsize>(cfg_str.size()));

    auto named = params.named();
    std::uint64_t count = named.size() + (protos ? 2 : 0);
    write_pod<std::uint64_t>(out, count);
    for (const NamedTensor& nt : named) write_tensor(out, nt.name, nt.tensor);
    if (protos) {
        write_tensor(out, "proto.p", protos->p);
        write_tensor(out, "proto.p0", protos->p0);
    }
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path.string() + " is not a ProtoFlow checkpoint");
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto cfg_len = read_pod<std::uint64_t>(in);
    std::string cfg_str(cfg_len, '\0');
    in.read(cfg_str.data(), static_cast<std::streamsize>(cfg_len));
    if (!in) throw IoError("truncated checkpoint");
    json cfg;
    try {
        cfg = json::parse(cfg_str);
    } catch (const json::exception& e) {
        throw IoError("corrupt checkpoint config: " + std::string(e.what()));
    }

    LoadedCheckpoint lc;
    lc.extras.features.node_classes = cfg.at("features").at("node_classes").get<int>();
    lc.extras.features.d_attr = cfg.at("features").at("d_attr").get<int>();
    lc.extras.features.w_max = cfg.at("features").at("w_max").get<int>();
    lc.extras.window = cfg.at("window").get<int>();
    lc.extras.seed = cfg.at("seed").get<std::uint64_t>();

    const EncoderConfig enc = encoder_from_json(cfg.at("encoder"));
    const int num_classes = cfg.at("num_classes").get<int>();
    lc.params = ModelParams::init(enc, num_classes, 0);

    const auto count = read_pod<std::uint64_t>(in);
    std::map<std::string, RawTensor> table;
    for (std::uint64_t i = 0; i < count; ++i) {
        auto [name, raw] = read_tensor(in);
        if (table.contains(name))
            throw IoError("checkpoint has duplicate tensor '" + name + "'");
        table.emplace(std::move(name), std::move(raw));
    }

    for (NamedTensor nt : lc.params.named()) {
        auto it = table.find(nt.name);
        if (it == table.end())
            throw IoError("checkpoint is missing tensor '" + nt.name + "'");
        if (it->second.shape != nt.tensor.shape())
            throw IoError("checkpoint tensor '" + nt.name + "' has shape " +
                          num::shape_str(it->second.shape) + ", expected " +
                          num::shape_str(nt.tensor.shape()));
        std::copy(it->second.data.begin(), it->second.data.end(),
                  nt.tensor.mut_data().begin());
    }

    if (!cfg.at("prototypes").is_null()) {
        const json& jp = cfg.at("prototypes");
        PrototypeSet ps;
        ps.num_classes = num_classes;
        ps.k = jp.at("k").get<int>();
        for (const json& m : jp.at("medoids"))
            ps.medoids.push_back({m.at(0).get<std::string>(), m.at(1).get<int>()});
        if (!jp.at("calibration").is_null()) {
            Calibration cal;
            cal.mu = jp.at("calibration").at("mu").get<std::vector<double>>();
            cal.sigma = jp.at("calibration").at("sigma").get<std::vector<double>>();
            cal.lambda = jp.at("calibration").at("lambda").get<double>();
            ps.calib = std::move(cal);
        }
        for (const char* name : {"proto.p", "proto.p0"}) {
            auto it = table.find(name);
            if (it == table.end())
                throw IoError("checkpoint is missing tensor '" + std::string(name) + "'");
            num::Tensor t = num::Tensor::from(it->second.data, it->second.shape);
            t.set_name(name);
            if (std::string(name) == "proto.p")
                ps.p = t;
            else
                ps.p0 = t;
        }
        lc.protos = std::move(ps);
    }
    return lc;
}

}  // namespace protoflow::model
