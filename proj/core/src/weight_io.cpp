#include "plq/weight_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "plq/errors.hpp"

namespace plq {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'L', 'Q', 'M'};
constexpr std::size_t kPayloadStartBase = 12; // magic + version + header_len

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32(const std::string& buf, std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + 3])) << 24;
}

void put_f64(std::string& out, double d) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
}

double get_f64(const std::string& buf, std::size_t off) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    }
    return std::bit_cast<double>(bits);
}

json layer_to_json(const Layer& layer) {
    json j;
    j["kind"] = layer_kind_name(layer);
    if (const auto* c = std::get_if<Conv2D>(&layer)) {
        j["ksize"] = c->ksize;
        j["stride"] = c->stride;
        j["padding"] = c->padding;
        j["in_channels"] = c->in_channels;
        j["out_channels"] = c->out_channels;
    } else if (const auto* fc = std::get_if<FullyConnected>(&layer)) {
        j["in_dim"] = fc->in_dim;
        j["out_dim"] = fc->out_dim;
    } else if (const auto* site = std::get_if<DropoutSite>(&layer)) {
        j["p"] = site->p;
    }
    return j;
}

Layer layer_from_json(const json& j, std::size_t header_offset) {
    const std::string kind = j.value("kind", "");
    if (kind == "conv2d") {
        Conv2D c;
        c.ksize = j.at("ksize").get<int>();
        c.stride = j.at("stride").get<int>();
        c.padding = j.at("padding").get<int>();
        c.in_channels = j.at("in_channels").get<int>();
        c.out_channels = j.at("out_channels").get<int>();
        if (c.ksize <= 0 || c.stride <= 0 || c.padding < 0 || c.in_channels <= 0 ||
            c.out_channels <= 0) {
            throw ParseError("conv2d layer has non-positive dimensions", header_offset);
        }
        c.kernel = Tensor::zeros({static_cast<std::size_t>(c.ksize),
                                  static_cast<std::size_t>(c.ksize),
                                  static_cast<std::size_t>(c.in_channels),
                                  static_cast<std::size_t>(c.out_channels)});
        c.bias = Tensor::zeros({static_cast<std::size_t>(c.out_channels)});
        return c;
    }
    if (kind == "fully_connected") {
        FullyConnected fc;
        fc.in_dim = j.at("in_dim").get<int>();
        fc.out_dim = j.at("out_dim").get<int>();
        if (fc.in_dim <= 0 || fc.out_dim <= 0) {
            throw ParseError("fully_connected layer has non-positive dimensions", header_offset);
        }
        fc.weights = Tensor::zeros({static_cast<std::size_t>(fc.out_dim),
                                    static_cast<std::size_t>(fc.in_dim)});
        fc.bias = Tensor::zeros({static_cast<std::size_t>(fc.out_dim)});
        return fc;
    }
    if (kind == "relu") return Relu{};
    if (kind == "avgpool2") return AvgPool2{};
    if (kind == "flatten") return Flatten{};
    if (kind == "dropout_site") {
        DropoutSite site;
        site.p = j.at("p").get<double>();
        return site;
    }
    throw ParseError("unknown layer kind \"" + kind + "\"", header_offset);
}

// Weighted tensors of a layer in payload order.
std::vector<Tensor*> weight_tensors(Layer& layer) {
    if (auto* c = std::get_if<Conv2D>(&layer)) return {&c->kernel, &c->bias};
    if (auto* fc = std::get_if<FullyConnected>(&layer)) return {&fc->weights, &fc->bias};
    return {};
}

std::vector<const Tensor*> weight_tensors(const Layer& layer) {
    if (const auto* c = std::get_if<Conv2D>(&layer)) return {&c->kernel, &c->bias};
    if (const auto* fc = std::get_if<FullyConnected>(&layer)) return {&fc->weights, &fc->bias};
    return {};
}

} // namespace

void save_model(const EmbeddingModel& model, const std::string& path) {
    json header;
    header["format"] = "plq-model";
    header["input_shape"] = {model.input_shape[0], model.input_shape[1], model.input_shape[2]};
    header["embedding_dim"] = model.embedding_dim;
    header["dropout_p"] = model.dropout_p;
    json layers = json::array();
    for (const Layer& layer : model.layers) layers.push_back(layer_to_json(layer));
    header["layers"] = layers;
    const std::string header_text = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kWeightFileVersion);
    put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    for (const Layer& layer : model.layers) {
        for (const Tensor* t : weight_tensors(layer)) {
            for (double v : t->data) put_f64(out, v);
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw Error("cannot open \"" + path + "\" for writing");
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw Error("short write to \"" + path + "\"");
    }
}

EmbeddingModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot open \"" + path + "\" for reading");
    }
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < kPayloadStartBase) {
        throw ParseError("file too short for PLQM header", buf.size());
    }
    if (buf.compare(0, 4, kMagic, 4) != 0) {
        throw ParseError("bad magic, expected \"PLQM\"", 0);
    }
    const std::uint32_t version = get_u32(buf, 4);
    if (version != kWeightFileVersion) {
        throw ParseError("unsupported version " + std::to_string(version), 4);
    }
    const std::uint32_t header_len = get_u32(buf, 8);
    if (kPayloadStartBase + static_cast<std::size_t>(header_len) > buf.size()) {
        throw ParseError("declared header length " + std::to_string(header_len) +
                             " exceeds file size " + std::to_string(buf.size()),
                         8);
    }

    json header;
    try {
        header = json::parse(buf.substr(kPayloadStartBase, header_len));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("header JSON: ") + e.what(), kPayloadStartBase);
    }

    EmbeddingModel model;
    try {
        const auto shape = header.at("input_shape");
        model.input_shape = {shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>(),
                             shape.at(2).get<std::size_t>()};
        model.embedding_dim = header.at("embedding_dim").get<int>();
        model.dropout_p = header.at("dropout_p").get<double>();
        for (const json& lj : header.at("layers")) {
            model.layers.push_back(layer_from_json(lj, kPayloadStartBase));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("header fields: ") + e.what(), kPayloadStartBase);
    }

    std::size_t weight_count = 0;
    for (const Layer& layer : model.layers) {
        for (const Tensor* t : weight_tensors(const_cast<const Layer&>(layer))) {
            weight_count += t->numel();
        }
    }
    const std::size_t payload_start = kPayloadStartBase + header_len;
    const std::size_t expected_bytes = 8 * weight_count;
    const std::size_t actual_bytes = buf.size() - payload_start;
    if (actual_bytes != expected_bytes) {
        throw ParseError("payload holds " + std::to_string(actual_bytes) +
                             " bytes but header declares " + std::to_string(expected_bytes) +
                             " (" + std::to_string(weight_count) + " weights)",
                         payload_start + std::min(actual_bytes, expected_bytes));
    }

    std::size_t off = payload_start;
    for (Layer& layer : model.layers) {
        for (Tensor* t : weight_tensors(layer)) {
            for (double& v : t->data) {
                v = get_f64(buf, off);
                off += 8;
            }
        }
    }
    model.validate();
    return model;
}

} // namespace plq
