#include "container.h"

#include <cstring>
#include <fstream>

namespace mcam {

static_assert(sizeof(float) == 4, "f32 payload assumes 4-byte float");

namespace {

const char k_magic[4] = {'M', 'C', 'A', 'M'};

void put_u32_le(std::string &out, uint32_t v) {
    for (int i = 0; i < 4; i++) out.push_back((char)((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::string &out, uint64_t v) {
    for (int i = 0; i < 8; i++) out.push_back((char)((v >> (8 * i)) & 0xff));
}

uint32_t get_u32_le(const unsigned char *p) {
    return (uint32_t)p[0] | ((uint32_t)p[1] << 8) | ((uint32_t)p[2] << 16) | ((uint32_t)p[3] << 24);
}

uint64_t get_u64_le(const unsigned char *p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; i--) v = (v << 8) | (uint64_t)p[i];
    return v;
}

bool host_is_little_endian() {
    uint32_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

void write_f32_le(std::string &out, const float *src, size_t n) {
    if (host_is_little_endian()) {
        out.append((const char *)src, n * 4);
        return;
    }
    for (size_t i = 0; i < n; i++) {
        uint32_t bits;
        std::memcpy(&bits, &src[i], 4);
        put_u32_le(out, bits);
    }
}

void read_f32_le(const unsigned char *src, float *dst, size_t n) {
    if (host_is_little_endian()) {
        std::memcpy(dst, src, n * 4);
        return;
    }
    for (size_t i = 0; i < n; i++) {
        uint32_t bits = get_u32_le(src + i * 4);
        std::memcpy(&dst[i], &bits, 4);
    }
}

} // namespace

const Mat *ContainerData::find(const std::string &name) const {
    for (const auto &[n, m] : tensors) {
        if (n == name) return &m;
    }
    return nullptr;
}

const Mat &ContainerData::require(const std::string &name) const {
    const Mat *m = find(name);
    if (!m) throw std::runtime_error("tensor not found: " + name);
    return *m;
}

void write_container(const std::string &path, const nlohmann::ordered_json &meta,
                     const std::vector<std::pair<std::string, Mat>> &tensors) {
    nlohmann::ordered_json header = meta;
    nlohmann::ordered_json index = nlohmann::ordered_json::array();
    uint64_t offset = 0;
    for (const auto &[name, m] : tensors) {
        index.push_back({{"name", name}, {"shape", {m.rows, m.cols}}, {"offset", offset}});
        offset += (uint64_t)m.size() * 4;
    }
    header["tensors"] = index;
    std::string header_text = header.dump();

    std::string out;
    out.reserve(16 + header_text.size() + offset);
    out.append(k_magic, 4);
    put_u32_le(out, k_container_version);
    put_u64_le(out, (uint64_t)header_text.size());
    out.append(header_text);
    for (const auto &[name, m] : tensors) {
        write_f32_le(out, m.data.data(), m.size());
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(out.data(), (std::streamsize)out.size());
    if (!f) throw std::runtime_error("write failed: " + path);
}

ContainerData read_container(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const unsigned char *p = (const unsigned char *)bytes.data();

    if (bytes.size() < 16) throw std::runtime_error("truncated container: " + path);
    if (std::memcmp(p, k_magic, 4) != 0) throw std::runtime_error("bad magic in " + path);
    uint32_t version = get_u32_le(p + 4);
    if (version != k_container_version) {
        throw std::runtime_error("unsupported container version " + std::to_string(version));
    }
    uint64_t header_len = get_u64_le(p + 8);
    if (16 + header_len > bytes.size()) throw std::runtime_error("truncated container header: " + path);

    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(bytes.substr(16, header_len));
    } catch (const std::exception &e) {
        throw std::runtime_error("bad container header in " + path + ": " + e.what());
    }
    if (!header.contains("tensors") || !header["tensors"].is_array()) {
        throw std::runtime_error("container header missing tensor index: " + path);
    }

    size_t payload_start = 16 + (size_t)header_len;
    size_t payload_size = bytes.size() - payload_start;

    ContainerData out;
    for (const auto &entry : header["tensors"]) {
        std::string name = entry.at("name").get<std::string>();
        auto shape = entry.at("shape");
        if (!shape.is_array() || shape.size() != 2) {
            throw std::runtime_error("tensor " + name + " has non-2d shape");
        }
        int rows = shape[0].get<int>();
        int cols = shape[1].get<int>();
        uint64_t off = entry.at("offset").get<uint64_t>();
        if (rows < 0 || cols < 0) throw std::runtime_error("tensor " + name + " has negative shape");
        uint64_t nbytes = (uint64_t)rows * (uint64_t)cols * 4;
        if (off + nbytes > payload_size) {
            throw std::runtime_error("tensor " + name + " extends past end of file");
        }
        Mat m(rows, cols);
        read_f32_le(p + payload_start + off, m.data.data(), m.size());
        out.tensors.emplace_back(std::move(name), std::move(m));
    }
    header.erase("tensors");
    out.meta = std::move(header);
    return out;
}

void save_model(const MoEModel &model, const std::string &path) {
    model.validate();
    nlohmann::ordered_json meta;
    meta["kind"] = "model";
    meta["config"] = {{"n_layers", model.config.n_layers}, {"n_experts", model.config.n_experts},
                      {"n_shared", model.config.n_shared}, {"d_model", model.config.d_model},
                      {"d_ff", model.config.d_ff},         {"top_k", model.config.top_k}};

    std::vector<std::pair<std::string, Mat>> tensors;
    for (int l = 0; l < model.config.n_layers; l++) {
        const MoELayer &layer = model.layers[(size_t)l];
        std::string prefix = "layer" + std::to_string(l) + ".";
        tensors.emplace_back(prefix + "router", layer.router);
        for (int e = 0; e < (int)layer.experts.size(); e++) {
            std::string ep = prefix + "expert" + std::to_string(e) + ".";
            tensors.emplace_back(ep + "up", layer.experts[(size_t)e].up);
            tensors.emplace_back(ep + "gate", layer.experts[(size_t)e].gate);
            tensors.emplace_back(ep + "down", layer.experts[(size_t)e].down);
        }
    }
    write_container(path, meta, tensors);
}

MoEModel load_model(const std::string &path) {
    ContainerData c = read_container(path);
    if (!c.meta.contains("kind") || c.meta["kind"] != "model") {
        throw std::runtime_error("container is not a model: " + path);
    }
    const auto &cfg = c.meta.at("config");
    MoEModel m;
    m.config.n_layers = cfg.at("n_layers").get<int>();
    m.config.n_experts = cfg.at("n_experts").get<int>();
    m.config.n_shared = cfg.at("n_shared").get<int>();
    m.config.d_model = cfg.at("d_model").get<int>();
    m.config.d_ff = cfg.at("d_ff").get<int>();
    m.config.top_k = cfg.at("top_k").get<int>();
    m.config.validate();

    for (int l = 0; l < m.config.n_layers; l++) {
        std::string prefix = "layer" + std::to_string(l) + ".";
        MoELayer layer;
        layer.config = m.config;
        layer.router = c.require(prefix + "router");
        for (int e = 0; e < m.config.total_experts(); e++) {
            std::string ep = prefix + "expert" + std::to_string(e) + ".";
            ExpertWeights w;
            w.up = c.require(ep + "up");
            w.gate = c.require(ep + "gate");
            w.down = c.require(ep + "down");
            w.width = w.up.rows; // widths live in the shapes, so pruned layers round-trip
            layer.experts.push_back(std::move(w));
        }
        layer.validate();
        m.layers.push_back(std::move(layer));
    }
    m.validate();
    return m;
}

} // namespace mcam
