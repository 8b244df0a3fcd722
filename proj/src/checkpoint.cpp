#include "stcids/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace stcids::checkpoint {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'C', 'I'};
constexpr uint16_t kVersion = 1;

void append_bytes(std::vector<uint8_t>& out, const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

template <class T>
void append(std::vector<uint8_t>& out, T v) {
    append_bytes(out, &v, sizeof(T));
}

struct Reader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void read(void* p, size_t n) {
        if (pos + n > bytes.size()) throw TruncatedFile("checkpoint ends mid-record");
        std::memcpy(p, bytes.data() + pos, n);
        pos += n;
    }
    template <class T>
    T get() {
        T v{};
        read(&v, sizeof(T));
        return v;
    }
};

std::string config_block(const models::ModelConfig& c, const Metadata& m) {
    std::ostringstream out;
    out << "kind=" << models::kind_name(c.kind) << '\n';
    out << "conv_filters=" << c.conv_filters[0] << ',' << c.conv_filters[1] << ','
        << c.conv_filters[2] << '\n';
    out << "lstm_hidden=" << c.lstm_hidden << '\n';
    out << "lstm_blocks=" << c.lstm_blocks << '\n';
    out << "conv_blocks=" << c.conv_blocks << '\n';
    out << "dense_width=" << c.dense_width << '\n';
    out << "dropout_rate=" << format_double(c.dropout_rate) << '\n';
    out << "l2_lambda=" << format_double(c.l2_lambda) << '\n';
    out << "attention_reduction=" << c.attention_reduction << '\n';
    out << "conv_kernel=" << c.conv_kernel << '\n';
    out << "spatial_kernel=" << c.spatial_kernel << '\n';
    out << "seed=" << m.seed << '\n';
    out << "epochs_trained=" << m.epochs_trained << '\n';
    return out.str();
}

void parse_config_block(const std::string& text, models::ModelConfig& c, Metadata& m) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("bad checkpoint config line: " + line);
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        if (key == "kind")
            c.kind = val == "single" ? models::ModelKind::SingleFrame : models::ModelKind::MultiFrame;
        else if (key == "conv_filters") {
            std::istringstream vs(val);
            char comma;
            vs >> c.conv_filters[0] >> comma >> c.conv_filters[1] >> comma >> c.conv_filters[2];
        } else if (key == "lstm_hidden")
            c.lstm_hidden = std::stoi(val);
        else if (key == "lstm_blocks")
            c.lstm_blocks = std::stoi(val);
        else if (key == "conv_blocks")
            c.conv_blocks = std::stoi(val);
        else if (key == "dense_width")
            c.dense_width = std::stoi(val);
        else if (key == "dropout_rate")
            c.dropout_rate = std::stod(val);
        else if (key == "l2_lambda")
            c.l2_lambda = std::stod(val);
        else if (key == "attention_reduction")
            c.attention_reduction = std::stoi(val);
        else if (key == "conv_kernel")
            c.conv_kernel = std::stoi(val);
        else if (key == "spatial_kernel")
            c.spatial_kernel = std::stoi(val);
        else if (key == "seed")
            m.seed = std::stoull(val);
        else if (key == "epochs_trained")
            m.epochs_trained = static_cast<uint32_t>(std::stoul(val));
        else
            throw Error("unknown checkpoint config key: " + key);
    }
}

void append_tensor(std::vector<uint8_t>& out, const std::string& name,
                   const neural::Ten<float>& t) {
    append<uint16_t>(out, static_cast<uint16_t>(name.size()));
    append_bytes(out, name.data(), name.size());
    append<uint8_t>(out, static_cast<uint8_t>(t.rank));
    for (int i = 0; i < t.rank; ++i) append<uint32_t>(out, static_cast<uint32_t>(t.ext[i]));
    append_bytes(out, t.data(), t.size() * sizeof(float));
}

}  // namespace

std::vector<uint8_t> save_checkpoint(models::Model<float>& model, const features::MinMaxParams& norm,
                                     const Metadata& meta) {
    std::vector<uint8_t> out;
    append_bytes(out, kMagic, 4);
    append<uint16_t>(out, kVersion);
    std::string cfg = config_block(model.cfg, meta);
    append<uint32_t>(out, static_cast<uint32_t>(cfg.size()));
    append_bytes(out, cfg.data(), cfg.size());

    std::vector<std::pair<std::string, const neural::Ten<float>*>> tensors;
    for (auto* p : model.params()) tensors.emplace_back(p->name, &p->value);
    for (auto& [name, t] : model.buffers()) tensors.emplace_back(name, t);
    neural::Ten<float> xmin({features::kFeatureCount}), xmax({features::kFeatureCount});
    for (int i = 0; i < features::kFeatureCount; ++i) {
        xmin.at(i) = norm.x_min[i];
        xmax.at(i) = norm.x_max[i];
    }
    tensors.emplace_back("norm.x_min", &xmin);
    tensors.emplace_back("norm.x_max", &xmax);

    append<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
    for (auto& [name, t] : tensors) append_tensor(out, name, *t);
    return out;
}

Checkpoint load_checkpoint(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagic("not a checkpoint (bad magic)");
    uint16_t version = r.get<uint16_t>();
    if (version != kVersion)
        throw VersionMismatch("unsupported checkpoint version " + std::to_string(version));

    uint32_t cfg_len = r.get<uint32_t>();
    std::string cfg_text(cfg_len, '\0');
    r.read(cfg_text.data(), cfg_len);

    Checkpoint ck;
    parse_config_block(cfg_text, ck.config, ck.meta);
    ck.model = std::make_unique<models::Model<float>>(ck.config, ck.meta.seed);

    std::map<std::string, neural::Ten<float>*> slots;
    for (auto* p : ck.model->params()) slots[p->name] = &p->value;
    for (auto& [name, t] : ck.model->buffers()) slots[name] = t;
    neural::Ten<float> xmin({features::kFeatureCount}), xmax({features::kFeatureCount});
    slots["norm.x_min"] = &xmin;
    slots["norm.x_max"] = &xmax;

    uint32_t n_tensors = r.get<uint32_t>();
    size_t filled = 0;
    for (uint32_t i = 0; i < n_tensors; ++i) {
        uint16_t name_len = r.get<uint16_t>();
        std::string name(name_len, '\0');
        r.read(name.data(), name_len);
        uint8_t rank = r.get<uint8_t>();
        if (rank < 1 || rank > 4) throw Error("checkpoint tensor has bad rank");
        std::array<int, 4> ext{1, 1, 1, 1};
        size_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            ext[d] = static_cast<int>(r.get<uint32_t>());
            numel *= static_cast<size_t>(ext[d]);
        }
        auto it = slots.find(name);
        if (it == slots.end()) throw Error("checkpoint tensor has unknown name: " + name);
        neural::Ten<float>* dst = it->second;
        if (dst->rank != rank || dst->ext != ext)
            throw Error("checkpoint tensor shape mismatch for " + name);
        r.read(dst->data(), numel * sizeof(float));
        ++filled;
    }
    if (filled != slots.size()) throw TruncatedFile("checkpoint is missing tensors");
    if (r.pos != bytes.size()) throw Error("trailing bytes after checkpoint payload");

    for (int i = 0; i < features::kFeatureCount; ++i) {
        ck.norm.x_min[i] = xmin.at(i);
        ck.norm.x_max[i] = xmax.at(i);
    }
    return ck;
}

void save_checkpoint_file(const std::string& path, models::Model<float>& model,
                          const features::MinMaxParams& norm, const Metadata& meta) {
    auto bytes = save_checkpoint(model, norm, meta);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_checkpoint(bytes);
}

}  // namespace stcids::checkpoint
