#include "stcids/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace stcids::dataset {

static_assert(std::endian::native == std::endian::little,
              "dataset and checkpoint files assume a little-endian host");

using features::kFeatureCount;
using features::kWindowHeight;

Dataset from_frames(const std::vector<canbus::CanFrame>& frames) {
    Dataset ds;
    ds.kind = models::ModelKind::SingleFrame;
    ds.count = frames.size();
    ds.x.resize(ds.count * kFeatureCount);
    ds.y.resize(ds.count);
    for (size_t i = 0; i < frames.size(); ++i) {
        auto row = features::frame_to_raw_features(frames[i]);
        for (int f = 0; f < kFeatureCount; ++f) ds.x[i * kFeatureCount + f] = row[f];
        ds.y[i] = frames[i].label == canbus::FrameLabel::Injected ? 1 : 0;
    }
    return ds;
}

Dataset from_windows(const std::vector<canbus::CanFrame>& frames, int stride) {
    if (stride < 1) throw ConfigError("window stride must be >= 1");
    if (frames.size() < static_cast<size_t>(kWindowHeight))
        throw features::StreamTooShort("stream shorter than one window");
    Dataset ds;
    ds.kind = models::ModelKind::MultiFrame;
    size_t rec = ds.record_size();
    for (size_t start = 0; start + kWindowHeight <= frames.size();
         start += static_cast<size_t>(stride)) {
        size_t base = ds.x.size();
        ds.x.resize(base + rec);
        int label = 0;
        for (int r = 0; r < kWindowHeight; ++r) {
            auto row = features::frame_to_raw_features(frames[start + r]);
            for (int f = 0; f < kFeatureCount; ++f) ds.x[base + r * kFeatureCount + f] = row[f];
            if (frames[start + r].label == canbus::FrameLabel::Injected) label = 1;
        }
        ds.y.push_back(label);
        ++ds.count;
    }
    return ds;
}

features::MinMaxParams fit_minmax(const Dataset& ds, const std::vector<size_t>& indices) {
    if (indices.empty()) throw features::EmptySet("fit_minmax needs a non-empty split");
    features::MinMaxParams p;
    bool first = true;
    size_t rows_per_record = ds.record_size() / kFeatureCount;
    for (size_t idx : indices) {
        const float* rec = ds.record(idx);
        for (size_t r = 0; r < rows_per_record; ++r)
            for (int f = 0; f < kFeatureCount; ++f) {
                float v = rec[r * kFeatureCount + f];
                if (first) {
                    p.x_min[f] = v;
                    p.x_max[f] = v;
                } else {
                    p.x_min[f] = std::min(p.x_min[f], v);
                    p.x_max[f] = std::max(p.x_max[f], v);
                }
            }
        first = false;
    }
    return p;
}

Dataset normalized(const Dataset& ds, const features::MinMaxParams& params) {
    Dataset out = ds;
    size_t rows = out.x.size() / kFeatureCount;
    for (size_t r = 0; r < rows; ++r)
        for (int f = 0; f < kFeatureCount; ++f)
            out.x[r * kFeatureCount + f] =
                features::apply_minmax_one(out.x[r * kFeatureCount + f], params.x_min[f], params.x_max[f]);
    return out;
}

neural::Ten<float> gather(const Dataset& ds, const std::vector<size_t>& indices, size_t begin,
                          size_t end) {
    size_t n = end - begin;
    size_t rec = ds.record_size();
    neural::Ten<float> out;
    if (ds.kind == models::ModelKind::SingleFrame)
        out.reshape({static_cast<int>(n), kFeatureCount});
    else
        out.reshape({static_cast<int>(n), kWindowHeight, kFeatureCount});
    for (size_t i = 0; i < n; ++i)
        std::memcpy(out.data() + i * rec, ds.record(indices[begin + i]), rec * sizeof(float));
    return out;
}

namespace {

constexpr char kMagic[4] = {'S', 'T', 'C', 'D'};
constexpr uint16_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error("dataset file truncated");
    return v;
}

bool is_csv(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

}  // namespace

void save(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write dataset file: " + path);
    if (is_csv(path)) {
        size_t rec = ds.record_size();
        for (size_t i = 0; i < ds.count; ++i) {
            const float* r = ds.record(i);
            for (size_t j = 0; j < rec; ++j) {
                if (j) out << ',';
                out << format_double(r[j]);
            }
            out << ',' << ds.y[i] << '\n';
        }
        return;
    }
    out.write(kMagic, 4);
    put<uint16_t>(out, kVersion);
    put<uint8_t>(out, ds.kind == models::ModelKind::SingleFrame ? 0 : 1);
    put<uint64_t>(out, ds.count);
    size_t rec = ds.record_size();
    for (size_t i = 0; i < ds.count; ++i) {
        out.write(reinterpret_cast<const char*>(ds.record(i)),
                  static_cast<std::streamsize>(rec * sizeof(float)));
        put<uint8_t>(out, static_cast<uint8_t>(ds.y[i]));
    }
    if (!out) throw Error("failed writing dataset file: " + path);
}

Dataset load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open dataset file: " + path);
    Dataset ds;
    if (is_csv(path)) {
        std::string line;
        std::vector<float> row;
        bool kind_known = false;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            row.clear();
            size_t start = 0;
            while (start <= line.size()) {
                size_t comma = line.find(',', start);
                std::string piece = comma == std::string::npos ? line.substr(start)
                                                               : line.substr(start, comma - start);
                row.push_back(std::stof(piece));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
            size_t n_features = row.size() - 1;
            if (!kind_known) {
                if (n_features == kFeatureCount)
                    ds.kind = models::ModelKind::SingleFrame;
                else if (n_features == static_cast<size_t>(kWindowHeight) * kFeatureCount)
                    ds.kind = models::ModelKind::MultiFrame;
                else
                    throw Error("dataset CSV has unexpected column count");
                kind_known = true;
            }
            if (n_features != ds.record_size()) throw Error("ragged dataset CSV");
            ds.x.insert(ds.x.end(), row.begin(), row.end() - 1);
            ds.y.push_back(static_cast<int>(row.back()));
            ++ds.count;
        }
        return ds;
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw Error("not a dataset file: " + path);
    if (get<uint16_t>(in) != kVersion) throw Error("unsupported dataset version in " + path);
    ds.kind = get<uint8_t>(in) == 0 ? models::ModelKind::SingleFrame : models::ModelKind::MultiFrame;
    ds.count = get<uint64_t>(in);
    size_t rec = ds.record_size();
    ds.x.resize(ds.count * rec);
    ds.y.resize(ds.count);
    for (size_t i = 0; i < ds.count; ++i) {
        in.read(reinterpret_cast<char*>(ds.x.data() + i * rec),
                static_cast<std::streamsize>(rec * sizeof(float)));
        if (!in) throw Error("dataset file truncated: " + path);
        ds.y[i] = get<uint8_t>(in);
    }
    return ds;
}

}  // namespace stcids::dataset
