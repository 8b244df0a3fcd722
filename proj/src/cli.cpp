#include "stcids/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "stcids/canbus.hpp"
#include "stcids/checkpoint.hpp"
#include "stcids/dataset.hpp"
#include "stcids/eval.hpp"
#include "stcids/hpo.hpp"
#include "stcids/simulate.hpp"
#include "stcids/train.hpp"

namespace stcids::cli {

namespace fs = std::filesystem;

namespace {

// ---- atomic file output + run-config sidecar ----------------------------------

void write_file_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("failed writing: " + tmp);
    }
    fs::rename(tmp, path);
}

void write_bytes_atomic(const std::string& path, const std::vector<uint8_t>& bytes) {
    write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

// Every subcommand records its resolved configuration next to its primary
// output so a run can be reproduced from the sidecar alone.
void write_runconfig(const std::string& primary_out, const std::map<std::string, std::string>& kv) {
    std::ostringstream out;
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
    write_file_atomic(primary_out + ".runconfig", out.str());
}

// ---- small key=value config files ----------------------------------------------

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (auto c = line.find('#'); c != std::string::npos) line = line.substr(0, c);
        auto strip = [](std::string s) {
            size_t b = s.find_first_not_of(" \t");
            size_t e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("bad config line in " + path + ": " + line);
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return kv;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t comma = s.find(',', start);
        out.push_back(comma == std::string::npos ? s.substr(start) : s.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

uint16_t parse_can_id(const std::string& s) {
    std::string_view v = s;
    if (v.starts_with("0x") || v.starts_with("0X")) v.remove_prefix(2);
    uint32_t raw = 0;
    if (!parse_hex(v, raw) || raw > canbus::kMaxStandardId)
        throw ConfigError("bad CAN id: " + s);
    return static_cast<uint16_t>(raw);
}

canbus::LogFormat parse_format(const std::string& s) {
    if (s == "csv") return canbus::LogFormat::CarHackingCsv;
    if (s == "candump") return canbus::LogFormat::CandumpText;
    throw ConfigError("unknown log format: " + s);
}

models::ModelKind parse_kind(const std::string& s) {
    if (s == "single") return models::ModelKind::SingleFrame;
    if (s == "window" || s == "multi") return models::ModelKind::MultiFrame;
    throw ConfigError("unknown mode: " + s);
}

// ---- simulate -------------------------------------------------------------------

struct Scenario {
    double duration_s = 10.0;
    std::string attack = "none";
    double window_start = 0.0, window_end = 0.0;
    std::optional<uint16_t> target_id;
    double injection_period_ms = 0.0;
    std::string profile_path;
    std::optional<uint64_t> seed;
    std::optional<std::array<uint8_t, 8>> spoof_payload;
};

Scenario read_scenario(const std::string& path) {
    Scenario sc;
    for (const auto& [k, v] : read_kv_file(path)) {
        if (k == "duration")
            sc.duration_s = std::stod(v);
        else if (k == "attack")
            sc.attack = v;
        else if (k == "window_start")
            sc.window_start = std::stod(v);
        else if (k == "window_end")
            sc.window_end = std::stod(v);
        else if (k == "target_id")
            sc.target_id = parse_can_id(v);
        else if (k == "injection_period_ms")
            sc.injection_period_ms = std::stod(v);
        else if (k == "profile")
            sc.profile_path = v;
        else if (k == "seed")
            sc.seed = std::stoull(v);
        else if (k == "spoof_payload") {
            auto parts = split_list(v);
            if (parts.size() != 8) throw ConfigError("spoof_payload needs 8 bytes");
            std::array<uint8_t, 8> payload{};
            for (int i = 0; i < 8; ++i) {
                uint32_t b = 0;
                if (!parse_hex(parts[static_cast<size_t>(i)], b) || b > 0xFF)
                    throw ConfigError("bad spoof_payload byte: " + parts[static_cast<size_t>(i)]);
                payload[static_cast<size_t>(i)] = static_cast<uint8_t>(b);
            }
            sc.spoof_payload = payload;
        } else
            throw ConfigError("unknown scenario key: " + k);
    }
    return sc;
}

std::vector<canbus::CanFrame> run_scenario(const Scenario& sc, uint64_t seed) {
    simulate::TrafficProfile profile =
        sc.profile_path.empty() ? simulate::default_profile(sc.duration_s)
                                : simulate::load_profile_file(sc.profile_path, sc.duration_s);
    auto traffic = simulate::generate_normal(profile, seed);
    if (sc.attack == "none") return traffic;

    simulate::AttackSpec spec;
    spec.rng_seed = splitmix64(seed ^ 0xA77AC4ull);
    spec.window_start_s = sc.window_start;
    spec.window_end_s = sc.window_end > 0 ? sc.window_end : sc.duration_s;
    spec.injection_period_ms = sc.injection_period_ms;
    if (sc.target_id) spec.target_id = *sc.target_id;
    if (sc.spoof_payload) {
        spec.spoof_payload = *sc.spoof_payload;
        spec.spoof_payload_set = true;
    }
    if (sc.attack == "dos")
        spec.kind = simulate::AttackKind::DoS;
    else if (sc.attack == "fuzzy")
        spec.kind = simulate::AttackKind::Fuzzy;
    else if (sc.attack == "spoof_rpm") {
        spec.kind = simulate::AttackKind::SpoofRpm;
        if (!spec.target_id) spec.target_id = 0x316;
    } else if (sc.attack == "spoof_gear") {
        spec.kind = simulate::AttackKind::SpoofGear;
        if (!spec.target_id) spec.target_id = 0x43F;
    } else
        throw ConfigError("unknown attack kind: " + sc.attack);
    return simulate::inject(std::move(traffic), spec);
}

// ---- hyperparameters / model config ---------------------------------------------

void apply_config_kv(const std::map<std::string, std::string>& kv, train::Hyperparameters& hp,
                     models::ModelConfig& cfg) {
    for (const auto& [k, v] : kv) {
        if (k == "learning_rate")
            hp.learning_rate = std::stod(v);
        else if (k == "optimizer")
            hp.optimizer = train::optimizer_from_name(v);
        else if (k == "dropout_rate") {
            hp.dropout_rate = std::stod(v);
            cfg.dropout_rate = hp.dropout_rate;
        } else if (k == "conv_filters") {
            auto parts = split_list(v);
            if (parts.size() != 3) throw ConfigError("conv_filters needs 3 values");
            for (int i = 0; i < 3; ++i) {
                hp.conv_filters[static_cast<size_t>(i)] = std::stoi(parts[static_cast<size_t>(i)]);
                cfg.conv_filters[static_cast<size_t>(i)] = hp.conv_filters[static_cast<size_t>(i)];
            }
        } else if (k == "dense_width") {
            hp.dense_width = std::stoi(v);
            cfg.dense_width = hp.dense_width;
        } else if (k == "batch_size")
            hp.batch_size = std::stoi(v);
        else if (k == "max_epochs")
            hp.max_epochs = std::stoi(v);
        else if (k == "l2_lambda") {
            hp.l2_lambda = std::stod(v);
            cfg.l2_lambda = hp.l2_lambda;
        } else if (k == "patience")
            hp.patience = std::stoi(v);
        else if (k == "min_delta")
            hp.min_delta = std::stod(v);
        else if (k == "clip_norm")
            hp.clip_norm = std::stod(v);
        else if (k == "lstm_hidden") {
            hp.lstm_hidden = std::stoi(v);
            cfg.lstm_hidden = hp.lstm_hidden;
        } else if (k == "attention_reduction")
            cfg.attention_reduction = std::stoi(v);
        else if (k == "conv_kernel")
            cfg.conv_kernel = std::stoi(v);
        else if (k == "spatial_kernel")
            cfg.spatial_kernel = std::stoi(v);
        else if (k == "kind")
            cfg.kind = parse_kind(v);
        else
            throw ConfigError("unknown config key: " + k);
    }
}

std::map<std::string, std::string> describe_run(const models::ModelConfig& cfg,
                                                const train::Hyperparameters& hp) {
    std::map<std::string, std::string> kv;
    kv["kind"] = models::kind_name(cfg.kind);
    kv["conv_filters"] = std::to_string(cfg.conv_filters[0]) + "," +
                         std::to_string(cfg.conv_filters[1]) + "," +
                         std::to_string(cfg.conv_filters[2]);
    kv["lstm_hidden"] = std::to_string(cfg.lstm_hidden);
    kv["dense_width"] = std::to_string(cfg.dense_width);
    kv["dropout_rate"] = format_double(cfg.dropout_rate);
    kv["l2_lambda"] = format_double(cfg.l2_lambda);
    kv["attention_reduction"] = std::to_string(cfg.attention_reduction);
    kv["learning_rate"] = format_double(hp.learning_rate);
    kv["optimizer"] = train::optimizer_name(hp.optimizer);
    kv["batch_size"] = std::to_string(hp.batch_size);
    kv["max_epochs"] = std::to_string(hp.max_epochs);
    kv["patience"] = std::to_string(hp.patience);
    kv["seed"] = std::to_string(hp.seed);
    return kv;
}

// Stratified 90/10 split: fold 0 of a seeded 10-fold is the validation set.
std::pair<std::vector<size_t>, std::vector<size_t>> holdout_split(const dataset::Dataset& ds,
                                                                  uint64_t seed) {
    auto folds = features::stratified_kfold(ds.y, 10, seed);
    return {folds[0].train, folds[0].test};
}

struct TrainedModel {
    std::unique_ptr<models::Model<float>> model;
    features::MinMaxParams norm;
    train::TrainHistory history;
};

TrainedModel train_on(const dataset::Dataset& raw, const models::ModelConfig& cfg,
                      const train::Hyperparameters& hp) {
    auto [train_idx, val_idx] = holdout_split(raw, hp.seed);
    auto norm = dataset::fit_minmax(raw, train_idx);
    auto normal = dataset::normalized(raw, norm);
    TrainedModel out;
    out.norm = norm;
    out.model = std::make_unique<models::Model<float>>(cfg, hp.seed);
    out.history = train::fit(*out.model, normal, train_idx, normal, val_idx, hp);
    return out;
}

// ---- subcommand implementations ---------------------------------------------------

int cmd_simulate(const std::string& scenario_path, std::optional<uint64_t> seed_flag,
                 const std::string& out_path, const std::string& format) {
    Scenario sc = read_scenario(scenario_path);
    if (seed_flag) sc.seed = *seed_flag;
    if (!sc.seed) throw ConfigError("simulate needs --seed (or seed= in the scenario)");
    auto frames = run_scenario(sc, *sc.seed);

    std::ostringstream log;
    canbus::write_log(log, frames, parse_format(format));
    write_file_atomic(out_path, log.str());

    std::map<std::string, std::string> kv;
    kv["subcommand"] = "simulate";
    kv["scenario"] = scenario_path;
    kv["seed"] = std::to_string(*sc.seed);
    kv["format"] = format;
    kv["attack"] = sc.attack;
    kv["duration"] = format_double(sc.duration_s);
    kv["out"] = out_path;
    write_runconfig(out_path, kv);

    size_t injected = 0;
    for (const auto& f : frames)
        if (f.label == canbus::FrameLabel::Injected) ++injected;
    std::cout << "wrote " << frames.size() << " frames (" << injected << " injected) to "
              << out_path << "\n";
    return 0;
}

int cmd_preprocess(const std::string& in_path, const std::string& format, const std::string& mode,
                   int stride, const std::string& out_path) {
    auto frames = canbus::read_log_file(in_path, parse_format(format));
    dataset::Dataset ds = parse_kind(mode) == models::ModelKind::SingleFrame
                              ? dataset::from_frames(frames)
                              : dataset::from_windows(frames, stride);

    std::string tmp = out_path + ".tmp";
    dataset::save(ds, tmp);
    fs::rename(tmp, out_path);

    std::map<std::string, std::string> kv;
    kv["subcommand"] = "preprocess";
    kv["in"] = in_path;
    kv["format"] = format;
    kv["mode"] = mode;
    kv["stride"] = std::to_string(stride);
    kv["out"] = out_path;
    write_runconfig(out_path, kv);
    std::cout << "wrote " << ds.count << " records to " << out_path << "\n";
    return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& model_config_path,
              const std::string& hp_path, uint64_t seed, std::optional<int> batch,
              std::optional<int> epochs, const std::string& out_path, std::string history_path) {
    auto raw = dataset::load(dataset_path);
    models::ModelConfig cfg = raw.kind == models::ModelKind::SingleFrame
                                  ? models::ModelConfig::best_single_frame()
                                  : models::ModelConfig::best_multi_frame();
    train::Hyperparameters hp;
    hp.conv_filters = cfg.conv_filters;
    hp.dense_width = cfg.dense_width;
    hp.dropout_rate = cfg.dropout_rate;
    if (!model_config_path.empty()) apply_config_kv(read_kv_file(model_config_path), hp, cfg);
    if (!hp_path.empty()) apply_config_kv(read_kv_file(hp_path), hp, cfg);
    if (cfg.kind != raw.kind)
        throw ConfigError("model config kind does not match the dataset mode");
    if (batch) hp.batch_size = *batch;
    if (epochs) hp.max_epochs = *epochs;
    hp.seed = seed;

    TrainedModel tm = train_on(raw, cfg, hp);

    checkpoint::Metadata meta;
    meta.seed = seed;
    meta.epochs_trained = static_cast<uint32_t>(tm.history.epochs());
    write_bytes_atomic(out_path, checkpoint::save_checkpoint(*tm.model, tm.norm, meta));
    if (history_path.empty()) history_path = out_path + ".history.csv";
    write_file_atomic(history_path, tm.history.to_csv());

    auto kv = describe_run(cfg, hp);
    kv["subcommand"] = "train";
    kv["dataset"] = dataset_path;
    kv["out"] = out_path;
    kv["history"] = history_path;
    write_runconfig(out_path, kv);

    std::cout << "trained " << models::kind_name(cfg.kind) << " model for "
              << tm.history.epochs() << " epochs (best epoch " << tm.history.best_epoch
              << ", val acc " << format_double(tm.history.val_acc[tm.history.best_epoch - 1])
              << "); checkpoint: " << out_path << "\n";
    return 0;
}

hpo::SearchSpace read_space(const std::string& path) {
    hpo::SearchSpace space = hpo::SearchSpace::defaults();
    if (path.empty()) return space;
    for (const auto& [k, v] : read_kv_file(path)) {
        auto parts = split_list(v);
        if (k == "learning_rates") {
            space.learning_rates.clear();
            for (auto& p : parts) space.learning_rates.push_back(std::stod(p));
        } else if (k == "optimizers") {
            space.optimizers.clear();
            for (auto& p : parts) space.optimizers.push_back(train::optimizer_from_name(p));
        } else if (k == "dropout_rates") {
            space.dropout_rates.clear();
            for (auto& p : parts) space.dropout_rates.push_back(std::stod(p));
        } else if (k == "filters1" || k == "filters2" || k == "filters3") {
            auto& menu = space.filter_menus[static_cast<size_t>(k[7] - '1')];
            menu.clear();
            for (auto& p : parts) menu.push_back(std::stoi(p));
        } else if (k == "dense_widths") {
            space.dense_widths.clear();
            for (auto& p : parts) space.dense_widths.push_back(std::stoi(p));
        } else
            throw ConfigError("unknown search-space key: " + k);
    }
    return space;
}

int cmd_tune(const std::string& dataset_path, const std::string& space_path, int trials,
             int repeats, uint64_t seed, std::optional<int> batch, std::optional<int> epochs,
             const std::string& out_path) {
    auto raw = dataset::load(dataset_path);
    hpo::SearchSpace space = read_space(space_path);

    train::Hyperparameters base;
    base.seed = seed;
    if (batch) base.batch_size = *batch;
    if (epochs) base.max_epochs = *epochs;

    hpo::ObjectiveFn objective = [&](const hpo::TrialConfig& tc, int, uint64_t run_seed) {
        train::Hyperparameters hp = base;
        hp.learning_rate = tc.learning_rate;
        hp.optimizer = tc.optimizer;
        hp.dropout_rate = tc.dropout_rate;
        hp.conv_filters = tc.conv_filters;
        hp.dense_width = tc.dense_width;
        hp.seed = run_seed;
        models::ModelConfig cfg = train::make_config(hp, raw.kind);
        try {
            TrainedModel tm = train_on(raw, cfg, hp);
            return tm.history.val_acc[static_cast<size_t>(tm.history.best_epoch - 1)];
        } catch (const train::Diverged&) {
            return 0.0;  // a diverging configuration scores as worthless
        }
    };

    hpo::TuneOptions opt;
    opt.trials = trials;
    opt.repeats = repeats;
    opt.seed = seed;
    auto records = hpo::tune(space, objective, opt);

    write_file_atomic(out_path, hpo::tuning_report_csv(records));
    std::map<std::string, std::string> kv;
    kv["subcommand"] = "tune";
    kv["dataset"] = dataset_path;
    kv["trials"] = std::to_string(trials);
    kv["repeats"] = std::to_string(repeats);
    kv["seed"] = std::to_string(seed);
    kv["out"] = out_path;
    write_runconfig(out_path, kv);

    std::cout << hpo::top3_table(records);
    return 0;
}

int cmd_eval(const std::string& dataset_path, const std::string& checkpoint_path,
             const std::string& out_path) {
    auto raw = dataset::load(dataset_path);
    auto ck = checkpoint::load_checkpoint_file(checkpoint_path);
    if (ck.config.kind != raw.kind)
        throw KindMismatch("checkpoint kind does not match the dataset mode");
    auto normal = dataset::normalized(raw, ck.norm);

    std::vector<size_t> idx(normal.count);
    std::iota(idx.begin(), idx.end(), 0);
    auto preds = train::predict_labels(*ck.model, normal, idx);
    auto report = eval::metrics(eval::confusion(preds, normal.y));

    std::string name = std::string(models::kind_name(ck.config.kind)) + "-frame";
    std::cout << eval::metrics_table({{name, report}});
    if (!out_path.empty()) {
        write_file_atomic(out_path, eval::metrics_csv(report));
        std::map<std::string, std::string> kv;
        kv["subcommand"] = "eval";
        kv["dataset"] = dataset_path;
        kv["checkpoint"] = checkpoint_path;
        kv["out"] = out_path;
        write_runconfig(out_path, kv);
    }
    return 0;
}

int cmd_bench(const std::string& checkpoint_path, const std::string& batches_arg,
              const std::string& dataset_path, int warmup, int iters, uint64_t seed,
              const std::string& out_path) {
    auto ck = checkpoint::load_checkpoint_file(checkpoint_path);
    std::vector<int> batches;
    for (auto& p : split_list(batches_arg)) batches.push_back(std::stoi(p));

    dataset::Dataset inputs;
    if (!dataset_path.empty()) {
        auto raw = dataset::load(dataset_path);
        if (raw.kind != ck.config.kind)
            throw KindMismatch("bench dataset mode does not match the checkpoint");
        inputs = dataset::normalized(raw, ck.norm);
    } else {
        inputs.kind = ck.config.kind;
        inputs.count = static_cast<size_t>(*std::max_element(batches.begin(), batches.end()));
        inputs.x.resize(inputs.count * inputs.record_size());
        inputs.y.assign(inputs.count, 0);
        std::mt19937_64 rng(seed);
        for (auto& v : inputs.x) v = static_cast<float>(draw_u01(rng));
    }

    auto report = eval::benchmark_latency(*ck.model, inputs, batches, warmup, iters);
    std::cout << report.to_csv();
    if (!out_path.empty()) {
        write_file_atomic(out_path, report.to_csv());
        std::map<std::string, std::string> kv;
        kv["subcommand"] = "bench";
        kv["checkpoint"] = checkpoint_path;
        kv["batches"] = batches_arg;
        kv["warmup"] = std::to_string(warmup);
        kv["iters"] = std::to_string(iters);
        kv["out"] = out_path;
        write_runconfig(out_path, kv);
    }
    return 0;
}

int cmd_detect(const std::string& checkpoint_path, const std::string& in_path,
               const std::string& format, const std::string& mode_flag, int stride,
               const std::string& directory_path, const std::string& out_path,
               const std::string& attention_path) {
    auto ck = checkpoint::load_checkpoint_file(checkpoint_path);
    if (!mode_flag.empty() && parse_kind(mode_flag) != ck.config.kind)
        throw KindMismatch("checkpoint kind does not match --mode");
    canbus::EcuDirectory dir = directory_path.empty() ? canbus::default_directory()
                                                      : canbus::EcuDirectory::load_file(directory_path);
    auto frames = canbus::read_log_file(in_path, parse_format(format));

    dataset::Dataset raw = ck.config.kind == models::ModelKind::SingleFrame
                               ? dataset::from_frames(frames)
                               : dataset::from_windows(frames, stride);
    auto normal = dataset::normalized(raw, ck.norm);

    std::ostringstream alerts;
    std::ostringstream attn;
    constexpr int kBatch = 256;
    size_t emitted = 0;
    for (size_t b = 0; b < normal.count; b += kBatch) {
        size_t e = std::min(normal.count, b + kBatch);
        std::vector<size_t> idx(e - b);
        std::iota(idx.begin(), idx.end(), b);
        auto x = dataset::gather(normal, idx, 0, idx.size());
        auto probs = ck.model->predict(x);
        const auto& att = ck.model->final_attention();
        for (size_t i = 0; i < idx.size(); ++i) {
            double p = probs.at(static_cast<int>(i), 1);
            if (p <= 0.5) continue;
            size_t record = idx[i];
            ++emitted;
            if (ck.config.kind == models::ModelKind::SingleFrame) {
                const auto& f = frames[record];
                auto trace = canbus::trace_ecu(f.can_id, dir);
                alerts << format_fixed(f.timestamp, 6) << '\t' << record << '\t'
                       << format_fixed(p, 6) << '\t' << "INTRUSION" << '\t' << "0x"
                       << to_hex(f.can_id, 3) << '\t'
                       << (trace.known ? trace.transmitter : "Unknown") << '\n';
            } else {
                size_t last = record * static_cast<size_t>(stride) + features::kWindowHeight - 1;
                alerts << format_fixed(frames[last].timestamp, 6) << '\t' << record << '\t'
                       << format_fixed(p, 6) << '\t' << "INTRUSION" << '\t' << "-" << '\t' << "-"
                       << '\n';
            }
            if (!attention_path.empty()) {
                attn << record;
                for (int t = 0; t < att.ext[1]; ++t)
                    attn << ',' << format_double(att.at(static_cast<int>(i), t));
                attn << '\n';
            }
        }
    }

    if (out_path.empty())
        std::cout << alerts.str();
    else {
        write_file_atomic(out_path, alerts.str());
        std::map<std::string, std::string> kv;
        kv["subcommand"] = "detect";
        kv["checkpoint"] = checkpoint_path;
        kv["in"] = in_path;
        kv["format"] = format;
        kv["stride"] = std::to_string(stride);
        kv["out"] = out_path;
        write_runconfig(out_path, kv);
    }
    if (!attention_path.empty()) write_file_atomic(attention_path, attn.str());
    std::cerr << emitted << " alerts from " << normal.count << " records\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"CAN-bus intrusion detection toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate labeled CAN traffic from a scenario");
    std::string sim_scenario, sim_out, sim_format = "csv";
    std::optional<uint64_t> sim_seed;
    sim->add_option("--scenario", sim_scenario, "scenario config file")->required();
    sim->add_option("--seed", sim_seed, "rng seed (overrides the scenario's)");
    sim->add_option("--out", sim_out, "output log path")->required();
    sim->add_option("--format", sim_format, "csv|candump");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "log file to feature dataset");
    std::string pre_in, pre_out, pre_format = "csv", pre_mode = "single";
    int pre_stride = 64;
    pre->add_option("--in", pre_in, "input log")->required();
    pre->add_option("--format", pre_format, "csv|candump");
    pre->add_option("--mode", pre_mode, "single|window");
    pre->add_option("--stride", pre_stride, "window stride (window mode)");
    pre->add_option("--out", pre_out, "output dataset (.csv for text)")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a model on a dataset");
    std::string tr_dataset, tr_model_cfg, tr_hp, tr_out, tr_history;
    uint64_t tr_seed = 0;
    bool tr_seed_set = false;
    std::optional<int> tr_batch, tr_epochs;
    tr->add_option("--dataset", tr_dataset)->required();
    tr->add_option("--model-config", tr_model_cfg, "architecture config file");
    tr->add_option("--hp", tr_hp, "training hyperparameter file");
    tr->add_option("--seed", tr_seed)->required()->each([&](const std::string&) { tr_seed_set = true; });
    tr->add_option("--batch", tr_batch);
    tr->add_option("--epochs", tr_epochs);
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--history", tr_history, "history CSV path");

    // tune
    auto* tu = app.add_subcommand("tune", "Bayesian hyperparameter search");
    std::string tu_dataset, tu_space, tu_out;
    int tu_trials = 10, tu_repeats = 3;
    uint64_t tu_seed = 0;
    std::optional<int> tu_batch, tu_epochs;
    tu->add_option("--dataset", tu_dataset)->required();
    tu->add_option("--space", tu_space, "search-space file (defaults built in)");
    tu->add_option("--trials", tu_trials);
    tu->add_option("--repeats", tu_repeats);
    tu->add_option("--seed", tu_seed)->required();
    tu->add_option("--batch", tu_batch);
    tu->add_option("--epochs", tu_epochs);
    tu->add_option("--out", tu_out, "trial report CSV")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "metrics of a checkpoint on a dataset");
    std::string ev_dataset, ev_checkpoint, ev_out;
    ev->add_option("--dataset", ev_dataset)->required();
    ev->add_option("--checkpoint", ev_checkpoint)->required();
    ev->add_option("--out", ev_out, "metrics CSV");

    // bench
    auto* be = app.add_subcommand("bench", "inference latency benchmark");
    std::string be_checkpoint, be_batches = "1,64,256", be_dataset, be_out;
    int be_warmup = 50, be_iters = 500;
    uint64_t be_seed = 0;
    be->add_option("--checkpoint", be_checkpoint)->required();
    be->add_option("--batches", be_batches, "comma-separated batch sizes");
    be->add_option("--dataset", be_dataset, "inputs (synthetic when omitted)");
    be->add_option("--warmup", be_warmup);
    be->add_option("--iters", be_iters);
    be->add_option("--seed", be_seed);
    be->add_option("--out", be_out, "latency CSV");

    // detect
    auto* de = app.add_subcommand("detect", "stream detection with ECU traceback");
    std::string de_checkpoint, de_in, de_format = "csv", de_mode, de_dir, de_out, de_attn;
    int de_stride = 64;
    de->add_option("--checkpoint", de_checkpoint)->required();
    de->add_option("--in", de_in, "input stream log")->required();
    de->add_option("--format", de_format, "csv|candump");
    de->add_option("--mode", de_mode, "single|window (checked against the checkpoint)");
    de->add_option("--stride", de_stride, "window stride (window mode)");
    de->add_option("--directory", de_dir, "ECU directory file");
    de->add_option("--out", de_out, "alert file (stdout when omitted)");
    de->add_option("--attention", de_attn, "write per-alert attention weights CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(sim_scenario, sim_seed, sim_out, sim_format);
        if (pre->parsed()) return cmd_preprocess(pre_in, pre_format, pre_mode, pre_stride, pre_out);
        if (tr->parsed())
            return cmd_train(tr_dataset, tr_model_cfg, tr_hp, tr_seed, tr_batch, tr_epochs, tr_out,
                             tr_history);
        if (tu->parsed())
            return cmd_tune(tu_dataset, tu_space, tu_trials, tu_repeats, tu_seed, tu_batch,
                            tu_epochs, tu_out);
        if (ev->parsed()) return cmd_eval(ev_dataset, ev_checkpoint, ev_out);
        if (be->parsed())
            return cmd_bench(be_checkpoint, be_batches, be_dataset, be_warmup, be_iters, be_seed,
                             be_out);
        if (de->parsed())
            return cmd_detect(de_checkpoint, de_in, de_format, de_mode, de_stride, de_dir, de_out,
                              de_attn);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace stcids::cli
