#include "fus/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "fus/error.hpp"

namespace fus {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
    KvConfig kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        kv.map_[key] = value;
    }
    return kv;
}

KvConfig KvConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
    const auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
}

int KvConfig::get_int(const std::string& key, int fallback) const {
    const auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad integer '" + it->second + "'");
    }
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t fallback) const {
    const auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad unsigned integer '" + it->second + "'");
    }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    const auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad number '" + it->second + "'");
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': bad boolean '" + v + "'");
}

std::vector<int> KvConfig::get_int_list(const std::string& key,
                                        const std::vector<int>& fallback) const {
    const auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    std::vector<int> out;
    for (const auto& tok : split_commas(it->second)) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': bad integer '" + tok + "'");
        }
    }
    return out;
}

std::vector<double> KvConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& fallback) const {
    const auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    std::vector<double> out;
    for (const auto& tok : split_commas(it->second)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': bad number '" + tok + "'");
        }
    }
    return out;
}

std::string KvConfig::to_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : map_) out << k << " = " << v << "\n";
    return out.str();
}

std::string VictimSettings::short_label() const {
    std::ostringstream out;
    out << arch << "/" << optimizer << "/b" << schedule.batch_size << "/lr"
        << schedule.initial_lr;
    return out.str();
}

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "dataset",          "dataset.dir",          "idx.images",
        "idx.labels",       "idx.test_images",      "idx.test_labels",
        "synthetic.classes", "synthetic.per_class",
        "synthetic.channels", "synthetic.height",   "synthetic.width",
        "synthetic.noise_sigma", "synthetic.seed",  "subsample_per_class",
        "subsample_test_per_class",
        "arch",             "optimizer",            "momentum",
        "weight_decay",     "epochs",               "initial_lr",
        "drop_epochs",      "drop_factor",          "batch_size",
        "lambda",           "target",               "ratio",
        "alpha",            "iterations",           "strategy",
        "trigger_file",     "trigger_seed",         "exclude_target",
        "epsilon",          "seed",                 "threads",
    };
    return keys;
}

}  // namespace

RunConfig RunConfig::from_kv(const KvConfig& kv) {
    for (const auto& [k, v] : kv.entries()) {
        // "study." keys carry experiment-specific lists and are read by the CLI
        if (known_keys().count(k) == 0 && k.rfind("study.", 0) != 0) {
            throw ConfigError("unknown config key '" + k + "'");
        }
    }
    RunConfig c;
    c.dataset_kind = kv.get_str("dataset", c.dataset_kind);
    c.dataset_dir = kv.get_str("dataset.dir", c.dataset_dir);
    c.idx_images = kv.get_str("idx.images", c.idx_images);
    c.idx_labels = kv.get_str("idx.labels", c.idx_labels);
    c.idx_test_images = kv.get_str("idx.test_images", c.idx_test_images);
    c.idx_test_labels = kv.get_str("idx.test_labels", c.idx_test_labels);
    c.synth.num_classes = kv.get_int("synthetic.classes", c.synth.num_classes);
    c.synth.per_class = kv.get_int("synthetic.per_class", c.synth.per_class);
    c.synth.channels = kv.get_int("synthetic.channels", c.synth.channels);
    c.synth.height = kv.get_int("synthetic.height", c.synth.height);
    c.synth.width = kv.get_int("synthetic.width", c.synth.width);
    c.synth.noise_sigma = kv.get_double("synthetic.noise_sigma", c.synth.noise_sigma);
    c.synth.seed = kv.get_u64("synthetic.seed", c.synth.seed);
    c.subsample_per_class = kv.get_int("subsample_per_class", c.subsample_per_class);
    c.subsample_test_per_class =
        kv.get_int("subsample_test_per_class", c.subsample_test_per_class);

    c.victim.arch = kv.get_str("arch", c.victim.arch);
    c.victim.optimizer = kv.get_str("optimizer", c.victim.optimizer);
    c.victim.momentum = kv.get_double("momentum", c.victim.momentum);
    c.victim.weight_decay = kv.get_double("weight_decay", c.victim.weight_decay);
    c.victim.schedule.epochs = kv.get_int("epochs", c.victim.schedule.epochs);
    c.victim.schedule.initial_lr = kv.get_double("initial_lr", c.victim.schedule.initial_lr);
    c.victim.schedule.drop_epochs = kv.get_int_list("drop_epochs", c.victim.schedule.drop_epochs);
    c.victim.schedule.drop_factor = kv.get_double("drop_factor", c.victim.schedule.drop_factor);
    c.victim.schedule.batch_size = kv.get_int("batch_size", c.victim.schedule.batch_size);

    c.lambda = kv.get_double("lambda", c.lambda);
    c.target = kv.get_int("target", c.target);
    c.ratio = kv.get_double("ratio", c.ratio);
    c.alpha = kv.get_double("alpha", c.alpha);
    c.iterations = kv.get_int("iterations", c.iterations);
    c.strategy = kv.get_str("strategy", c.strategy);
    c.trigger_file = kv.get_str("trigger_file", c.trigger_file);
    c.trigger_seed = kv.get_u64("trigger_seed", c.trigger_seed);
    c.exclude_target = kv.get_bool("exclude_target", c.exclude_target);
    c.epsilon = kv.get_double("epsilon", c.epsilon);
    c.seed = kv.get_u64("seed", c.seed);
    c.threads = kv.get_int("threads", c.threads);
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_kv(KvConfig::load(path));
}

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

std::string fmt_list(const std::vector<int>& v) {
    std::ostringstream out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out << ",";
        out << v[i];
    }
    return out.str();
}

}  // namespace

KvConfig RunConfig::to_kv() const {
    KvConfig kv;
    kv.set("dataset", dataset_kind);
    if (!dataset_dir.empty()) kv.set("dataset.dir", dataset_dir);
    if (!idx_images.empty()) kv.set("idx.images", idx_images);
    if (!idx_labels.empty()) kv.set("idx.labels", idx_labels);
    if (!idx_test_images.empty()) kv.set("idx.test_images", idx_test_images);
    if (!idx_test_labels.empty()) kv.set("idx.test_labels", idx_test_labels);
    kv.set("synthetic.classes", std::to_string(synth.num_classes));
    kv.set("synthetic.per_class", std::to_string(synth.per_class));
    kv.set("synthetic.channels", std::to_string(synth.channels));
    kv.set("synthetic.height", std::to_string(synth.height));
    kv.set("synthetic.width", std::to_string(synth.width));
    kv.set("synthetic.noise_sigma", fmt(synth.noise_sigma));
    kv.set("synthetic.seed", std::to_string(synth.seed));
    kv.set("subsample_per_class", std::to_string(subsample_per_class));
    kv.set("subsample_test_per_class", std::to_string(subsample_test_per_class));
    kv.set("arch", victim.arch);
    kv.set("optimizer", victim.optimizer);
    kv.set("momentum", fmt(victim.momentum));
    kv.set("weight_decay", fmt(victim.weight_decay));
    kv.set("epochs", std::to_string(victim.schedule.epochs));
    kv.set("initial_lr", fmt(victim.schedule.initial_lr));
    kv.set("drop_epochs", fmt_list(victim.schedule.drop_epochs));
    kv.set("drop_factor", fmt(victim.schedule.drop_factor));
    kv.set("batch_size", std::to_string(victim.schedule.batch_size));
    kv.set("lambda", fmt(lambda));
    kv.set("target", std::to_string(target));
    kv.set("ratio", fmt(ratio));
    kv.set("alpha", fmt(alpha));
    kv.set("iterations", std::to_string(iterations));
    kv.set("strategy", strategy);
    if (!trigger_file.empty()) kv.set("trigger_file", trigger_file);
    kv.set("trigger_seed", std::to_string(trigger_seed));
    kv.set("exclude_target", exclude_target ? "true" : "false");
    kv.set("epsilon", fmt(epsilon));
    kv.set("seed", std::to_string(seed));
    kv.set("threads", std::to_string(threads));
    return kv;
}

}  // namespace fus
