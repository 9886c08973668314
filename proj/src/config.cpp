#include "paint/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace paint {

namespace {
std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}
}  // namespace

RunConfig::RunConfig() {
    auto def = [&](const char* sec, const char* key, const char* value, const char* help) {
        values_[sec][key] = Entry{value, help};
    };

    def("system", "kind", "kolmogorov", "logistic | lorenz | kolmogorov");
    def("system", "grid", "32", "grid side (power of two)");
    def("system", "nu", "0.015", "kinematic viscosity");
    def("system", "k_f", "4", "forcing wavenumber");
    def("system", "dt_solver", "0.005", "solver timestep");

    def("dataset", "params", "1.6,1.7,1.8,1.9,2.0,2.1,2.2,2.3",
        "conditioning parameter per trajectory (forcing amplitude)");
    def("dataset", "frames", "1000", "stored frames per trajectory");
    def("dataset", "stride", "70", "solver steps between stored frames");
    def("dataset", "burn_in", "2000", "solver steps discarded before storing");
    def("dataset", "seed", "0", "simulation base seed");
    def("dataset", "dir", "data", "output directory for trajectories + manifest");

    def("model", "patch", "4", "patch size in pixels");
    def("model", "dim", "64", "token width");
    def("model", "layers", "4", "attention blocks (window model alternates spatial/temporal)");
    def("model", "heads", "2", "attention heads");
    def("model", "mlp_ratio", "4", "MLP expansion factor");
    def("model", "history", "8", "measured frames per window (includes current)");
    def("model", "forecast", "4", "forecast frames per window");
    def("model", "context", "2", "AR context frames");

    def("training", "steps", "20000", "optimizer steps");
    def("training", "batch", "16", "windows per step");
    def("training", "lr_start", "5e-7", "warmup start learning rate");
    def("training", "lr_peak", "1e-4", "post-warmup learning rate");
    def("training", "lr_end", "1e-5", "final learning rate");
    def("training", "warmup_frac", "0.1", "warmup fraction of total steps");
    def("training", "weight_decay", "0.05", "AdamW decoupled decay");
    def("training", "loss_alpha", "9", "probe-vicinity loss bump (probe pixels weigh 1+alpha)");
    def("training", "loss_sigma", "2", "loss bump radius in pixels");
    def("training", "train_probes", "25", "random probes per sample");
    def("training", "window_dropout", "true", "randomly truncate measurement windows");
    def("training", "seed", "0", "training seed");
    def("training", "checkpoint_every", "2000", "steps between checkpoints");
    def("training", "out", "run", "output directory for checkpoints + logs");

    def("twin", "mode", "sliding", "sequence | sliding");
    def("twin", "seeds", "10", "ensemble members");
    def("twin", "steps", "20", "denoising steps");
    def("twin", "constellation", "grid", "grid | vertical | random | file");
    def("twin", "probe_count", "10", "grid side count / probe count");
    def("twin", "probe_file", "", "probe file when constellation = file");
    def("twin", "seed", "0", "sampling seed");

    def("eval", "rollout", "200", "evaluation rollout length in frames");
    def("eval", "out", "eval", "output directory for reports");
    def("eval", "seed", "0", "evaluation seed");
}

const RunConfig::Entry& RunConfig::entry(const std::string& section, const std::string& key) const {
    auto s = values_.find(section);
    if (s == values_.end()) throw config_error("unknown config section '" + section + "'");
    auto k = s->second.find(key);
    if (k == s->second.end())
        throw config_error("unknown config key '" + section + "." + key + "'");
    return k->second;
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
    entry(section, key);  // validate against the schema
    values_[section][key].value = value;
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file '" + path.string() + "'");
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error(path.string() + ":" + std::to_string(lineno) +
                                   ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (values_.find(section) == values_.end())
                throw config_error(path.string() + ":" + std::to_string(lineno) +
                                   ": unknown section '" + section + "'");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
        if (section.empty())
            throw config_error(path.string() + ":" + std::to_string(lineno) +
                               ": key outside any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            set(section, key, value);
        } catch (const config_error& e) {
            throw config_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::string RunConfig::get_str(const std::string& section, const std::string& key) const {
    return entry(section, key).value;
}

double RunConfig::get_num(const std::string& section, const std::string& key) const {
    const auto& v = entry(section, key).value;
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw config_error("config " + section + "." + key + ": '" + v + "' is not a number");
    }
}

int RunConfig::get_int(const std::string& section, const std::string& key) const {
    const double d = get_num(section, key);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw config_error("config " + section + "." + key + ": expected an integer");
    return i;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key) const {
    const auto& v = entry(section, key).value;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw config_error("config " + section + "." + key + ": '" + v + "' is not a boolean");
}

std::vector<double> RunConfig::get_list(const std::string& section, const std::string& key) const {
    const auto& v = entry(section, key).value;
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (...) {
            throw config_error("config " + section + "." + key + ": '" + item +
                               "' is not a number");
        }
    }
    if (out.empty()) throw config_error("config " + section + "." + key + ": empty list");
    return out;
}

std::string RunConfig::print() const {
    std::ostringstream os;
    for (auto& [section, keys] : values_) {
        os << "[" << section << "]\n";
        for (auto& [key, e] : keys) os << key << " = " << e.value << "\n";
        os << "\n";
    }
    return os.str();
}

}  // namespace paint
