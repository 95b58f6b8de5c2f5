#include "rgpd/cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace rgpd {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

template <class T>
T parse_number(const std::string& text) {
    const std::string s = trim(text);
    T v{};
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || s.empty()) throw std::invalid_argument("not a number");
    return v;
}

std::string format_double(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
}

bool parse_bool(const std::string& text) {
    const std::string s = trim(text);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::invalid_argument("not a boolean");
}

struct Field {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

using Table = std::map<std::string, std::map<std::string, Field>>;

Field size_field(std::size_t& v) {
    return {[&v](const std::string& s) { v = parse_number<std::size_t>(s); }, [&v] { return std::to_string(v); }};
}
Field u64_field(std::uint64_t& v) {
    return {[&v](const std::string& s) { v = parse_number<std::uint64_t>(s); }, [&v] { return std::to_string(v); }};
}
Field double_field(double& v) {
    return {[&v](const std::string& s) { v = parse_number<double>(s); }, [&v] { return format_double(v); }};
}
Field bool_field(bool& v) {
    return {[&v](const std::string& s) { v = parse_bool(s); }, [&v] { return std::string(v ? "true" : "false"); }};
}
Field string_field(std::string& v) {
    return {[&v](const std::string& s) { v = trim(s); }, [&v] { return v; }};
}
Field list_field(std::vector<std::string>& v) {
    return {[&v](const std::string& s) { v = split_list(s); }, [&v] { return join(v); }};
}
Field size_list_field(std::vector<std::size_t>& v) {
    return {[&v](const std::string& s) {
                std::vector<std::size_t> out;
                for (const auto& item : split_list(s)) out.push_back(parse_number<std::size_t>(item));
                if (out.empty()) throw std::invalid_argument("empty list");
                v = out;
            },
            [&v] {
                std::vector<std::string> items;
                for (auto x : v) items.push_back(std::to_string(x));
                return join(items);
            }};
}
Field target_field(TargetKind& v) {
    return {[&v](const std::string& s) {
                const auto t = trim(s);
                if (t == "rul") v = TargetKind::rul;
                else if (t == "soh") v = TargetKind::soh;
                else throw std::invalid_argument("expected rul or soh");
            },
            [&v] { return std::string(v == TargetKind::rul ? "rul" : "soh"); }};
}

Table make_table(RunConfig& c) {
    Table t;
    auto& d = t["data"];
    d["source"] = {[&c](const std::string& s) {
                       const auto v = trim(s);
                       if (v == "synthetic") c.data.source = DataSource::synthetic;
                       else if (v == "cmapss") c.data.source = DataSource::cmapss;
                       else throw std::invalid_argument("expected synthetic or cmapss");
                   },
                   [&c] { return std::string(c.data.source == DataSource::synthetic ? "synthetic" : "cmapss"); }};
    d["cmapss_dir"] = {[&c](const std::string& s) { c.data.cmapss_dir = trim(s); },
                       [&c] { return c.data.cmapss_dir.string(); }};
    d["subset"] = string_field(c.data.subset);
    d["channels"] = list_field(c.data.channels);
    d["drop"] = list_field(c.data.drop);
    d["drop_constant"] = bool_field(c.data.drop_constant);
    d["window_sizes"] = size_list_field(c.data.window_sizes);
    d["stride"] = size_field(c.data.stride);
    d["valid_stride"] = size_field(c.data.valid_stride);
    d["rul_cap"] = double_field(c.data.rul_cap);
    d["train_fraction"] = double_field(c.data.train_fraction);
    d["valid_fraction"] = double_field(c.data.valid_fraction);
    d["truncate_low"] = double_field(c.data.truncate_low);
    d["truncate_high"] = double_field(c.data.truncate_high);
    d["split_seed"] = u64_field(c.data.split_seed);

    auto& s = t["synth"];
    s["units"] = size_field(c.data.synth.units);
    s["min_length"] = size_field(c.data.synth.min_length);
    s["max_length"] = size_field(c.data.synth.max_length);
    s["channels"] = size_field(c.data.synth.channels);
    s["noise"] = double_field(c.data.synth.noise);
    s["seed"] = u64_field(c.data.synth.seed);
    s["target"] = target_field(c.data.synth.target);

    auto& m = t["model"];
    m["hidden"] = size_field(c.model.hidden);
    m["gat_heads"] = size_field(c.model.gat_heads);
    m["gat_slope"] = double_field(c.model.gat_slope);
    m["graph_mode"] = {[&c](const std::string& v) {
                           const auto x = trim(v);
                           if (x == "temporal") c.model.graph_mode = GraphMode::temporal;
                           else if (x == "channel") c.model.graph_mode = GraphMode::channel;
                           else throw std::invalid_argument("expected temporal or channel");
                       },
                       [&c] { return std::string(c.model.graph_mode == GraphMode::temporal ? "temporal" : "channel"); }};
    m["gcrn_refine_steps"] = size_field(c.model.gcrn_refine_steps);
    m["correlation_threshold"] = double_field(c.model.correlation_threshold);
    m["tau_kernel"] = size_field(c.model.tau_kernel);
    m["tau_dilated_kernel"] = size_field(c.model.tau_dilated_kernel);
    m["tau_dilation"] = size_field(c.model.tau_dilation);
    m["mhsa_heads"] = size_field(c.model.mhsa_heads);
    m["time_embed"] = size_field(c.model.time_embed);
    m["dynamics_width"] = size_field(c.model.dynamics_width);
    m["dynamics_depth"] = size_field(c.model.dynamics_depth);
    m["use_tau"] = bool_field(c.model.use_tau);
    m["use_rl"] = bool_field(c.model.use_rl);
    m["per_channel_action"] = bool_field(c.model.per_channel_action);

    auto& a = t["sac"];
    a["hidden"] = size_field(c.model.sac.hidden);
    a["a_max"] = double_field(c.model.sac.a_max);
    a["alpha_ent"] = double_field(c.model.sac.alpha_ent);
    a["gamma"] = double_field(c.model.sac.gamma);
    a["soft_update"] = double_field(c.model.sac.soft_update);
    a["actor_lr"] = double_field(c.model.sac.actor_lr);
    a["critic_lr"] = double_field(c.model.sac.critic_lr);
    a["batch_size"] = size_field(c.model.sac.batch_size);
    a["capacity"] = size_field(c.model.sac.capacity);

    auto& r = t["train"];
    r["epochs"] = size_field(c.train.epochs);
    r["batch_size"] = size_field(c.train.batch_size);
    r["lr"] = double_field(c.train.lr);
    r["lr_step"] = size_field(c.train.lr_step);
    r["lr_decay"] = double_field(c.train.lr_decay);
    r["accumulate"] = size_field(c.train.accumulate);
    r["clip_norm"] = double_field(c.train.clip_norm);
    r["use_mixup"] = bool_field(c.train.use_mixup);
    r["mixup_alpha"] = double_field(c.train.mixup_alpha);
    r["w_pde"] = double_field(c.train.w_pde);
    r["seed"] = u64_field(c.train.seed);
    r["score_convention"] = {[&c](const std::string& v) { c.train.score = parse_score_convention(trim(v)); },
                             [&c] { return to_string(c.train.score); }};

    auto& q = t["q"];
    q["alpha"] = double_field(c.train.q.alpha);
    q["gamma"] = double_field(c.train.q.gamma);
    q["epsilon"] = double_field(c.train.q.epsilon);
    q["epsilon_decay"] = double_field(c.train.q.epsilon_decay);
    q["epsilon_floor"] = double_field(c.train.q.epsilon_floor);
    q["bins"] = size_field(c.train.q.bins);
    q["state_low"] = double_field(c.train.q.state_low);
    q["state_high"] = double_field(c.train.q.state_high);
    return t;
}

void validate(const RunConfig& c, const std::string& origin) {
    auto fail = [&](const std::string& what) { throw ConfigError(origin + ": " + what); };
    if (c.data.source == DataSource::cmapss && c.data.cmapss_dir.empty()) fail("data.source = cmapss needs data.cmapss_dir");
    if (c.data.source == DataSource::synthetic && !c.data.cmapss_dir.empty()) {
        fail("data.cmapss_dir is set but data.source is synthetic; choose one source");
    }
    for (auto w : c.data.window_sizes)
        if (w < 3) fail("window sizes must be at least 3");
    if (c.data.stride == 0 || c.data.valid_stride == 0) fail("strides must be positive");
    if (c.data.rul_cap <= 0) fail("data.rul_cap must be positive");
    if (c.data.train_fraction <= 0 || c.data.valid_fraction <= 0 || c.data.train_fraction + c.data.valid_fraction >= 1.0) {
        if (c.data.source == DataSource::synthetic) fail("train and valid fractions must be positive and sum below 1");
    }
    if (c.data.valid_fraction <= 0 || c.data.valid_fraction >= 1) fail("data.valid_fraction must lie in (0, 1)");
    if (!(0 < c.data.truncate_low && c.data.truncate_low <= c.data.truncate_high && c.data.truncate_high <= 1)) {
        fail("truncation fractions must satisfy 0 < low <= high <= 1");
    }
    if (c.data.synth.units < 3) fail("synth.units must be at least 3");
    if (c.data.synth.min_length > c.data.synth.max_length) fail("synth.min_length exceeds synth.max_length");
    if (c.data.synth.channels == 0) fail("synth.channels must be positive");
    if (c.model.hidden == 0 || c.model.gat_heads == 0 || c.model.mhsa_heads == 0 || c.model.time_embed == 0 ||
        c.model.dynamics_width == 0 || c.model.gcrn_refine_steps == 0) {
        fail("model sizes must be positive");
    }
    if (c.model.hidden % c.model.mhsa_heads != 0) fail("model.hidden must be divisible by model.mhsa_heads");
    if (c.model.tau_kernel % 2 == 0 || c.model.tau_dilated_kernel % 2 == 0) fail("TAU kernel sizes must be odd");
    if (c.model.sac.a_max <= 0 || c.model.sac.batch_size == 0 || c.model.sac.capacity < c.model.sac.batch_size) {
        fail("sac.a_max must be positive and sac.capacity at least sac.batch_size");
    }
    if (c.train.epochs == 0 || c.train.batch_size == 0 || c.train.accumulate == 0 || c.train.lr_step == 0) {
        fail("train.epochs, batch_size, accumulate and lr_step must be positive");
    }
    if (c.train.lr <= 0 || c.train.lr_decay <= 0) fail("train.lr and train.lr_decay must be positive");
    if (c.train.mixup_alpha <= 0) fail("train.mixup_alpha must be positive");
    if (c.train.w_pde < 0) fail("train.w_pde must be nonnegative");
    if (c.train.q.bins < 2 || !(c.train.q.state_low > 0 && c.train.q.state_low < c.train.q.state_high)) {
        fail("q.bins must be at least 2 and 0 < q.state_low < q.state_high");
    }
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::string& origin) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig c;
    auto table = make_table(c);
    for (const auto& [section, keys] : tree) {
        if (keys.empty() && !keys.data().empty()) throw ConfigError(origin + ": key '" + section + "' outside a section");
        auto st = table.find(section);
        if (st == table.end()) throw ConfigError(origin + ": unknown section [" + section + "]");
        for (const auto& [key, value] : keys) {
            auto f = st->second.find(key);
            if (f == st->second.end()) throw ConfigError(origin + ": unknown key '" + key + "' in [" + section + "]");
            try {
                f->second.set(value.data());
            } catch (const std::exception& e) {
                throw ConfigError(origin + ": bad value '" + value.data() + "' for " + section + "." + key + " (" +
                                  e.what() + ")");
            }
        }
    }
    validate(c, origin);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_run_config(in, path.string());
}

void write_run_config(std::ostream& out, const RunConfig& config) {
    RunConfig copy = config;
    const auto table = make_table(copy);
    bool first = true;
    for (const char* section : {"data", "synth", "model", "sac", "train", "q"}) {
        out << (first ? "" : "\n") << '[' << section << "]\n";
        first = false;
        for (const auto& [key, field] : table.at(section)) out << key << " = " << field.get() << '\n';
    }
}

void apply_ablations(RunConfig& config, const std::string& list) {
    for (const auto& item : split_list(list)) {
        if (item == "rl") config.model.use_rl = false;
        else if (item == "mixup") config.train.use_mixup = false;
        else if (item == "tau") config.model.use_tau = false;
        else throw ConfigError("unknown ablation '" + item + "' (expected rl, mixup or tau)");
    }
}

}  // namespace rgpd
