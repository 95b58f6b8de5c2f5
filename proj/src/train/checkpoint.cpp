#include "rgpd/train/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rgpd {

namespace fs = std::filesystem;
using nlohmann::json;

DataSignature DataSignature::of(const PreparedData& d) {
    return {d.channels, d.normalizer.mean(), d.normalizer.stddev(), d.t_max, d.label_scale, d.target, d.window_sizes};
}

std::string DataSignature::mismatch(const DataSignature& o) const {
    if (channels != o.channels) return "input channels differ";
    if (window_sizes != o.window_sizes) return "window sizes differ";
    if (target != o.target) return "target kind differs";
    if (t_max != o.t_max) return "time normalization differs";
    if (label_scale != o.label_scale) return "label scale differs";
    if (mean != o.mean || stddev != o.stddev) return "normalizer statistics differ";
    return {};
}

namespace {

const char* kFormat = "rgpd-checkpoint";

json config_json(const ModelConfig& c) {
    const auto& s = c.sac;
    return {{"input_dim", c.input_dim},
            {"hidden", c.hidden},
            {"gat_heads", c.gat_heads},
            {"gat_slope", c.gat_slope},
            {"graph_mode", c.graph_mode == GraphMode::temporal ? "temporal" : "channel"},
            {"gcrn_refine_steps", c.gcrn_refine_steps},
            {"correlation_threshold", c.correlation_threshold},
            {"tau_kernel", c.tau_kernel},
            {"tau_dilated_kernel", c.tau_dilated_kernel},
            {"tau_dilation", c.tau_dilation},
            {"mhsa_heads", c.mhsa_heads},
            {"time_embed", c.time_embed},
            {"dynamics_width", c.dynamics_width},
            {"dynamics_depth", c.dynamics_depth},
            {"use_tau", c.use_tau},
            {"use_rl", c.use_rl},
            {"per_channel_action", c.per_channel_action},
            {"sac",
             {{"state_dim", s.state_dim},
              {"action_dim", s.action_dim},
              {"hidden", s.hidden},
              {"a_max", s.a_max},
              {"alpha_ent", s.alpha_ent},
              {"gamma", s.gamma},
              {"soft_update", s.soft_update},
              {"actor_lr", s.actor_lr},
              {"critic_lr", s.critic_lr},
              {"batch_size", s.batch_size},
              {"capacity", s.capacity}}}};
}

ModelConfig config_from(const json& j) {
    ModelConfig c;
    j.at("input_dim").get_to(c.input_dim);
    j.at("hidden").get_to(c.hidden);
    j.at("gat_heads").get_to(c.gat_heads);
    j.at("gat_slope").get_to(c.gat_slope);
    const auto mode = j.at("graph_mode").get<std::string>();
    if (mode != "temporal" && mode != "channel") throw CheckpointError("unknown graph mode '" + mode + "'");
    c.graph_mode = mode == "temporal" ? GraphMode::temporal : GraphMode::channel;
    j.at("gcrn_refine_steps").get_to(c.gcrn_refine_steps);
    j.at("correlation_threshold").get_to(c.correlation_threshold);
    j.at("tau_kernel").get_to(c.tau_kernel);
    j.at("tau_dilated_kernel").get_to(c.tau_dilated_kernel);
    j.at("tau_dilation").get_to(c.tau_dilation);
    j.at("mhsa_heads").get_to(c.mhsa_heads);
    j.at("time_embed").get_to(c.time_embed);
    j.at("dynamics_width").get_to(c.dynamics_width);
    j.at("dynamics_depth").get_to(c.dynamics_depth);
    j.at("use_tau").get_to(c.use_tau);
    j.at("use_rl").get_to(c.use_rl);
    j.at("per_channel_action").get_to(c.per_channel_action);
    const auto& s = j.at("sac");
    s.at("state_dim").get_to(c.sac.state_dim);
    s.at("action_dim").get_to(c.sac.action_dim);
    s.at("hidden").get_to(c.sac.hidden);
    s.at("a_max").get_to(c.sac.a_max);
    s.at("alpha_ent").get_to(c.sac.alpha_ent);
    s.at("gamma").get_to(c.sac.gamma);
    s.at("soft_update").get_to(c.sac.soft_update);
    s.at("actor_lr").get_to(c.sac.actor_lr);
    s.at("critic_lr").get_to(c.sac.critic_lr);
    s.at("batch_size").get_to(c.sac.batch_size);
    s.at("capacity").get_to(c.sac.capacity);
    return c;
}

json params_json(const ParamList& params) {
    json out = json::object();
    for (const auto& p : params) {
        auto v = p.tensor.values();
        out[p.name] = {{"shape", p.tensor.shape()}, {"values", std::vector<double>(v.begin(), v.end())}};
    }
    return out;
}

void load_params(const json& j, ParamList& params) {
    if (j.size() != params.size()) {
        throw CheckpointError("checkpoint holds " + std::to_string(j.size()) + " parameter tensors, model expects " +
                              std::to_string(params.size()));
    }
    for (auto& p : params) {
        if (!j.contains(p.name)) throw CheckpointError("checkpoint is missing parameter " + p.name);
        const auto& e = j.at(p.name);
        if (e.at("shape").get<Shape>() != p.tensor.shape()) throw CheckpointError("shape mismatch for " + p.name);
        const auto values = e.at("values").get<std::vector<double>>();
        auto dst = p.tensor.mutable_values();
        if (values.size() != dst.size()) throw CheckpointError("value count mismatch for " + p.name);
        std::copy(values.begin(), values.end(), dst.begin());
    }
}

json agent_json(const QAgent& a) {
    return {{"actions", a.actions},   {"edges", a.edges},
            {"q", a.q},               {"alpha", a.alpha},
            {"gamma", a.gamma},       {"epsilon", a.epsilon},
            {"epsilon_decay", a.epsilon_decay}, {"epsilon_floor", a.epsilon_floor}};
}

QAgent agent_from(const json& j) {
    QAgent a;
    j.at("actions").get_to(a.actions);
    j.at("edges").get_to(a.edges);
    j.at("q").get_to(a.q);
    j.at("alpha").get_to(a.alpha);
    j.at("gamma").get_to(a.gamma);
    j.at("epsilon").get_to(a.epsilon);
    j.at("epsilon_decay").get_to(a.epsilon_decay);
    j.at("epsilon_floor").get_to(a.epsilon_floor);
    if (a.actions.empty() || a.q.size() != a.bins() * a.num_actions()) throw CheckpointError("Q-table has the wrong size");
    return a;
}

json bank_json(const AgentBank& b) {
    json agents = json::array();
    for (const auto& a : b.agents) agents.push_back(agent_json(a));
    json history = json::array();
    for (const auto& r : b.history) {
        history.push_back({r.round, r.weights.w1, r.weights.w2, r.weights.w3, r.weights.w4, r.reward, r.rmse});
    }
    json j = {{"agents", agents}, {"last_states", b.last_states}, {"last_actions", b.last_actions}, {"history", history}};
    j["prev_rmse"] = b.prev_rmse ? json(*b.prev_rmse) : json(nullptr);
    return j;
}

AgentBank bank_from(const json& j) {
    AgentBank b;
    const auto& agents = j.at("agents");
    if (agents.size() != b.agents.size()) throw CheckpointError("expected four Q-agents");
    for (std::size_t i = 0; i < b.agents.size(); ++i) b.agents[i] = agent_from(agents[i]);
    j.at("last_states").get_to(b.last_states);
    j.at("last_actions").get_to(b.last_actions);
    if (!j.at("prev_rmse").is_null()) b.prev_rmse = j.at("prev_rmse").get<double>();
    for (const auto& r : j.at("history")) {
        b.history.push_back({r.at(0).get<std::size_t>(),
                             {r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>(), r.at(4).get<double>()},
                             r.at(5).get<double>(),
                             r.at(6).get<double>()});
    }
    return b;
}

json data_json(const DataSignature& d) {
    return {{"channels", d.channels},       {"mean", d.mean},
            {"stddev", d.stddev},           {"t_max", d.t_max},
            {"label_scale", d.label_scale}, {"target", d.target == TargetKind::rul ? "rul" : "soh"},
            {"window_sizes", d.window_sizes}};
}

DataSignature data_from(const json& j) {
    DataSignature d;
    j.at("channels").get_to(d.channels);
    j.at("mean").get_to(d.mean);
    j.at("stddev").get_to(d.stddev);
    j.at("t_max").get_to(d.t_max);
    j.at("label_scale").get_to(d.label_scale);
    const auto target = j.at("target").get<std::string>();
    if (target != "rul" && target != "soh") throw CheckpointError("unknown target '" + target + "'");
    d.target = target == "rul" ? TargetKind::rul : TargetKind::soh;
    j.at("window_sizes").get_to(d.window_sizes);
    if (d.mean.size() != d.channels.size() || d.stddev.size() != d.channels.size()) {
        throw CheckpointError("normalizer size does not match the channel list");
    }
    return d;
}

json metrics_json(const RecordedMetrics& m) {
    json j = {{"score_convention", to_string(m.convention)},
              {"units", m.units},
              {"mae", m.metrics.mae},
              {"rmse", m.metrics.rmse},
              {"score", m.metrics.score}};
    if (m.metrics.mape) j["mape"] = *m.metrics.mape;
    return j;
}

RecordedMetrics metrics_from(const json& j) {
    RecordedMetrics m;
    m.convention = parse_score_convention(j.at("score_convention").get<std::string>());
    j.at("units").get_to(m.units);
    j.at("mae").get_to(m.metrics.mae);
    j.at("rmse").get_to(m.metrics.rmse);
    j.at("score").get_to(m.metrics.score);
    if (j.contains("mape")) m.metrics.mape = j.at("mape").get<double>();
    return m;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& c) {
    ParamList model_params, sac_params;
    c.model.collect(model_params);
    c.model.collect_sac(sac_params);
    json j = {{"format", kFormat},
              {"version", kCheckpointVersion},
              {"config", config_json(c.model.config)},
              {"params", params_json(model_params)},
              {"sac_params", params_json(sac_params)},
              {"q_agents", bank_json(c.bank)},
              {"data", data_json(c.data)}};
    j["channel_graph"] = c.model.channel_graph ? json(c.model.channel_graph->to_edge_list()) : json(nullptr);
    j["metrics"] = c.metrics ? metrics_json(*c.metrics) : json(nullptr);

    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
        out << j.dump() << '\n';
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    try {
        if (!j.is_object() || j.value("format", "") != kFormat) {
            throw CheckpointError(path.string() + " is not a checkpoint file");
        }
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
        }
        Rng rng(0);
        Checkpoint c{ModelState::make(config_from(j.at("config")), rng), bank_from(j.at("q_agents")),
                     data_from(j.at("data")), std::nullopt};
        ParamList model_params, sac_params;
        c.model.collect(model_params);
        c.model.collect_sac(sac_params);
        load_params(j.at("params"), model_params);
        load_params(j.at("sac_params"), sac_params);
        if (!j.at("channel_graph").is_null()) {
            c.model.channel_graph = Graph::from_edge_list(j.at("channel_graph").get<std::string>());
        }
        if (!j.at("metrics").is_null()) c.metrics = metrics_from(j.at("metrics"));
        if (c.model.config.input_dim != c.data.channels.size()) {
            throw CheckpointError("model input size does not match the channel list");
        }
        return c;
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace rgpd
