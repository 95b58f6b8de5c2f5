#include "rgpd/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "rgpd/autodiff/ops.hpp"

namespace rgpd {

namespace fs = std::filesystem;

UnitSplit load_units(const DataConfig& c, std::ostream* warnings) {
    if (c.source == DataSource::synthetic) {
        auto split = split_units(synth_degradation(c.synth), c.train_fraction, c.valid_fraction, c.split_seed);
        Rng rng(c.split_seed + 1);
        truncate_units(split.test, c.truncate_low, c.truncate_high, rng);
        return split;
    }
    const auto train_path = c.cmapss_dir / ("train_" + c.subset + ".txt");
    const auto test_path = c.cmapss_dir / ("test_" + c.subset + ".txt");
    const auto rul_path = c.cmapss_dir / ("RUL_" + c.subset + ".txt");
    for (const auto& p : {train_path, test_path, rul_path})
        if (!fs::exists(p)) throw std::runtime_error("missing data file " + p.string());
    auto split = split_units(load_cmapss(train_path, warnings), 1.0 - c.valid_fraction, c.valid_fraction, c.split_seed);
    split.test = load_cmapss(test_path, warnings);
    attach_rul_file(split.test, rul_path);
    return split;
}

PreparedData prepare_data(const UnitSplit& split, const DataConfig& c) {
    if (split.train.empty() || split.valid.empty() || split.test.empty()) {
        throw std::invalid_argument("train, valid and test splits must all hold units");
    }
    PreparedData d;
    d.target = split.train.front().soh.empty() ? TargetKind::rul : TargetKind::soh;
    d.label_scale = d.target == TargetKind::rul ? c.rul_cap : 1.0;
    d.window_sizes = c.window_sizes;

    std::vector<std::string> channels = c.channels;
    if (channels.empty()) {
        channels = c.source == DataSource::cmapss ? cmapss_sensor_names() : split.train.front().channels;
    }
    std::erase_if(channels, [&](const std::string& n) { return std::find(c.drop.begin(), c.drop.end(), n) != c.drop.end(); });
    if (c.drop_constant) {
        const auto constant = constant_channels(select_channels(split.train, channels));
        std::erase_if(channels, [&](const std::string& n) {
            return std::find(constant.begin(), constant.end(), n) != constant.end();
        });
    }
    if (channels.empty()) throw std::invalid_argument("no input channels left after dropping");
    d.channels = channels;
    const auto train = select_channels(split.train, channels);
    const auto valid = select_channels(split.valid, channels);
    const auto test = select_channels(split.test, channels);

    for (const auto& u : train) d.t_max = std::max(d.t_max, static_cast<double>(u.cycles.back()));
    auto labels_of = [&](const std::vector<UnitTrajectory>& units) {
        std::vector<std::vector<double>> out;
        for (const auto& u : units) out.push_back(d.target == TargetKind::rul ? label_rul(u, c.rul_cap) : u.soh);
        return out;
    };
    WindowOptions o{c.window_sizes, c.stride, d.t_max, d.target};
    d.train = make_windows_all(train, labels_of(train), o);
    o.stride = c.valid_stride;
    d.valid = make_windows_all(valid, labels_of(valid), o);

    d.normalizer.fit(d.train);
    d.normalizer.apply(d.train);
    d.normalizer.apply(d.valid);
    for (auto* ws : {&d.train, &d.valid})
        for (auto& w : *ws) w.y /= d.label_scale;

    const auto test_labels = labels_of(test);
    for (std::size_t i = 0; i < test.size(); ++i) {
        UnitWindows uw{test[i].unit, test_labels[i].back(), {}};
        for (std::size_t size : c.window_sizes) {
            auto w = final_window(test[i], test_labels[i], size, o);
            d.normalizer.apply(w);
            w.y /= d.label_scale;
            uw.windows.push_back(std::move(w));
        }
        d.test.push_back(std::move(uw));
    }
    return d;
}

Tensor mixup_criterion(const Tensor& pred, std::span<const double> y_a, std::span<const double> y_b, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("mixup lambda outside [0,1]");
    if (y_a.size() != pred.numel() || y_b.size() != pred.numel()) throw DimensionError("mixup_criterion: size mismatch");
    auto mse = [&](std::span<const double> y) {
        return mean(square(sub(pred, Tensor(pred.shape(), std::vector<double>(y.begin(), y.end())))));
    };
    if (lambda == 1.0) return mse(y_a);
    return add(scale(mse(y_a), lambda), scale(mse(y_b), 1.0 - lambda));
}

ModelState init_model(const ModelConfig& config, const PreparedData& data, std::uint64_t seed) {
    ModelConfig mc = config;
    mc.input_dim = data.channels.size();
    Rng rng(seed);
    auto model = ModelState::make(mc, rng);
    if (mc.graph_mode == GraphMode::channel) {
        std::vector<double> samples;
        for (const auto& w : data.train) samples.insert(samples.end(), w.x.begin(), w.x.end());
        model.channel_graph = build_channel_correlation_graph(samples, mc.input_dim, mc.correlation_threshold);
    }
    return model;
}

namespace {

double predict_window(const ModelState& model, const SensorWindow& w, GraphCache& graphs) {
    NoGradGuard guard;
    Rng unused(0);
    ForwardOptions o;
    o.mode = Mode::eval;
    return forward_pass(model, batch_from_windows({&w}), graphs, o, unused).y_last.item();
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<SensorWindow>& windows, std::size_t batch_size,
                                                   Rng& rng) {
    std::map<std::size_t, std::vector<std::size_t>> by_length;
    for (std::size_t i = 0; i < windows.size(); ++i) by_length[windows[i].length].push_back(i);
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [len, idx] : by_length) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t s = 0; s < idx.size(); s += batch_size)
            batches.emplace_back(idx.begin() + s, idx.begin() + std::min(idx.size(), s + batch_size));
    }
    std::shuffle(batches.begin(), batches.end(), rng);
    return batches;
}

struct MixedBatch {
    BatchInput input;
    std::vector<double> y_a, y_b;
    double lambda = 1.0;
};

MixedBatch mix_batch(const std::vector<SensorWindow>& windows, const std::vector<std::size_t>& idx,
                     const TrainConfig& c, const PreparedData& data, Rng& rng) {
    MixedBatch m;
    const std::size_t b = idx.size();
    std::vector<std::size_t> perm(b);
    std::iota(perm.begin(), perm.end(), 0);
    if (c.use_mixup && b > 1) {
        m.lambda = sample_beta(c.mixup_alpha, rng);
        std::shuffle(perm.begin(), perm.end(), rng);
    }
    const double l = m.lambda;
    for (std::size_t k = 0; k < b; ++k) {
        const auto& wi = windows[idx[k]];
        const auto& wj = windows[idx[perm[k]]];
        m.y_a.push_back(wi.y);
        m.y_b.push_back(wj.y);
        if (l == 1.0) {
            m.input.x.emplace_back(Shape{wi.length, wi.channels}, wi.x);
            m.input.t.emplace_back(Shape{wi.length, 1}, wi.t);
            m.input.broken.push_back(wi.broken ? 1.0 : 0.0);
            continue;
        }
        auto x = mixup(wi.x, wi.y, wj.x, wj.y, l);
        std::vector<double> t(wi.t.size());
        for (std::size_t s = 0; s < t.size(); ++s) t[s] = l * wi.t[s] + (1.0 - l) * wj.t[s];
        m.input.x.emplace_back(Shape{wi.length, wi.channels}, std::move(x.x));
        m.input.t.emplace_back(Shape{wi.length, 1}, std::move(t));
        m.input.broken.push_back(is_broken(x.y * data.label_scale, data.target) ? 1.0 : 0.0);
    }
    return m;
}

}  // namespace

double window_rmse(const ModelState& model, const std::vector<SensorWindow>& windows, const PreparedData& data) {
    GraphCache graphs;
    std::vector<double> pred, truth;
    for (const auto& w : windows) {
        pred.push_back(predict_window(model, w, graphs) * data.label_scale);
        truth.push_back(w.y * data.label_scale);
    }
    return metric_rmse(pred, truth);
}

double test_monotonicity(const ModelState& model, const PreparedData& data) {
    NoGradGuard guard;
    GraphCache graphs;
    Rng unused(0);
    ForwardOptions o;
    o.mode = Mode::eval;
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& u : data.test) {
        for (const auto& w : u.windows) {
            auto out = forward_pass(model, batch_from_windows({&w}), graphs, o, unused);
            total += monotonicity_loss(out.y_seq).loss.item();
            ++n;
        }
    }
    return total / static_cast<double>(n);
}

Metrics compute_metrics(const std::vector<UnitPrediction>& predictions, TargetKind target, ScoreConvention convention) {
    std::vector<double> pred, truth;
    for (const auto& p : predictions) {
        pred.push_back(p.prediction);
        truth.push_back(p.truth);
    }
    Metrics m;
    m.mae = metric_mae(pred, truth);
    m.rmse = metric_rmse(pred, truth);
    m.score = metric_phm_score(pred, truth, convention);
    if (target == TargetKind::soh) m.mape = metric_mape(pred, truth);
    return m;
}

EvalReport evaluate(const ModelState& model, const PreparedData& data, ScoreConvention convention) {
    EvalReport r;
    r.target = data.target;
    r.convention = convention;
    GraphCache graphs;
    for (const auto& u : data.test) {
        double s = 0.0;
        for (const auto& w : u.windows) s += predict_window(model, w, graphs);
        r.predictions.push_back({u.unit, u.truth, s / static_cast<double>(u.windows.size()) * data.label_scale});
    }
    r.metrics = compute_metrics(r.predictions, r.target, convention);
    return r;
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& c, const PreparedData& data,
                  const EpochCallback& on_epoch) {
    if (c.epochs == 0 || c.batch_size == 0 || c.accumulate == 0 || c.lr_step == 0) {
        throw std::invalid_argument("epochs, batch size, accumulation and lr step must be positive");
    }
    if (c.w_pde < 0) throw std::invalid_argument("w_pde must be nonnegative");
    if (data.train.empty() || data.valid.empty()) throw std::invalid_argument("no training or validation windows");

    Rng rng(c.seed);
    Rng policy_rng(c.seed + 0x9e3779b97f4a7c15ULL);
    TrainResult result{init_model(model_config, data, c.seed), AgentBank::make(c.q), {}, {}, 0, false, {}};
    ModelState& model = result.model;
    const bool use_rl = model.config.use_rl;

    ParamList params;
    model.collect(params);
    AdamConfig ac;
    ac.lr = c.lr;
    ac.clip_norm = c.clip_norm;
    Adam opt(tensors_of(params), ac);
    ReplayBuffer buffer(model.config.sac.capacity);
    PhysicsWeights weights;
    GraphCache graphs;
    std::vector<ActionRecord> actions;
    std::optional<ModelState> best;
    double best_rmse = std::numeric_limits<double>::infinity();
    std::size_t sac_step = 0;

    for (std::size_t epoch = 1; epoch <= c.epochs && !result.diverged; ++epoch) {
        EpochSummary summary;
        summary.epoch = epoch;
        summary.weights = weights;
        const auto batches = make_batches(data.train, c.batch_size, rng);
        opt.zero_grad();
        std::size_t pending = 0;
        double n_windows = 0.0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            auto mb = mix_batch(data.train, batches[bi], c, data, rng);
            ForwardOptions fo;
            fo.weights = weights;
            ForwardOutput out;
            Tensor sup, loss;
            try {
                out = forward_pass(model, mb.input, graphs, fo, policy_rng);
                sup = mixup_criterion(out.y_last, mb.y_a, mb.y_b, mb.lambda);
                loss = add(sup, scale(out.physics->total, c.w_pde));
            } catch (const NumericalError& e) {
                result.diverged = true;
                result.message = std::string("numerical failure in epoch ") + std::to_string(epoch) + ": " + e.what();
                break;
            }
            if (!std::isfinite(loss.item())) {
                result.diverged = true;
                result.message = "loss became non-finite in epoch " + std::to_string(epoch);
                break;
            }
            loss.backward();
            ++pending;
            if (pending == c.accumulate || bi + 1 == batches.size()) {
                opt.step(1.0 / static_cast<double>(pending));
                opt.zero_grad();
                pending = 0;
            }

            const double bw = static_cast<double>(batches[bi].size());
            n_windows += bw;
            summary.loss += loss.item() * bw;
            summary.sup_loss += sup.item() * bw;
            summary.pde_loss += out.physics->total.item() * bw;
            summary.physics[0] += out.physics->terms.monotonicity.item() * bw;
            summary.physics[1] += out.physics->terms.smoothness.item() * bw;
            summary.physics[2] += out.physics->terms.consistency.item() * bw;
            summary.physics[3] += out.physics->terms.broken.item() * bw;

            if (use_rl) {
                auto s = out.state.values();
                std::vector<double> sv(s.begin(), s.end());
                buffer.push({sv, out.action, -sup.item(), sv, 1.0});
                actions.push_back({sac_step++, out.action, -sup.item()});
                if (buffer.size() >= model.config.sac.batch_size) {
                    critic_update(model.sac, buffer, policy_rng);
                    actor_update(model.sac, buffer, policy_rng);
                }
            }
        }
        if (result.diverged) break;
        summary.loss /= n_windows;
        summary.sup_loss /= n_windows;
        summary.pde_loss /= n_windows;
        for (auto& v : summary.physics) v /= n_windows;
        summary.valid_rmse = window_rmse(model, data.valid, data);
        if (!std::isfinite(summary.valid_rmse)) {
            result.diverged = true;
            result.message = "validation RMSE became non-finite in epoch " + std::to_string(epoch);
            break;
        }
        if (use_rl) weights = step_bank(result.bank, summary.physics, summary.valid_rmse, rng);
        if (summary.valid_rmse < best_rmse) {
            best_rmse = summary.valid_rmse;
            best = model.clone();
            result.best_epoch = epoch;
        }
        result.history.push_back(summary);
        if (on_epoch) on_epoch(summary, model);
        if (epoch % c.lr_step == 0) opt.set_lr(opt.lr() * c.lr_decay);
    }
    if (best) result.model = std::move(*best);
    if (!result.diverged || best) {
        result.report = evaluate(result.model, data, c.score);
    }
    result.report.weights = result.bank.history;
    result.report.actions = std::move(actions);
    return result;
}

void write_predictions_csv(std::ostream& out, const EvalReport& report) {
    out << "unit,truth,prediction\n";
    out.precision(17);
    for (const auto& p : report.predictions) out << p.unit << ',' << p.truth << ',' << p.prediction << '\n';
}

void write_metrics_json(std::ostream& out, const EvalReport& report) {
    nlohmann::json j;
    j["target"] = report.target == TargetKind::rul ? "rul" : "soh";
    j["score_convention"] = to_string(report.convention);
    j["units"] = report.predictions.size();
    j["mae"] = report.metrics.mae;
    j["rmse"] = report.metrics.rmse;
    j["score"] = report.metrics.score;
    if (report.metrics.mape) j["mape"] = *report.metrics.mape;
    out << j.dump(2) << '\n';
}

void write_physics_csv(std::ostream& out, const std::vector<EpochSummary>& history) {
    out << "epoch,loss,sup_loss,pde_loss,valid_rmse,monotonicity,smoothness,consistency,broken,w1,w2,w3,w4\n";
    out.precision(17);
    for (const auto& s : history) {
        out << s.epoch << ',' << s.loss << ',' << s.sup_loss << ',' << s.pde_loss << ',' << s.valid_rmse;
        for (double v : s.physics) out << ',' << v;
        out << ',' << s.weights.w1 << ',' << s.weights.w2 << ',' << s.weights.w3 << ',' << s.weights.w4 << '\n';
    }
}

}  // namespace rgpd
