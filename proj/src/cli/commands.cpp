#include "rgpd/cli/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "rgpd/cli/config.hpp"
#include "rgpd/gradcheck/suite.hpp"
#include "rgpd/train/checkpoint.hpp"

namespace rgpd {

namespace fs = std::filesystem;

namespace {

class UserError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UserError("cannot write " + path.string());
    body(out);
    out.flush();
    if (!out) throw UserError("failed while writing " + path.string());
}

void make_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw UserError("cannot create output directory " + dir.string());
}

void print_metrics(std::ostream& out, const Metrics& m, std::size_t units) {
    out.precision(6);
    out << "test units: " << units << '\n' << "MAE:   " << m.mae << '\n' << "RMSE:  " << m.rmse << '\n'
        << "Score: " << m.score << '\n';
    if (m.mape) out << "MAPE:  " << *m.mape << '\n';
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b))); }

bool same_metrics(const Metrics& a, const Metrics& b) {
    if (a.mape.has_value() != b.mape.has_value()) return false;
    return close(a.mae, b.mae) && close(a.rmse, b.rmse) && close(a.score, b.score) && (!a.mape || close(*a.mape, *b.mape));
}

PreparedData load_data(const DataConfig& config) {
    std::ostringstream warnings;
    auto split = load_units(config, &warnings);
    if (!warnings.str().empty()) std::cerr << warnings.str();
    return prepare_data(split, config);
}

struct TrainArgs {
    fs::path config, out;
    std::optional<std::uint64_t> seed;
    std::string ablate;
};

int cmd_train(const TrainArgs& a) {
    auto rc = load_run_config(a.config);
    if (a.seed) rc.train.seed = *a.seed;
    apply_ablations(rc, a.ablate);
    make_output_dir(a.out);
    OutputLock lock(a.out);

    write_file(a.out / "config.ini", [&](std::ostream& o) { write_run_config(o, rc); });
    const auto data = load_data(rc.data);
    std::cout << "data: " << data.train.size() << " train windows, " << data.valid.size() << " valid windows, "
              << data.test.size() << " test units, " << data.channels.size() << " channels\n";

    const auto result = train(rc.model, rc.train, data, [&](const EpochSummary& s, const ModelState&) {
        std::cout << "epoch " << s.epoch << '/' << rc.train.epochs << "  loss " << s.loss << "  valid_rmse "
                  << s.valid_rmse << "  weights " << s.weights.w1 << ',' << s.weights.w2 << ',' << s.weights.w3
                  << ',' << s.weights.w4 << std::endl;
    });

    write_file(a.out / "physics.csv", [&](std::ostream& o) { write_physics_csv(o, result.history); });
    write_file(a.out / "weights.csv", [&](std::ostream& o) { write_weight_history(o, result.report.weights); });
    write_file(a.out / "actions.csv", [&](std::ostream& o) { write_action_trace(o, result.report.actions); });
    const bool have_model = !result.report.predictions.empty();
    if (have_model) {
        write_file(a.out / "predictions.csv", [&](std::ostream& o) { write_predictions_csv(o, result.report); });
        write_file(a.out / "metrics.json", [&](std::ostream& o) { write_metrics_json(o, result.report); });
        save_checkpoint(a.out / "checkpoint.json",
                        {result.model, result.bank, DataSignature::of(data),
                         RecordedMetrics{result.report.convention, result.report.predictions.size(), result.report.metrics}});
    }
    if (result.diverged) {
        std::cerr << "error: " << result.message << "; partial artifacts kept in " << a.out.string() << '\n';
        return kExitNumerical;
    }
    std::cout << "best epoch " << result.best_epoch << '\n';
    print_metrics(std::cout, result.report.metrics, result.report.predictions.size());
    std::cout << "artifacts written to " << a.out.string() << '\n';
    return kExitOk;
}

struct EvalArgs {
    fs::path config, checkpoint, out;
};

int cmd_eval(EvalArgs a) {
    if (!fs::exists(a.checkpoint)) throw UserError("checkpoint not found: " + a.checkpoint.string());
    const auto dir = a.checkpoint.parent_path().empty() ? fs::path(".") : a.checkpoint.parent_path();
    if (a.config.empty()) a.config = dir / "config.ini";
    if (a.out.empty()) a.out = dir / "eval";
    const auto rc = load_run_config(a.config);
    const auto ckpt = load_checkpoint(a.checkpoint);
    const auto data = load_data(rc.data);
    const auto diff = ckpt.data.mismatch(DataSignature::of(data));
    if (!diff.empty()) throw UserError("checkpoint was trained on different data: " + diff);

    make_output_dir(a.out);
    OutputLock lock(a.out);
    const auto report = evaluate(ckpt.model, data, rc.train.score);
    write_file(a.out / "predictions.csv", [&](std::ostream& o) { write_predictions_csv(o, report); });
    write_file(a.out / "metrics.json", [&](std::ostream& o) { write_metrics_json(o, report); });
    print_metrics(std::cout, report.metrics, report.predictions.size());
    if (ckpt.metrics) {
        if (ckpt.metrics->convention != report.convention) {
            std::cout << "recorded metrics use the " << to_string(ckpt.metrics->convention)
                      << " score convention; not compared\n";
        } else if (ckpt.metrics->units == report.predictions.size() && same_metrics(ckpt.metrics->metrics, report.metrics)) {
            std::cout << "metrics match the values recorded at training time\n";
        } else {
            std::cout << "warning: metrics differ from the values recorded at training time\n";
        }
    }
    std::cout << "report written to " << a.out.string() << '\n';
    return kExitOk;
}

int cmd_gradcheck(const GradSuiteOptions& o) {
    const auto results = run_grad_suite(o);
    print_grad_table(std::cout, results, o.threshold);
    std::vector<std::string> failed;
    for (const auto& r : results)
        if (!r.passed) failed.push_back(r.name);
    if (failed.empty()) return kExitOk;
    std::cerr << "gradient check failed for:";
    for (const auto& n : failed) std::cerr << ' ' << n;
    std::cerr << '\n';
    return kExitNumerical;
}

struct SynthArgs {
    fs::path config, out;
    std::optional<std::uint64_t> seed;
};

std::vector<UnitTrajectory> renumbered(std::vector<UnitTrajectory> units) {
    std::sort(units.begin(), units.end(), [](const auto& x, const auto& y) { return x.unit < y.unit; });
    for (std::size_t i = 0; i < units.size(); ++i) units[i].unit = static_cast<int>(i + 1);
    return units;
}

int cmd_synth(const SynthArgs& a) {
    RunConfig rc;
    if (!a.config.empty()) rc = load_run_config(a.config);
    if (a.seed) rc.data.synth.seed = *a.seed;
    if (rc.data.synth.target != TargetKind::rul) throw UserError("the CMAPSS text format carries no SOH labels; set synth.target = rul");
    rc.data.source = DataSource::synthetic;
    rc.data.cmapss_dir.clear();
    auto split = load_units(rc.data);
    auto train_units = split.train;
    train_units.insert(train_units.end(), split.valid.begin(), split.valid.end());
    train_units = renumbered(std::move(train_units));
    const auto test_units = renumbered(std::move(split.test));

    make_output_dir(a.out);
    OutputLock lock(a.out);
    const auto& subset = rc.data.subset;
    write_file(a.out / ("train_" + subset + ".txt"), [&](std::ostream& o) { write_cmapss(o, train_units); });
    write_file(a.out / ("test_" + subset + ".txt"), [&](std::ostream& o) { write_cmapss(o, test_units); });
    write_file(a.out / ("RUL_" + subset + ".txt"), [&](std::ostream& o) {
        o.precision(17);
        for (const auto& u : test_units) o << u.end_rul << '\n';
    });
    std::cout << "wrote " << train_units.size() << " training and " << test_units.size() << " test units ("
              << subset << ") to " << a.out.string() << '\n';
    return kExitOk;
}

}  // namespace

OutputLock::OutputLock(const fs::path& dir) : path_(dir / kFileName) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw UserError("output directory " + dir.string() + " is in use by another run (remove " + path_.string() +
                        " if it is stale)");
    }
    const auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

OutputLock::~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Physics-guided RUL prediction with graph networks and RL-tuned loss weights"};
    app.require_subcommand(1);

    TrainArgs ta;
    std::uint64_t train_seed = 0;
    auto* tr = app.add_subcommand("train", "train a model and write checkpoint, metrics and histories");
    tr->add_option("--config", ta.config, "INI config file")->required()->check(CLI::ExistingFile);
    tr->add_option("--out", ta.out, "output directory")->required();
    auto* tr_seed = tr->add_option("--seed", train_seed, "training seed (overrides train.seed)");
    tr->add_option("--ablate", ta.ablate, "comma list of components to switch off: rl, mixup, tau");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test units");
    ev->add_option("--checkpoint", ea.checkpoint, "checkpoint.json written by train")->required();
    ev->add_option("--config", ea.config, "INI config (default: config.ini next to the checkpoint)");
    ev->add_option("--out", ea.out, "report directory (default: eval/ next to the checkpoint)");

    GradSuiteOptions go;
    std::string inject;
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every op and layer");
    gc->add_option("--seed", go.seed, "first seed");
    gc->add_option("--seeds", go.seeds, "number of seeds per probe")->check(CLI::PositiveNumber);
    gc->add_option("--threshold", go.threshold, "max relative error");
    auto* gc_inject = gc->add_option("--inject-bug", inject, "probe whose analytic gradient is deliberately broken");

    SynthArgs sa;
    std::uint64_t synth_seed = 0;
    auto* sy = app.add_subcommand("synth", "write a synthetic dataset in the CMAPSS text format");
    sy->add_option("--config", sa.config, "INI config; [synth] and [data] subset/split keys are used")
        ->check(CLI::ExistingFile);
    sy->add_option("--out", sa.out, "output directory")->required();
    auto* sy_seed = sy->add_option("--seed", synth_seed, "generator seed (overrides synth.seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUserError;
    }

    try {
        if (tr->parsed()) {
            if (*tr_seed) ta.seed = train_seed;
            return cmd_train(ta);
        }
        if (ev->parsed()) return cmd_eval(ea);
        if (gc->parsed()) {
            if (*gc_inject) go.inject_bug = inject;
            return cmd_gradcheck(go);
        }
        if (*sy_seed) sa.seed = synth_seed;
        return cmd_synth(sa);
    } catch (const NumericalError& e) {
        std::cerr << "error: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUserError;
    }
}

}  // namespace rgpd
