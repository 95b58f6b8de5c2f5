#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "rgpd/data/data.hpp"

namespace rgpd {

bool is_broken(double label, TargetKind kind) { return kind == TargetKind::rul ? label == 0.0 : label <= kSohFailure; }

namespace {

SensorWindow window_ending_at(const UnitTrajectory& traj, const std::vector<double>& labels, std::size_t size,
                              std::size_t end, const WindowOptions& o) {
    SensorWindow w;
    w.length = size;
    w.channels = traj.num_channels();
    w.unit = traj.unit;
    w.end_cycle = traj.cycles[end];
    w.y = labels[end];
    w.broken = is_broken(w.y, o.target);
    const long first = static_cast<long>(end) - static_cast<long>(size) + 1;
    w.padded = first < 0;
    for (long r = first; r <= static_cast<long>(end); ++r) {
        const std::size_t row = static_cast<std::size_t>(std::max(r, 0L));
        for (std::size_t k = 0; k < w.channels; ++k) w.x.push_back(traj.at(row, k));
        w.t.push_back(std::clamp(traj.cycles[row] / o.t_max, 0.0, 1.0));
    }
    return w;
}

void check_inputs(const UnitTrajectory& traj, const std::vector<double>& labels, const WindowOptions& o) {
    if (o.sizes.empty()) throw std::invalid_argument("no window sizes given");
    if (o.stride == 0) throw std::invalid_argument("window stride must be positive");
    if (labels.size() != traj.length()) throw DimensionError("one label per cycle required");
    if (traj.length() == 0) throw std::invalid_argument("empty trajectory");
    if (!(o.t_max > 0)) throw std::invalid_argument("T_max must be positive");
    for (auto s : o.sizes)
        if (s == 0) throw std::invalid_argument("window size must be positive");
}

}  // namespace

std::vector<SensorWindow> make_windows(const UnitTrajectory& traj, const std::vector<double>& labels,
                                       const WindowOptions& options) {
    check_inputs(traj, labels, options);
    std::vector<SensorWindow> out;
    for (std::size_t size : options.sizes) {
        if (size > traj.length()) {
            out.push_back(window_ending_at(traj, labels, size, traj.length() - 1, options));
            continue;
        }
        for (std::size_t end = size - 1; end < traj.length(); end += options.stride)
            out.push_back(window_ending_at(traj, labels, size, end, options));
    }
    return out;
}

SensorWindow final_window(const UnitTrajectory& traj, const std::vector<double>& labels, std::size_t size,
                          const WindowOptions& options) {
    check_inputs(traj, labels, options);
    return window_ending_at(traj, labels, size, traj.length() - 1, options);
}

std::size_t worker_threads() {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RGPD_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
    }
    return n;
}

std::vector<SensorWindow> make_windows_all(const std::vector<UnitTrajectory>& units,
                                           const std::vector<std::vector<double>>& labels,
                                           const WindowOptions& options) {
    if (labels.size() != units.size()) throw DimensionError("one label vector per unit required");
    std::vector<std::vector<SensorWindow>> per_unit(units.size());
    const std::size_t n = std::min(worker_threads(), std::max<std::size_t>(units.size(), 1));
    auto work = [&](std::size_t offset) {
        for (std::size_t i = offset; i < units.size(); i += n) per_unit[i] = make_windows(units[i], labels[i], options);
    };
    if (n <= 1) {
        work(0);
    } else {
        std::vector<std::exception_ptr> errors(n);
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n; ++k) {
            pool.emplace_back([&, k] {
                try {
                    work(k);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    std::vector<SensorWindow> out;
    for (auto& v : per_unit) std::move(v.begin(), v.end(), std::back_inserter(out));
    return out;
}

void Normalizer::fit(const std::vector<SensorWindow>& windows) {
    if (windows.empty()) throw std::invalid_argument("cannot fit a normalizer on no windows");
    const std::size_t c = windows.front().channels;
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    double n = 0;
    for (const auto& w : windows) {
        if (w.channels != c) throw DimensionError("windows disagree on channel count");
        for (std::size_t r = 0; r < w.length; ++r)
            for (std::size_t k = 0; k < c; ++k) sum[k] += w.x[r * c + k];
        n += static_cast<double>(w.length);
    }
    for (auto& s : sum) s /= n;
    for (const auto& w : windows)
        for (std::size_t r = 0; r < w.length; ++r)
            for (std::size_t k = 0; k < c; ++k) sq[k] += (w.x[r * c + k] - sum[k]) * (w.x[r * c + k] - sum[k]);
    for (auto& s : sq) s = std::sqrt(s / n);
    mean_ = std::move(sum);
    std_ = std::move(sq);
}

void Normalizer::set(std::vector<double> mean, std::vector<double> stddev) {
    if (mean.size() != stddev.size()) throw DimensionError("normalizer mean/std size mismatch");
    mean_ = std::move(mean);
    std_ = std::move(stddev);
}

void Normalizer::check(const SensorWindow& w) const {
    if (!fitted()) throw std::logic_error("normalizer used before fit");
    if (w.channels != mean_.size()) throw DimensionError("window channel count differs from normalizer");
}

void Normalizer::apply(SensorWindow& w) const {
    check(w);
    for (std::size_t r = 0; r < w.length; ++r) {
        for (std::size_t k = 0; k < w.channels; ++k) {
            double& v = w.x[r * w.channels + k];
            v = std_[k] < kMinStd ? 0.0 : (v - mean_[k]) / std_[k];
        }
    }
}

void Normalizer::apply(std::vector<SensorWindow>& ws) const {
    for (auto& w : ws) apply(w);
}

std::vector<double> Normalizer::denormalize(const SensorWindow& w) const {
    check(w);
    std::vector<double> out(w.x.size());
    for (std::size_t r = 0; r < w.length; ++r) {
        for (std::size_t k = 0; k < w.channels; ++k) {
            const double v = w.x[r * w.channels + k];
            out[r * w.channels + k] = std_[k] < kMinStd ? mean_[k] : v * std_[k] + mean_[k];
        }
    }
    return out;
}

double sample_beta(double alpha, Rng& rng) {
    if (!(alpha > 0)) throw std::invalid_argument("Beta parameter must be positive");
    std::gamma_distribution<double> g(alpha, 1.0);
    const double a = g(rng), b = g(rng);
    if (a + b == 0.0) return 0.5;
    return a / (a + b);
}

MixedPair mixup(const std::vector<double>& x_i, double y_i, const std::vector<double>& x_j, double y_j, double lambda) {
    if (x_i.size() != x_j.size()) throw DimensionError("mixup inputs differ in shape");
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("mixup lambda outside [0,1]");
    MixedPair out{std::vector<double>(x_i.size()), lambda * y_i + (1.0 - lambda) * y_j, lambda};
    for (std::size_t k = 0; k < x_i.size(); ++k) out.x[k] = lambda * x_i[k] + (1.0 - lambda) * x_j[k];
    return out;
}

MixedPair mixup(const std::vector<double>& x_i, double y_i, const std::vector<double>& x_j, double y_j, double alpha,
                Rng& rng) {
    return mixup(x_i, y_i, x_j, y_j, sample_beta(alpha, rng));
}

void write_windows_csv(std::ostream& out, const std::vector<SensorWindow>& windows) {
    out << "window,unit,end_cycle,step,t,y,broken,padded";
    const std::size_t c = windows.empty() ? 0 : windows.front().channels;
    for (std::size_t k = 0; k < c; ++k) out << ",x" << k;
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        for (std::size_t r = 0; r < w.length; ++r) {
            out << i << ',' << w.unit << ',' << w.end_cycle << ',' << r << ',' << w.t[r] << ',' << w.y << ','
                << w.broken << ',' << w.padded;
            for (std::size_t k = 0; k < w.channels; ++k) out << ',' << w.x[r * w.channels + k];
            out << '\n';
        }
    }
}

}  // namespace rgpd
