#include <algorithm>
#include <cmath>

#include "rgpd/data/data.hpp"

namespace rgpd {

std::vector<UnitTrajectory> synth_degradation(const SynthConfig& c) {
    if (c.min_length < 2 || c.max_length < c.min_length) throw std::invalid_argument("bad synthetic length range");
    if (c.channels == 0) throw std::invalid_argument("synthetic data needs at least one channel");
    if (c.noise < 0) throw std::invalid_argument("noise must be nonnegative");
    Rng rng(c.seed);
    // Channel responses are shared by every unit, as sensors of one fleet would be.
    std::uniform_real_distribution<double> offset(-1.0, 1.0), gain(0.5, 2.0);
    std::bernoulli_distribution flip(0.5);
    std::vector<double> a(c.channels), b(c.channels);
    for (std::size_t k = 0; k < c.channels; ++k) {
        a[k] = offset(rng);
        b[k] = gain(rng) * (flip(rng) ? 1.0 : -1.0);
    }
    std::vector<std::string> names;
    for (std::size_t k = 0; k < c.channels; ++k) names.push_back("s" + std::to_string(k + 1));

    std::uniform_int_distribution<std::size_t> len(c.min_length, c.max_length);
    std::uniform_real_distribution<double> knee(0.3, 0.6), power(1.2, 2.5);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<UnitTrajectory> units;
    for (std::size_t u = 0; u < c.units; ++u) {
        UnitTrajectory t;
        t.unit = static_cast<int>(u) + 1;
        t.channels = names;
        const std::size_t n = len(rng);
        const double k0 = knee(rng) * static_cast<double>(n - 1), p = power(rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(i);
            const double h = x <= k0 ? 1.0 : 1.0 - std::pow((x - k0) / (static_cast<double>(n - 1) - k0), p);
            t.cycles.push_back(static_cast<int>(i) + 1);
            for (std::size_t k = 0; k < c.channels; ++k) {
                const double eps = c.noise > 0 ? c.noise * noise(rng) : 0.0;
                t.values.push_back(a[k] + b[k] * h + eps);
            }
            if (c.target == TargetKind::soh) t.soh.push_back(1.0 - 0.3 * (1.0 - h));
        }
        units.push_back(std::move(t));
    }
    return units;
}

UnitSplit split_units(std::vector<UnitTrajectory> units, double train_fraction, double valid_fraction,
                      std::uint64_t seed) {
    if (train_fraction <= 0 || valid_fraction < 0 || train_fraction + valid_fraction > 1.0) {
        throw std::invalid_argument("split fractions must be positive and sum to at most 1");
    }
    Rng rng(seed);
    std::shuffle(units.begin(), units.end(), rng);
    const auto n = static_cast<double>(units.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
    const auto n_valid = std::min(units.size() - n_train, static_cast<std::size_t>(std::llround(n * valid_fraction)));
    UnitSplit s;
    auto by_id = [](const UnitTrajectory& a, const UnitTrajectory& b) { return a.unit < b.unit; };
    s.train.assign(units.begin(), units.begin() + n_train);
    s.valid.assign(units.begin() + n_train, units.begin() + n_train + n_valid);
    s.test.assign(units.begin() + n_train + n_valid, units.end());
    std::sort(s.train.begin(), s.train.end(), by_id);
    std::sort(s.valid.begin(), s.valid.end(), by_id);
    std::sort(s.test.begin(), s.test.end(), by_id);
    return s;
}

void truncate_units(std::vector<UnitTrajectory>& units, double lo, double hi, Rng& rng) {
    if (lo <= 0 || hi > 1 || lo > hi) throw std::invalid_argument("truncation range must lie in (0,1]");
    std::uniform_real_distribution<double> frac(lo, hi);
    for (auto& u : units) {
        const std::size_t keep =
            std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(frac(rng) * u.length())), 1, u.length());
        const std::size_t c = u.num_channels();
        u.end_rul += static_cast<double>(u.cycles.back() - u.cycles[keep - 1]);
        u.failed = u.failed && keep == u.length();
        u.cycles.resize(keep);
        u.values.resize(keep * c);
        if (!u.soh.empty()) u.soh.resize(keep);
    }
}

}  // namespace rgpd
