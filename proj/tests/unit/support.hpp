#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wearpm/temporal.hpp"

namespace testing {

// Small seeded generator used by the property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
    }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), rng_);
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline wearpm::Date ymd(int y, unsigned m, unsigned d) {
    return wearpm::Date{std::chrono::year(y), std::chrono::month(m), std::chrono::day(d)};
}

// Seconds since the epoch for a UTC wall clock time.
inline wearpm::Instant utc(int y, unsigned m, unsigned d, int hh, int mm = 0, int ss = 0) {
    return wearpm::instant_from_civil(ymd(y, m, d), std::chrono::seconds(hh * 3600 + mm * 60 + ss), 0);
}

}  // namespace testing
