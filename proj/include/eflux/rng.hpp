#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace eflux {

std::uint64_t splitmix64(std::uint64_t x);

// A seeded normal/uniform source. Streams for parallel work are derived from
// (master seed, index) so results never depend on scheduling.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    static RngStream derive(std::uint64_t master_seed, std::uint64_t index)
    {
        return RngStream(splitmix64(master_seed ^ splitmix64(index)));
    }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
    std::uniform_real_distribution<double> uniform_;
};

// Worker count used by the Monte Carlo estimators; 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs body(i) for i in [0, n). Each index must write only its own outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace eflux
