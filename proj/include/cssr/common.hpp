#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cssr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shapes do not conform to the operation.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite values produced or consumed where finiteness is required.
struct NumericError : Error {
    using Error::Error;
};

// Malformed or inconsistent input files.
struct DataError : Error {
    using Error::Error;
};

// Invalid configuration or API misuse.
struct ConfigError : Error {
    using Error::Error;
};

enum class Precision { f64, f32 };

// splitmix64 stream. State advances by the golden-ratio increment
// 0x9e3779b97f4a7c15; each output is the state mixed by two shift-xor
// multiplies (0xbf58476d1ce4e5b9, 0x94d049bb133111eb) and a final
// 31-bit shift-xor. All randomness in this project flows through this
// generator so that sequences are identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0,n). Plain modulo; the bias is irrelevant at the
    // ranges used here and keeps the rule trivially reproducible.
    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

    // Standard normal via Box-Muller; pairs cached.
    double gaussian();

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent substream seed from a parent seed and a tag.
uint64_t mix_seed(uint64_t a, uint64_t b);
uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c);

// Fisher-Yates: for i = n-1 down to 1, j = rng.uniform_int(i+1), swap a[i], a[j].
std::vector<int> random_permutation(int n, Rng& rng);

} // namespace cssr
