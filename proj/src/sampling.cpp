#include "sbo/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace sbo {
namespace {

constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

double radical_inverse(std::uint64_t index, unsigned base) {
    double result = 0.0;
    double f = 1.0 / base;
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= base;
    }
    return result;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

std::vector<double> halton_point(std::uint64_t index, std::size_t dim, const std::vector<double>& shift) {
    if (dim > std::size(kPrimes)) throw std::invalid_argument("halton_point: dimension too large");
    std::vector<double> p(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        double v = radical_inverse(index, kPrimes[k]);
        if (!shift.empty()) {
            v += shift[k];
            v -= std::floor(v);
        }
        p[k] = v;
    }
    return p;
}

std::vector<double> random_shift(std::size_t dim, std::uint64_t seed) {
    std::vector<double> s(dim);
    std::uint64_t state = seed;
    for (auto& v : s) {
        state = splitmix64(state);
        v = static_cast<double>(state >> 11) * 0x1.0p-53;
    }
    return s;
}

}  // namespace sbo
