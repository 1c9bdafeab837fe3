#include "idc/rng.hpp"

#include <cmath>
#include <numbers>

namespace idc::rng {

// Box-Muller, cosine branch only; consumes two draws.
double Stream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Stream::cauchy(double scale) {
    return scale * std::tan(std::numbers::pi * (uniform() - 0.5));
}

}  // namespace idc::rng
