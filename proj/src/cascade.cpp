#include "socsim/cascade.hpp"

#include <algorithm>
#include <cmath>

namespace soc {

double pile_magnitude(std::uint64_t size) {
    return std::log10(static_cast<double>(std::max<std::uint64_t>(size, 1)));
}

double quake_magnitude(double moment, double moment0) {
    if (moment <= 0.0) return 0.0;
    return (2.0 / 3.0) * std::log10(moment / moment0);
}

}  // namespace soc
