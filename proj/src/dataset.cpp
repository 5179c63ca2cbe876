#include "svrnn/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace svrnn {

void SpatialBasis::validate() const {
    if (centers.empty() || centers.size() != widths.size()) {
        throw std::invalid_argument("spatial basis needs matching, non-empty centers and widths");
    }
    for (const Point& b : centers) {
        if (!(b.x >= 0.0 && b.x <= 1.0 && b.y >= 0.0 && b.y <= 1.0)) {
            throw std::invalid_argument("basis center outside the unit workspace");
        }
    }
    for (double a : widths) {
        if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("basis width must be positive");
    }
}

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::real: return "real";
        case Provenance::support: return "support";
        case Provenance::generated: return "generated";
    }
    return "unknown";
}

void Dataset::validate() const {
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor& obs = data[i].observations;
        if (obs.rank() != 2 || obs.shape()[0] != horizon || obs.shape()[1] != grid_size()) {
            throw GeometryError("datum " + std::to_string(i) + " has shape " + to_string(obs.shape()) +
                                ", dataset expects (" + std::to_string(horizon) + "," +
                                std::to_string(grid_size()) + ")");
        }
        if (!obs.all_finite()) throw GeometryError("datum " + std::to_string(i) + " holds non-finite values");
    }
}

void require_same_geometry(const Dataset& a, const Dataset& b) {
    if (a.grid_side != b.grid_side || a.horizon != b.horizon) {
        throw GeometryError("geometry mismatch: (T=" + std::to_string(a.horizon) + ", side=" +
                            std::to_string(a.grid_side) + ") vs (T=" + std::to_string(b.horizon) +
                            ", side=" + std::to_string(b.grid_side) + ")");
    }
}

std::string format_reals(std::span<const double> values) {
    std::string out;
    char buf[40];
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        std::snprintf(buf, sizeof buf, "%.17g", values[i]);
        out += buf;
    }
    return out;
}

std::vector<double> parse_reals(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("malformed real '" + item + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace svrnn
