#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svrnn/tensor.hpp"

namespace svrnn {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Gaussian radial basis phi_i(r) = exp(-|r - b_i|^2 / (2 a_i)) on W = [0,1]^2.
struct SpatialBasis {
    std::vector<Point> centers;
    std::vector<double> widths;

    std::size_t count() const { return centers.size(); }
    /// Throws std::invalid_argument unless every center lies in W and every width is positive.
    void validate() const;
};

enum class Provenance : unsigned char { real = 0, support = 1, generated = 2 };

const char* to_string(Provenance p);

/// Parameters a datum was simulated from, kept so it can be re-simulated.
struct DatumOrigin {
    SpatialBasis basis;
    Tensor theta0;
};

/// One time series {x_t}: observations has shape (T, N_G).
struct Datum {
    Tensor observations;
    Provenance provenance = Provenance::real;
    std::optional<DatumOrigin> origin;

    std::size_t horizon() const { return observations.shape()[0]; }
    std::size_t grid_size() const { return observations.shape()[1]; }
};

/// Collection of data sharing one grid and horizon.
struct Dataset {
    std::vector<Datum> data;
    std::size_t grid_side = 0;
    std::size_t horizon = 0;
    Provenance provenance = Provenance::real;
    std::map<std::string, std::string> metadata;

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    std::size_t grid_size() const { return grid_side * grid_side; }
    /// Flattened length T * N_G of one datum.
    std::size_t feature_size() const { return horizon * grid_size(); }

    /// Throws GeometryError if any datum disagrees with (horizon, grid_side^2)
    /// or holds a non-finite value.
    void validate() const;
};

/// Raised when two datasets, or a dataset and a model, disagree on geometry.
class GeometryError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

void require_same_geometry(const Dataset& a, const Dataset& b);

/// Comma-separated, round-trip exact ("%.17g") list of reals.
std::string format_reals(std::span<const double> values);
std::vector<double> parse_reals(const std::string& text);

}  // namespace svrnn
