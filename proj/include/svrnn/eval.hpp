#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "svrnn/dataset.hpp"
#include "svrnn/tensor.hpp"

namespace svrnn {

/// Top-k principal directions of a set of flattened data.
struct PcaBasis {
    Tensor mean;                     // length D
    std::vector<Tensor> components;  // k orthonormal vectors of length D
    std::vector<double> eigenvalues; // descending, >= 0, population (1/N) scaling

    std::size_t k() const { return components.size(); }
    std::size_t dimension() const { return mean.size(); }
};

/// N x D matrix, one flattened datum (time-major) per row.
Tensor flatten(const Dataset& data);

/// PCA through the N x N Gram matrix of the centered rows. Requires N >= k + 1.
PcaBasis fit_pca(const Tensor& rows, std::size_t k);
PcaBasis fit_pca(const Dataset& data, std::size_t k);

/// N x k coordinates (x - mean) . components.
Tensor project(const PcaBasis& basis, const Tensor& rows);
Tensor project(const PcaBasis& basis, const Dataset& data);

class ZeroVarianceError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Population moments. Skewness and kurtosis (non-excess) are absent when the variance is zero.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    std::optional<double> skewness;
    std::optional<double> kurtosis;

    /// Throw ZeroVarianceError when undefined.
    double skew() const;
    double kurt() const;
};

/// Requires at least two samples.
Moments moments(std::span<const double> samples);

struct MomentReport {
    std::string label;
    std::vector<Moments> axes;  // one per principal component
};

struct SimilarityReport {
    PcaBasis basis;
    std::vector<MomentReport> rows;  // pool first, then the training set and each generated set
    /// Normalized L1 distance of every non-pool row from the pool row, in row order.
    std::vector<std::pair<std::string, double>> distances;

    double distance(const std::string& label) const;
    std::string to_text() const;
    std::string to_csv() const;
};

/// sum over axes and the four moments of |m_gen - m_pool| / (|m_pool| + 1).
/// Undefined skewness/kurtosis count as 0.
double moment_distance(const MomentReport& generated, const MomentReport& pool);

MomentReport moment_report(const std::string& label, const Tensor& coords);

/// PCA is fitted on the pool; every dataset is projected onto the same axes.
SimilarityReport similarity_report(const Dataset& pool, const Dataset& train,
                                   const std::vector<std::pair<std::string, const Dataset*>>& generated,
                                   std::size_t k = 3);

/// "x,y,z,label" rows (one coordinate column per component).
std::string coordinates_csv(const std::vector<std::pair<std::string, Tensor>>& labelled_coords);

/// max_j |x_t[j] - 1| for every step t of a datum.
std::vector<double> peak_magnitudes(const Datum& datum);

/// Fraction of data whose peak magnitude at the last step is below that at the first.
double decay_fraction(const Dataset& data);

}  // namespace svrnn
