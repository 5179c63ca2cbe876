#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "svrnn/dataset.hpp"
#include "svrnn/rng.hpp"
#include "svrnn/tensor.hpp"

namespace svrnn {

/// Coefficient vector Theta at an observation index.
struct ThreatState {
    Tensor theta;
    std::size_t time = 0;
};

/// Noisy linear dynamics dTheta/dt = A Theta + eta_1.
struct ThreatDynamics {
    Tensor A;
    double process_noise_std = 0.25;
    double measurement_noise_std = 0.0;
    double dt = 0.01;
    std::size_t steps_per_observation = 100;

    /// Validated constructor: A square, Hurwitz; dt > 0; noise levels >= 0.
    static ThreatDynamics create(Tensor A, double sigma1, double sigma2, double dt,
                                 std::size_t steps_per_observation);
};

/// Uniform lattice of side*side points at cell centers of W, row-major.
struct ObservationGrid {
    std::size_t side = 0;

    std::size_t size() const { return side * side; }
    Point point(std::size_t j) const;
};

Tensor rbf_eval(const SpatialBasis& basis, Point r);

/// c(r, t) = 1 + Phi(r)^T Theta(t).
double threat_eval(const SpatialBasis& basis, const ThreatState& state, Point r);

/// Random n x n matrix whose eigenvalues all have real part in [-1, -0.1].
Tensor random_hurwitz(std::size_t n, RngStream& rng);

/// Largest real part over the eigenvalues of A.
double max_real_eigenvalue(const Tensor& A);

/// States at observation times 1..horizon. Drift uses classical RK4; process
/// noise enters per substep as theta += sigma1 * sqrt(dt) * xi.
std::vector<ThreatState> integrate_dynamics(const ThreatDynamics& dyn, const Tensor& theta0, std::size_t horizon,
                                            RngStream& rng);

/// x[j] = c(r_j, t) + eta_2[j] with eta_2 ~ N(0, sigma2^2).
Tensor observe(const SpatialBasis& basis, const ThreatState& state, const ObservationGrid& grid, double sigma2,
               RngStream& rng);

struct PoolConfig {
    std::size_t count = 500;
    std::size_t grid_side = 100;
    std::size_t horizon = 4;
    std::size_t n_p = 4;
    double sigma1 = 0.25;
    double sigma2 = 0.0;
    double dt = 0.01;
    std::uint64_t seed = 0;
    double theta0_range = 5.0;  // Theta(0) entries ~ U[-range, range]
    double width_min = 0.02;
    double width_max = 0.2;
    bool shared_dynamics = true;  // one A for the whole pool

    void validate() const;
};

/// Simulates `count` data. Datum i draws from stream (seed, i + 1); the shared
/// dynamics matrix comes from stream (seed, 0).
Dataset generate_pool(const PoolConfig& config);

/// Same pipeline with both noise levels forced to zero and a given dynamics
/// matrix (the known A of the real data). Provenance is `support`.
Dataset generate_support(PoolConfig config, const Tensor& A);

/// Uniform sample of n_d data without replacement; indices recorded in metadata.
Dataset subsample(const Dataset& pool, std::size_t n_d, std::uint64_t seed);

/// Dynamics matrix recorded in a generated dataset's metadata.
Tensor dataset_dynamics(const Dataset& ds);

/// Recomputes a datum from its recorded origin with zero noise.
Tensor resimulate_noiseless(const Datum& datum, const Tensor& A, std::size_t grid_side, double dt);

}  // namespace svrnn
