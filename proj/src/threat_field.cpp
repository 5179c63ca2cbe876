#include "svrnn/threat_field.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace svrnn {

namespace {

Eigen::MatrixXd to_eigen(const Tensor& A) {
    const std::size_t n = A.shape()[0];
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = A.at(i, j);
    return m;
}

void require_square(const Tensor& A) {
    if (A.rank() != 2 || A.shape()[0] != A.shape()[1] || A.shape()[0] == 0) {
        throw ShapeError("dynamics matrix must be square, got " + to_string(A.shape()));
    }
}

// y = A x for a square matrix.
void apply(const Tensor& A, const std::vector<double>& x, std::vector<double>& y) {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += A[i * n + j] * x[j];
        y[i] = s;
    }
}

// Precomputed Phi(r_j) for every grid point: shape (N_G, N_P).
Tensor basis_matrix(const SpatialBasis& basis, const ObservationGrid& grid) {
    const std::size_t np = basis.count();
    Tensor phi({grid.size(), np});
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Tensor row = rbf_eval(basis, grid.point(j));
        for (std::size_t i = 0; i < np; ++i) phi.at(j, i) = row[i];
    }
    return phi;
}

Tensor observe_with(const Tensor& phi, const Tensor& theta, double sigma2, RngStream& rng) {
    const std::size_t ng = phi.shape()[0], np = phi.shape()[1];
    Tensor x({ng});
    for (std::size_t j = 0; j < ng; ++j) {
        double c = 1.0;
        for (std::size_t i = 0; i < np; ++i) c += phi.at(j, i) * theta[i];
        x[j] = c;
    }
    if (sigma2 > 0.0) {
        for (std::size_t j = 0; j < ng; ++j) x[j] += sigma2 * rng.normal();
    }
    return x;
}

SpatialBasis random_basis(const PoolConfig& c, RngStream& rng) {
    SpatialBasis b;
    for (std::size_t i = 0; i < c.n_p; ++i) {
        const double x = rng.uniform();
        const double y = rng.uniform();
        b.centers.push_back({x, y});
        b.widths.push_back(rng.uniform(c.width_min, c.width_max));
    }
    return b;
}

Datum simulate_datum(const PoolConfig& c, const ThreatDynamics& dyn, const ObservationGrid& grid, RngStream& rng,
                     Provenance provenance) {
    SpatialBasis basis = random_basis(c, rng);
    Tensor theta0 = rng_uniform(rng, {c.n_p}, -c.theta0_range, c.theta0_range);
    const auto states = integrate_dynamics(dyn, theta0, c.horizon, rng);
    const Tensor phi = basis_matrix(basis, grid);
    Tensor obs({c.horizon, grid.size()});
    for (std::size_t t = 0; t < c.horizon; ++t) {
        const Tensor x = observe_with(phi, states[t].theta, dyn.measurement_noise_std, rng);
        std::copy(x.data().begin(), x.data().end(), obs.data().begin() + static_cast<std::ptrdiff_t>(t * grid.size()));
    }
    Datum d;
    d.observations = std::move(obs);
    d.provenance = provenance;
    d.origin = DatumOrigin{std::move(basis), std::move(theta0)};
    return d;
}

std::string fmt(double v) { return format_reals(std::span<const double>(&v, 1)); }

Dataset simulate_dataset(const PoolConfig& c, const Tensor& shared_A, Provenance provenance) {
    c.validate();
    const ObservationGrid grid{c.grid_side};
    const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / c.dt));
    Dataset ds;
    ds.grid_side = c.grid_side;
    ds.horizon = c.horizon;
    ds.provenance = provenance;
    ds.data.reserve(c.count);
    for (std::size_t i = 0; i < c.count; ++i) {
        RngStream rng(c.seed, i + 1);
        Tensor A = shared_A;
        if (!c.shared_dynamics) {
            RngStream arng = rng.derive(0);
            A = random_hurwitz(c.n_p, arng);
        }
        const ThreatDynamics dyn = ThreatDynamics::create(A, c.sigma1, c.sigma2, c.dt, steps);
        ds.data.push_back(simulate_datum(c, dyn, grid, rng, provenance));
        if (!c.shared_dynamics) ds.metadata["datum." + std::to_string(i) + ".A"] = format_reals(A.data());
    }
    auto& m = ds.metadata;
    m["seed"] = std::to_string(c.seed);
    m["count"] = std::to_string(c.count);
    m["grid_side"] = std::to_string(c.grid_side);
    m["horizon"] = std::to_string(c.horizon);
    m["n_p"] = std::to_string(c.n_p);
    m["sigma1"] = fmt(c.sigma1);
    m["sigma2"] = fmt(c.sigma2);
    m["dt"] = fmt(c.dt);
    m["theta0_range"] = fmt(c.theta0_range);
    m["shared_dynamics"] = c.shared_dynamics ? "1" : "0";
    if (c.shared_dynamics) m["dynamics.A"] = format_reals(shared_A.data());
    return ds;
}

}  // namespace

ThreatDynamics ThreatDynamics::create(Tensor A, double sigma1, double sigma2, double dt,
                                      std::size_t steps_per_observation) {
    require_square(A);
    if (!(dt > 0.0)) throw std::invalid_argument("integration step dt must be positive");
    if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0)) throw std::invalid_argument("noise levels must be non-negative");
    if (steps_per_observation == 0) throw std::invalid_argument("steps_per_observation must be positive");
    const double re = max_real_eigenvalue(A);
    if (!(re < 0.0)) {
        throw std::invalid_argument("dynamics matrix is not Hurwitz (max real eigenvalue " + std::to_string(re) + ")");
    }
    return ThreatDynamics{std::move(A), sigma1, sigma2, dt, steps_per_observation};
}

Point ObservationGrid::point(std::size_t j) const {
    const std::size_t row = j / side, col = j % side;
    const double h = 1.0 / static_cast<double>(side);
    return {(static_cast<double>(col) + 0.5) * h, (static_cast<double>(row) + 0.5) * h};
}

Tensor rbf_eval(const SpatialBasis& basis, Point r) {
    if (!(r.x >= 0.0 && r.x <= 1.0 && r.y >= 0.0 && r.y <= 1.0)) {
        throw std::invalid_argument("point outside the unit workspace");
    }
    Tensor phi({basis.count()});
    for (std::size_t i = 0; i < basis.count(); ++i) {
        const double dx = r.x - basis.centers[i].x, dy = r.y - basis.centers[i].y;
        phi[i] = std::exp(-(dx * dx + dy * dy) / (2.0 * basis.widths[i]));
    }
    return phi;
}

double threat_eval(const SpatialBasis& basis, const ThreatState& state, Point r) {
    if (state.theta.size() != basis.count()) {
        throw ShapeError("theta length " + std::to_string(state.theta.size()) + " does not match basis size " +
                         std::to_string(basis.count()));
    }
    return 1.0 + dot(rbf_eval(basis, r), state.theta);
}

Tensor random_hurwitz(std::size_t n, RngStream& rng) {
    if (n == 0) throw std::invalid_argument("random_hurwitz needs n >= 1");
    // Block-diagonal real Schur form: 1x1 blocks (a) and 2x2 blocks [[a, b], [-b, a]].
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n;) {
        const double a = rng.uniform(-1.0, -0.1);
        const auto k = static_cast<Eigen::Index>(i);
        if (i + 1 < n && rng.uniform() < 0.5) {
            const double b = rng.uniform(0.1, 1.0);
            B(k, k) = a;
            B(k + 1, k + 1) = a;
            B(k, k + 1) = b;
            B(k + 1, k) = -b;
            i += 2;
        } else {
            B(k, k) = a;
            i += 1;
        }
    }
    Eigen::MatrixXd G(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        for (Eigen::Index j = 0; j < G.cols(); ++j) G(i, j) = rng.normal();
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
    const Eigen::MatrixXd A = Q * B * Q.transpose();
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.at(i, j) = A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return out;
}

double max_real_eigenvalue(const Tensor& A) {
    require_square(A);
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(A), false);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigenvalue computation did not converge");
    return es.eigenvalues().real().maxCoeff();
}

std::vector<ThreatState> integrate_dynamics(const ThreatDynamics& dyn, const Tensor& theta0, std::size_t horizon,
                                            RngStream& rng) {
    require_square(dyn.A);
    const std::size_t n = dyn.A.shape()[0];
    if (theta0.size() != n) {
        throw ShapeError("theta0 length " + std::to_string(theta0.size()) + " does not match A " +
                         to_string(dyn.A.shape()));
    }
    if (!(dyn.dt > 0.0)) throw std::invalid_argument("integration step dt must be positive");
    const double h = dyn.dt;
    const double noise = dyn.process_noise_std * std::sqrt(h);
    std::vector<double> th(theta0.data().begin(), theta0.data().end());
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    std::vector<ThreatState> out;
    out.reserve(horizon);
    for (std::size_t t = 1; t <= horizon; ++t) {
        for (std::size_t s = 0; s < dyn.steps_per_observation; ++s) {
            apply(dyn.A, th, k1);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = th[i] + 0.5 * h * k1[i];
            apply(dyn.A, tmp, k2);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = th[i] + 0.5 * h * k2[i];
            apply(dyn.A, tmp, k3);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = th[i] + h * k3[i];
            apply(dyn.A, tmp, k4);
            for (std::size_t i = 0; i < n; ++i) th[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if (noise > 0.0) {
                for (std::size_t i = 0; i < n; ++i) th[i] += noise * rng.normal();
            }
        }
        out.push_back({Tensor::vector(th), t});
    }
    return out;
}

Tensor observe(const SpatialBasis& basis, const ThreatState& state, const ObservationGrid& grid, double sigma2,
               RngStream& rng) {
    if (state.theta.size() != basis.count()) {
        throw ShapeError("theta length " + std::to_string(state.theta.size()) + " does not match basis size " +
                         std::to_string(basis.count()));
    }
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("measurement noise must be non-negative");
    return observe_with(basis_matrix(basis, grid), state.theta, sigma2, rng);
}

void PoolConfig::validate() const {
    if (count == 0) throw std::invalid_argument("pool count must be at least 1");
    if (grid_side == 0) throw std::invalid_argument("grid_side must be positive");
    if (horizon == 0) throw std::invalid_argument("horizon must be positive");
    if (n_p == 0) throw std::invalid_argument("n_p must be positive");
    if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0)) throw std::invalid_argument("noise levels must be non-negative");
    if (!(dt > 0.0) || dt > 1.0) throw std::invalid_argument("dt must lie in (0, 1]");
    const double steps = 1.0 / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9) {
        throw std::invalid_argument("1/dt must be an integer so observations fall on integer times");
    }
    if (!(theta0_range >= 0.0)) throw std::invalid_argument("theta0_range must be non-negative");
    if (!(width_min > 0.0) || !(width_max >= width_min)) throw std::invalid_argument("invalid basis width range");
}

Dataset generate_pool(const PoolConfig& config) {
    config.validate();
    RngStream arng(config.seed, 0);
    const Tensor A = random_hurwitz(config.n_p, arng);
    return simulate_dataset(config, A, Provenance::real);
}

Dataset generate_support(PoolConfig config, const Tensor& A) {
    require_square(A);
    if (A.shape()[0] != config.n_p) {
        throw ShapeError("support dynamics " + to_string(A.shape()) + " does not match n_p " +
                         std::to_string(config.n_p));
    }
    config.sigma1 = 0.0;
    config.sigma2 = 0.0;
    config.shared_dynamics = true;
    return simulate_dataset(config, A, Provenance::support);
}

Dataset subsample(const Dataset& pool, std::size_t n_d, std::uint64_t seed) {
    if (n_d > pool.size()) {
        throw std::invalid_argument("cannot draw " + std::to_string(n_d) + " data from a pool of " +
                                    std::to_string(pool.size()));
    }
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    RngStream rng(seed, 0x5ab5);
    for (std::size_t i = 0; i < n_d; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n_d);
    Dataset out;
    out.grid_side = pool.grid_side;
    out.horizon = pool.horizon;
    out.provenance = pool.provenance;
    out.metadata = pool.metadata;
    std::vector<double> as_reals;
    for (std::size_t i : idx) {
        out.data.push_back(pool.data[i]);
        as_reals.push_back(static_cast<double>(i));
    }
    out.metadata["subsample.indices"] = format_reals(as_reals);
    out.metadata["subsample.seed"] = std::to_string(seed);
    out.metadata["count"] = std::to_string(n_d);
    return out;
}

Tensor dataset_dynamics(const Dataset& ds) {
    auto it = ds.metadata.find("dynamics.A");
    if (it == ds.metadata.end()) throw std::invalid_argument("dataset carries no shared dynamics matrix");
    std::vector<double> v = parse_reals(it->second);
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (n * n != v.size() || n == 0) throw std::invalid_argument("malformed dynamics matrix in metadata");
    return Tensor({n, n}, std::move(v));
}

Tensor resimulate_noiseless(const Datum& datum, const Tensor& A, std::size_t grid_side, double dt) {
    if (!datum.origin) throw std::invalid_argument("datum has no recorded origin");
    const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / dt));
    const ThreatDynamics dyn = ThreatDynamics::create(A, 0.0, 0.0, dt, steps);
    RngStream unused(0);
    const auto states = integrate_dynamics(dyn, datum.origin->theta0, datum.horizon(), unused);
    const ObservationGrid grid{grid_side};
    const Tensor phi = basis_matrix(datum.origin->basis, grid);
    Tensor obs({datum.horizon(), grid.size()});
    for (std::size_t t = 0; t < states.size(); ++t) {
        const Tensor x = observe_with(phi, states[t].theta, 0.0, unused);
        std::copy(x.data().begin(), x.data().end(), obs.data().begin() + static_cast<std::ptrdiff_t>(t * grid.size()));
    }
    return obs;
}

}  // namespace svrnn
