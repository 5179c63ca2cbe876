#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "svrnn/threat_field.hpp"

using namespace svrnn;

namespace {

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> mat_vec(const oracle::Matrix& m, const std::vector<double>& v) {
    std::vector<double> out(m.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
    return out;
}

}  // namespace

TEST(Rbf, GaussianOfDistance) {
    SpatialBasis b{{{0.5, 0.5}, {0.0, 1.0}}, {0.1, 0.2}};
    const Tensor phi = rbf_eval(b, {0.5, 0.5});
    EXPECT_DOUBLE_EQ(phi[0], 1.0);
    EXPECT_DOUBLE_EQ(phi[1], std::exp(-0.5 / 0.4));
    EXPECT_THROW(rbf_eval(b, {1.5, 0.0}), std::invalid_argument);
    ThreatState s{Tensor::vector({2.0, 0.0}), 0};
    EXPECT_DOUBLE_EQ(threat_eval(b, s, {0.5, 0.5}), 3.0);
    SpatialBasis bad{{{0.5, 0.5}}, {0.0}};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Grid, CellCentersRowMajor) {
    const ObservationGrid g{4};
    EXPECT_EQ(g.size(), 16u);
    EXPECT_DOUBLE_EQ(g.point(0).x, 0.125);
    EXPECT_DOUBLE_EQ(g.point(0).y, 0.125);
    EXPECT_DOUBLE_EQ(g.point(1).x, 0.375);
    EXPECT_DOUBLE_EQ(g.point(4).y, 0.375);
    EXPECT_DOUBLE_EQ(g.point(15).x, 0.875);
}

TEST(Hurwitz, EigenvaluesInRange) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        RngStream r(seed);
        const std::size_t n = 2 + seed % 5;
        const Tensor A = random_hurwitz(n, r);
        const auto re = oracle::qr_eigen_real_parts(oracle::to_matrix(A));
        ASSERT_EQ(re.size(), n);
        double mx = -1e300;
        for (double v : re) {
            EXPECT_LE(v, -0.1 + 1e-8);
            EXPECT_GE(v, -1.0 - 1e-8);
            mx = std::max(mx, v);
        }
        EXPECT_NEAR(max_real_eigenvalue(A), mx, 1e-8);
    }
}

TEST(Dynamics, RejectsNonHurwitz) {
    EXPECT_THROW(ThreatDynamics::create(Tensor::matrix({{0.1, 0.0}, {0.0, -1.0}}), 0.0, 0.0, 0.01, 100),
                 std::invalid_argument);
    EXPECT_THROW(ThreatDynamics::create(Tensor({2, 3}), 0.0, 0.0, 0.01, 100), ShapeError);
    EXPECT_THROW(ThreatDynamics::create(-1.0 * Tensor::identity(2), 0.0, 0.0, 0.0, 100), std::invalid_argument);
}

TEST(Dynamics, NoiselessMatchesMatrixExponential) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        RngStream r(seed);
        const Tensor A = random_hurwitz(4, r);
        const Tensor theta0 = rng_uniform(r, {4}, -5.0, 5.0);
        const auto dyn = ThreatDynamics::create(A, 0.0, 0.0, 0.01, 100);
        const auto states = integrate_dynamics(dyn, theta0, 5, r);
        ASSERT_EQ(states.size(), 5u);
        const oracle::Matrix step = oracle::expm(oracle::to_matrix(A));
        std::vector<double> expect(theta0.data().begin(), theta0.data().end());
        for (std::size_t t = 0; t < 5; ++t) {
            expect = mat_vec(step, expect);
            EXPECT_EQ(states[t].time, t + 1);
            std::vector<double> diff(4);
            for (std::size_t i = 0; i < 4; ++i) diff[i] = states[t].theta[i] - expect[i];
            EXPECT_LE(norm(diff) / norm(expect), 1e-6) << "seed " << seed << " t " << t + 1;
        }
    }
}

TEST(Dynamics, HurwitzDecay) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        RngStream r(seed + 100);
        const Tensor A = random_hurwitz(4, r);
        const Tensor theta0 = rng_uniform(r, {4}, -5.0, 5.0);
        const double t_star = 10.0 / std::abs(max_real_eigenvalue(A));
        const auto horizon = static_cast<std::size_t>(std::ceil(t_star));
        const auto states = integrate_dynamics(ThreatDynamics::create(A, 0.0, 0.0, 0.01, 100), theta0, horizon, r);
        const std::vector<double> last(states.back().theta.data().begin(), states.back().theta.data().end());
        const std::vector<double> first(theta0.data().begin(), theta0.data().end());
        EXPECT_LE(norm(last), 1e-2 * norm(first));
    }
}

TEST(Dynamics, ProcessNoiseIsSeeded) {
    RngStream r(1);
    const Tensor A = random_hurwitz(3, r);
    const auto dyn = ThreatDynamics::create(A, 0.25, 0.0, 0.01, 100);
    RngStream a(9), b(9), c(10);
    const Tensor th = Tensor::vector({1.0, 2.0, 3.0});
    const auto sa = integrate_dynamics(dyn, th, 3, a), sb = integrate_dynamics(dyn, th, 3, b),
               sc = integrate_dynamics(dyn, th, 3, c);
    EXPECT_EQ(sa.back().theta, sb.back().theta);
    EXPECT_NE(sa.back().theta, sc.back().theta);
}

TEST(Observe, AddsMeasurementNoise) {
    SpatialBasis b{{{0.3, 0.3}}, {0.05}};
    const ThreatState s{Tensor::vector({1.0}), 1};
    const ObservationGrid g{3};
    RngStream r(2);
    const Tensor clean = observe(b, s, g, 0.0, r);
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_DOUBLE_EQ(clean[j], threat_eval(b, s, g.point(j)));
    const Tensor noisy = observe(b, s, g, 0.5, r);
    EXPECT_NE(noisy, clean);
}

namespace {

PoolConfig small_pool(std::uint64_t seed) {
    PoolConfig c;
    c.count = 6;
    c.grid_side = 5;
    c.horizon = 4;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Pool, DeterministicAndShaped) {
    const Dataset a = generate_pool(small_pool(7)), b = generate_pool(small_pool(7)), c = generate_pool(small_pool(8));
    ASSERT_EQ(a.size(), 6u);
    a.validate();
    EXPECT_EQ(a.grid_side, 5u);
    EXPECT_EQ(a.horizon, 4u);
    EXPECT_EQ(a.data[0].observations.shape(), (Shape{4, 25}));
    EXPECT_EQ(a.provenance, Provenance::real);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.data[i].observations, b.data[i].observations);
    EXPECT_NE(a.data[0].observations, c.data[0].observations);
    EXPECT_EQ(dataset_dynamics(a), dataset_dynamics(b));
}

TEST(Pool, DatumDependsOnlyOnItsIndex) {
    PoolConfig big = small_pool(7);
    big.count = 9;
    const Dataset a = generate_pool(small_pool(7)), b = generate_pool(big);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.data[i].observations, b.data[i].observations);
}

TEST(Pool, RejectsBadConfig) {
    PoolConfig c = small_pool(1);
    c.dt = 0.03;
    EXPECT_THROW(generate_pool(c), std::invalid_argument);
    c = small_pool(1);
    c.count = 0;
    EXPECT_THROW(generate_pool(c), std::invalid_argument);
    c = small_pool(1);
    c.width_min = 0.0;
    EXPECT_THROW(generate_pool(c), std::invalid_argument);
}

TEST(Support, NoiselessAndReproducible) {
    const Dataset pool = generate_pool(small_pool(3));
    const Tensor A = dataset_dynamics(pool);
    PoolConfig sc = small_pool(44);
    sc.count = 4;
    const Dataset s = generate_support(sc, A);
    EXPECT_EQ(s.provenance, Provenance::support);
    EXPECT_EQ(dataset_dynamics(s), A);
    for (const Datum& d : s.data) {
        EXPECT_EQ(d.provenance, Provenance::support);
        const Tensor again = resimulate_noiseless(d, A, s.grid_side, 0.01);
        EXPECT_EQ(again, d.observations);
    }
    // Real data carry process noise, so a noiseless replay differs.
    EXPECT_NE(resimulate_noiseless(pool.data[0], A, pool.grid_side, 0.01), pool.data[0].observations);
    EXPECT_THROW(generate_support(sc, -1.0 * Tensor::identity(3)), ShapeError);
}

TEST(Subsample, DistinctIndicesFromPool) {
    PoolConfig c = small_pool(5);
    c.count = 20;
    const Dataset pool = generate_pool(c);
    const Dataset s = subsample(pool, 8, 11);
    ASSERT_EQ(s.size(), 8u);
    const auto idx = parse_reals(s.metadata.at("subsample.indices"));
    ASSERT_EQ(idx.size(), 8u);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto k = static_cast<std::size_t>(idx[i]);
        seen.insert(k);
        EXPECT_EQ(s.data[i].observations, pool.data[k].observations);
    }
    EXPECT_EQ(seen.size(), 8u);
    EXPECT_EQ(subsample(pool, 8, 11).data[3].observations, s.data[3].observations);
    EXPECT_EQ(subsample(pool, 20, 1).size(), 20u);
    EXPECT_THROW(subsample(pool, 21, 1), std::invalid_argument);
}
