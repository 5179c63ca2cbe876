#include <gtest/gtest.h>

#include <cmath>

#include "gradient_suite.hpp"
#include "reference_tables.hpp"
#include "svrnn/models.hpp"

using namespace svrnn;

namespace {

const ModelKind kAll[] = {ModelKind::svae, ModelKind::vrnn, ModelKind::svrnn};

Tensor random_datum(const Architecture& a, RngStream& r) { return rng_normal(r, {a.horizon, a.grid_size()}, 1.0, 1.0); }

}  // namespace

TEST(ShapeAudit, MatchesReferenceTables) {
    for (ModelKind k : kAll) {
        const auto model = GenerativeModel::create(Architecture::reference(k), 1);
        EXPECT_EQ(reference::compare(k, model->shape_audit()), "") << to_string(k);
    }
}

TEST(ShapeAudit, TraceFollowsForwardPass) {
    // The S-VAE audit is produced by running the layers, so the traced shapes are live.
    const Architecture a = gradcheck::tiny(ModelKind::svae);
    const auto model = GenerativeModel::create(a, 2);
    const auto audit = model->shape_audit();
    ASSERT_FALSE(audit.empty());
    EXPECT_EQ(audit.front().output, (Shape{2, 8, 8}));
    EXPECT_EQ(audit.back().output, (Shape{2, 8, 8}));
}

TEST(Architecture, DescribeParseRoundTrip) {
    for (ModelKind k : kAll) {
        Architecture a = Architecture::reference(k, 20, 4);
        a.reconstruction = Reconstruction::sum;
        EXPECT_EQ(Architecture::parse(a.describe()), a);
    }
    EXPECT_THROW(Architecture::parse("kind=gan\n"), std::invalid_argument);
    EXPECT_EQ(parse_model_kind("s-vrnn"), ModelKind::svrnn);
    EXPECT_THROW(parse_model_kind("gan"), std::invalid_argument);
}

TEST(Architecture, ReferenceExtents) {
    const Architecture v = Architecture::reference(ModelKind::vrnn);
    EXPECT_EQ(v.latent_dim, 16u);
    EXPECT_EQ(v.encoder_hidden, (std::vector<std::size_t>{40}));
    const Architecture s = Architecture::reference(ModelKind::svrnn);
    EXPECT_EQ(s.latent_dim, 20u);
    EXPECT_EQ(s.encoder_hidden, (std::vector<std::size_t>{40, 80, 40}));
    EXPECT_EQ(s.subspaces(), 2u);
    const Architecture c = Architecture::reference(ModelKind::svae);
    EXPECT_EQ(c.conv_channels, (std::vector<std::size_t>{16, 32, 64, 128}));
    EXPECT_EQ(SplitVae::encoder_extents(c), (std::vector<std::size_t>{100, 50, 25, 13, 7}));
}

TEST(Models, InitIsSeeded) {
    for (ModelKind k : kAll) {
        const Architecture a = gradcheck::tiny(k);
        EXPECT_EQ(GenerativeModel::create(a, 5)->params(), GenerativeModel::create(a, 5)->params());
        EXPECT_FALSE(GenerativeModel::create(a, 5)->params() == GenerativeModel::create(a, 6)->params());
    }
}

TEST(Models, FromParamsValidates) {
    const Architecture a = gradcheck::tiny(ModelKind::svrnn);
    const auto m = GenerativeModel::create(a, 1);
    EXPECT_NO_THROW(GenerativeModel::from_params(a, m->params()));
    ParamStore wrong;
    for (std::size_t i = 0; i < m->params().size(); ++i) {
        Tensor v = m->params()[i];
        if (i == 0) v = Tensor({1, 1});
        wrong.add(m->params().name(i), v);
    }
    EXPECT_THROW(GenerativeModel::from_params(a, wrong), std::invalid_argument);
    EXPECT_THROW(GenerativeModel::from_params(a, ParamStore{}), std::invalid_argument);
}

TEST(Loss, TotalIsSumOfTerms) {
    for (ModelKind k : kAll) {
        const Architecture a = gradcheck::tiny(k);
        const auto m = GenerativeModel::create(a, 3);
        RngStream r(4);
        const Tensor x = random_datum(a, r);
        const LatentNoise noise = m->draw_noise(r);
        for (bool support : {false, true}) {
            const LossBreakdown l = m->evaluate(x, support, noise);
            EXPECT_NEAR(l.total, l.reconstruction + l.kl_primary + l.kl_shared, 1e-12);
            EXPECT_GT(l.reconstruction, 0.0);
            EXPECT_TRUE(std::isfinite(l.total));
        }
    }
}

TEST(Loss, IndicatorGatesPrimaryKl) {
    for (ModelKind k : {ModelKind::svae, ModelKind::svrnn}) {
        const Architecture a = gradcheck::tiny(k);
        const auto m = GenerativeModel::create(a, 3);
        RngStream r(9);
        const Tensor x = random_datum(a, r);
        const LatentNoise noise = m->draw_noise(r);
        const LossBreakdown real = m->evaluate(x, false, noise), sup = m->evaluate(x, true, noise);
        EXPECT_EQ(real.kl_primary, 0.0);
        EXPECT_GT(sup.kl_primary, 0.0);
        EXPECT_EQ(real.kl_shared, sup.kl_shared);
        EXPECT_EQ(real.reconstruction, sup.reconstruction);
    }
    const Architecture v = gradcheck::tiny(ModelKind::vrnn);
    const auto m = GenerativeModel::create(v, 3);
    RngStream r(9);
    const Tensor x = random_datum(v, r);
    const LatentNoise noise = m->draw_noise(r);
    const LossBreakdown a = m->evaluate(x, false, noise), b = m->evaluate(x, true, noise);
    EXPECT_GT(a.kl_primary, 0.0);
    EXPECT_EQ(a.kl_shared, 0.0);
    EXPECT_EQ(a.total, b.total);
}

TEST(Loss, MeanReconstructionIsScaledSum) {
    Architecture a = gradcheck::tiny(ModelKind::vrnn);
    a.reconstruction = Reconstruction::sum;
    const auto s = GenerativeModel::create(a, 3);
    a.reconstruction = Reconstruction::mean;
    const auto m = GenerativeModel::from_params(a, s->params());
    RngStream r(2);
    const Tensor x = random_datum(a, r);
    const LatentNoise noise = s->draw_noise(r);
    EXPECT_NEAR(s->evaluate(x, false, noise).reconstruction,
                m->evaluate(x, false, noise).reconstruction * static_cast<double>(a.grid_size()), 1e-9);
}

TEST(Loss, RejectsWrongGeometry) {
    for (ModelKind k : kAll) {
        const auto m = GenerativeModel::create(gradcheck::tiny(k), 1);
        RngStream r(1);
        const LatentNoise noise = m->draw_noise(r);
        EXPECT_THROW(m->evaluate(Tensor({1, 3}), false, noise), GeometryError);
    }
}

TEST(Loss, SmallGradientStepDescends) {
    for (ModelKind k : kAll) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const Architecture a = gradcheck::tiny(k);
            auto m = GenerativeModel::create(a, seed);
            RngStream r(seed, 5);
            const Tensor x = random_datum(a, r);
            const LatentNoise noise = m->draw_noise(r);
            const bool support = seed % 2 == 0;
            std::vector<Tensor> grads;
            double before = 0.0;
            {
                ad::Tape tape;
                BoundParams p(tape, m->params());
                const LossTerms l = m->loss(p, x, support, noise);
                tape.backward(l.total);
                before = l.total.value().item();
                for (std::size_t i = 0; i < p.size(); ++i) grads.push_back(p[i].grad());
            }
            for (std::size_t i = 0; i < grads.size(); ++i)
                for (std::size_t j = 0; j < grads[i].size(); ++j) m->params()[i][j] -= 1e-5 * grads[i][j];
            EXPECT_LT(m->evaluate(x, support, noise).total, before) << to_string(k) << " seed " << seed;
        }
    }
}

TEST(Generate, DeterministicAndShaped) {
    for (ModelKind k : kAll) {
        const Architecture a = gradcheck::tiny(k);
        const auto m = GenerativeModel::create(a, 1);
        const Dataset g = m->generate(4, 17), h = m->generate(4, 17), other = m->generate(4, 18);
        ASSERT_EQ(g.size(), 4u);
        EXPECT_EQ(g.provenance, Provenance::generated);
        EXPECT_EQ(g.grid_side, a.grid_side);
        EXPECT_EQ(g.horizon, a.horizon);
        g.validate();
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(g.data[i].observations, h.data[i].observations);
        EXPECT_NE(g.data[0].observations, other.data[0].observations);
        // Sample i depends only on (seed, i).
        EXPECT_EQ(m->generate(2, 17).data[1].observations, g.data[1].observations);
        EXPECT_EQ(m->generate(0, 17).size(), 0u);
    }
}

class FullLossGradient : public ::testing::TestWithParam<ModelKind> {};

TEST_P(FullLossGradient, MatchesCentralDifferences) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        EXPECT_LE(gradcheck::full_loss_check(GetParam(), seed), 1e-4) << "seed " << seed;
    }
}

INSTANTIATE_TEST_SUITE_P(AllModels, FullLossGradient, ::testing::ValuesIn(kAll),
                         [](const auto& info) { return std::string(to_string(info.param)); });
