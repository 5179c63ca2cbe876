#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "svrnn/autodiff.hpp"
#include "svrnn/dataset.hpp"
#include "svrnn/layers.hpp"
#include "svrnn/rng.hpp"

namespace svrnn {

enum class ModelKind : unsigned char { svae = 0, vrnn = 1, svrnn = 2 };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
/// S-VAE and S-VRNN train on X and the support set; the VRNN on X only.
inline bool uses_support(ModelKind k) { return k != ModelKind::vrnn; }

/// Per-step reconstruction term: mean or sum of squared errors over the grid.
enum class Reconstruction : unsigned char { mean = 0, sum = 1 };

const char* to_string(Reconstruction r);
Reconstruction parse_reconstruction(const std::string& name);

/// Layer extents of one model. Serialized into checkpoint headers.
struct Architecture {
    ModelKind kind = ModelKind::vrnn;
    std::size_t grid_side = 100;
    std::size_t horizon = 4;
    std::size_t latent_dim = 16;  // per subspace
    std::size_t hidden_dim = 40;  // recurrent state (VRNN / S-VRNN)
    std::vector<std::size_t> encoder_hidden{40};
    std::vector<std::size_t> decoder_hidden{40};
    std::vector<std::size_t> conv_channels;  // S-VAE encoder channels
    double layer_norm_eps = 1e-5;
    Reconstruction reconstruction = Reconstruction::mean;

    /// Layer extents from the reference architecture tables for a given grid.
    static Architecture reference(ModelKind kind, std::size_t grid_side = 100, std::size_t horizon = 4);

    std::size_t grid_size() const { return grid_side * grid_side; }
    std::size_t subspaces() const { return kind == ModelKind::vrnn ? 1 : 2; }

    /// "key=value" lines; parse() accepts exactly what describe() emits.
    std::string describe() const;
    static Architecture parse(const std::string& text);

    void validate() const;
    friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Ordered, named parameter tensors.
class ParamStore {
public:
    void add(std::string name, Tensor value);
    std::size_t size() const { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor& operator[](std::size_t i) { return values_[i]; }
    const Tensor& operator[](std::size_t i) const { return values_[i]; }
    std::size_t index(const std::string& name) const;
    bool contains(const std::string& name) const { return lookup_.count(name) != 0; }
    Tensor& at(const std::string& name) { return values_[index(name)]; }
    const Tensor& at(const std::string& name) const { return values_[index(name)]; }
    std::size_t parameter_count() const;

    friend bool operator==(const ParamStore& a, const ParamStore& b) {
        return a.names_ == b.names_ && a.values_ == b.values_;
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

/// Parameters placed on a tape for one forward pass.
class BoundParams {
public:
    BoundParams(ad::Tape& tape, const ParamStore& store);
    const ad::Variable& operator()(const std::string& name) const { return vars_[store_->index(name)]; }
    const ad::Variable& operator[](std::size_t i) const { return vars_[i]; }
    std::size_t size() const { return vars_.size(); }
    ad::Tape& tape() const { return *tape_; }

private:
    ad::Tape* tape_;
    const ParamStore* store_;
    std::vector<ad::Variable> vars_;
};

struct LossBreakdown {
    double reconstruction = 0.0;
    double kl_primary = 0.0;  // gated: exactly 0 for real data in split models
    double kl_shared = 0.0;   // 0 for the VRNN
    double total = 0.0;
};

struct LossTerms {
    ad::Variable reconstruction;
    ad::Variable kl_primary;
    ad::Variable kl_shared;
    ad::Variable total;

    LossBreakdown values() const;
};

/// Standard-normal draws consumed by one loss evaluation: one tensor per
/// time step (recurrent models) or a single tensor (S-VAE), per subspace.
struct LatentNoise {
    std::vector<Tensor> primary;
    std::vector<Tensor> shared;
};

/// One row of the architecture audit.
struct LayerShape {
    std::string stage;  // "encoder" / "decoder"
    std::string layer;
    Shape output;
};

class GenerativeModel {
public:
    virtual ~GenerativeModel() = default;

    /// Fresh model. Dense and conv weights ~ U(+-1/sqrt(fan_in)); biases 0; layer-norm gain 1, bias 0.
    static std::unique_ptr<GenerativeModel> create(const Architecture& arch, std::uint64_t init_seed);
    /// Model around existing parameters; checks every required tensor is present with the right shape.
    static std::unique_ptr<GenerativeModel> from_params(const Architecture& arch, ParamStore params);

    ModelKind kind() const { return arch_.kind; }
    const Architecture& arch() const { return arch_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    virtual LatentNoise draw_noise(RngStream& rng) const = 0;

    /// Loss of one datum x: (T, N_G). `is_support` selects the indicator in
    /// the split models and is ignored by the VRNN.
    virtual LossTerms loss(const BoundParams& p, const Tensor& x, bool is_support, const LatentNoise& noise) const = 0;

    /// Loss without keeping the tape.
    LossBreakdown evaluate(const Tensor& x, bool is_support, const LatentNoise& noise) const;

    /// One synthetic datum of shape (T, N_G), latents drawn from N(0, I).
    virtual Tensor sample(RngStream& rng) const = 0;

    /// n samples; sample i draws from stream (seed, i).
    Dataset generate(std::size_t n, std::uint64_t seed) const;

    virtual std::vector<LayerShape> shape_audit() const = 0;

protected:
    GenerativeModel(Architecture arch, ParamStore params) : arch_(std::move(arch)), params_(std::move(params)) {}

    Architecture arch_;
    ParamStore params_;
};

/// VRNN (one latent space) and S-VRNN (subspaces kappa_1, kappa_2).
///
/// Per step: encoder (x_t, h_{t-1}) -> trunk -> one head per subspace
/// emitting (mu, log_var); decoder (z^1[, z^2], h_{t-1}) -> x_hat_t;
/// recurrence h_t = LayerNorm(tanh(W [h_{t-1}, x_t, z_t] + b)); h_0 = 0.
class RecurrentVae final : public GenerativeModel {
public:
    RecurrentVae(Architecture arch, ParamStore params);

    std::vector<ad::GaussianLatent> encode_step(const BoundParams& p, const ad::Variable& x_t,
                                                const ad::Variable& h_prev) const;
    ad::Variable decode_step(const BoundParams& p, const std::vector<ad::Variable>& z_t,
                             const ad::Variable& h_prev) const;
    ad::Variable recur(const BoundParams& p, const ad::Variable& h_prev, const ad::Variable& x_t,
                       const std::vector<ad::Variable>& z_t) const;

    LatentNoise draw_noise(RngStream& rng) const override;
    LossTerms loss(const BoundParams& p, const Tensor& x, bool is_support, const LatentNoise& noise) const override;
    Tensor sample(RngStream& rng) const override;
    std::vector<LayerShape> shape_audit() const override;

    static ParamStore init_params(const Architecture& arch, RngStream& rng);
};

/// Convolutional split VAE treating the T frames of a datum as channels.
class SplitVae final : public GenerativeModel {
public:
    SplitVae(Architecture arch, ParamStore params);

    /// x: (T, side, side). Optional trace receives every intermediate shape.
    std::pair<ad::GaussianLatent, ad::GaussianLatent> encode(const BoundParams& p, const ad::Variable& x,
                                                             std::vector<LayerShape>* trace = nullptr) const;
    /// Returns (T, side, side).
    ad::Variable decode(const BoundParams& p, const ad::Variable& z1, const ad::Variable& z2,
                        std::vector<LayerShape>* trace = nullptr) const;

    LatentNoise draw_noise(RngStream& rng) const override;
    LossTerms loss(const BoundParams& p, const Tensor& x, bool is_support, const LatentNoise& noise) const override;
    Tensor sample(RngStream& rng) const override;
    std::vector<LayerShape> shape_audit() const override;

    static ParamStore init_params(const Architecture& arch, RngStream& rng);
    /// Spatial extents of the encoder stages, input first.
    static std::vector<std::size_t> encoder_extents(const Architecture& arch);

    static constexpr ad::ConvGeometry encoder_geometry{3, 2, 1, 0};
    static constexpr ad::ConvGeometry decoder_geometry{3, 2, 1, 1};
};

}  // namespace svrnn
