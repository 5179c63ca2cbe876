#include "svrnn/models.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace svrnn {

using ad::Activation;
using ad::GaussianLatent;
using ad::Variable;

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::svae: return "svae";
        case ModelKind::vrnn: return "vrnn";
        case ModelKind::svrnn: return "svrnn";
    }
    return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "svae" || name == "s-vae") return ModelKind::svae;
    if (name == "vrnn") return ModelKind::vrnn;
    if (name == "svrnn" || name == "s-vrnn") return ModelKind::svrnn;
    throw std::invalid_argument("unknown model kind '" + name + "' (expected svae, vrnn or svrnn)");
}

const char* to_string(Reconstruction r) { return r == Reconstruction::sum ? "sum" : "mean"; }

Reconstruction parse_reconstruction(const std::string& name) {
    if (name == "mean") return Reconstruction::mean;
    if (name == "sum") return Reconstruction::sum;
    throw std::invalid_argument("unknown reconstruction '" + name + "' (expected mean or sum)");
}

Architecture Architecture::reference(ModelKind kind, std::size_t grid_side, std::size_t horizon) {
    Architecture a;
    a.kind = kind;
    a.grid_side = grid_side;
    a.horizon = horizon;
    switch (kind) {
        case ModelKind::vrnn:
            a.latent_dim = 16;
            a.encoder_hidden = {40};
            a.decoder_hidden = {40};
            break;
        case ModelKind::svrnn:
            a.latent_dim = 20;
            a.encoder_hidden = {40, 80, 40};
            a.decoder_hidden = {40, 80, 40};
            break;
        case ModelKind::svae:
            a.latent_dim = 8;
            a.encoder_hidden.clear();
            a.decoder_hidden.clear();
            a.conv_channels = {16, 32, 64, 128};
            break;
    }
    return a;
}

namespace {

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    return out;
}

}  // namespace

std::string Architecture::describe() const {
    std::ostringstream os;
    os << "kind=" << to_string(kind) << '\n'
       << "grid_side=" << grid_side << '\n'
       << "horizon=" << horizon << '\n'
       << "latent_dim=" << latent_dim << '\n'
       << "hidden_dim=" << hidden_dim << '\n'
       << "encoder_hidden=" << join(encoder_hidden) << '\n'
       << "decoder_hidden=" << join(decoder_hidden) << '\n'
       << "conv_channels=" << join(conv_channels) << '\n'
       << "layer_norm_eps=" << format_reals(std::span<const double>(&layer_norm_eps, 1)) << '\n'
       << "reconstruction=" << to_string(reconstruction) << '\n';
    return os.str();
}

Architecture Architecture::parse(const std::string& text) {
    Architecture a;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("malformed architecture line '" + line + "'");
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "kind") a.kind = parse_model_kind(val);
        else if (key == "grid_side") a.grid_side = std::stoull(val);
        else if (key == "horizon") a.horizon = std::stoull(val);
        else if (key == "latent_dim") a.latent_dim = std::stoull(val);
        else if (key == "hidden_dim") a.hidden_dim = std::stoull(val);
        else if (key == "encoder_hidden") a.encoder_hidden = split_sizes(val);
        else if (key == "decoder_hidden") a.decoder_hidden = split_sizes(val);
        else if (key == "conv_channels") a.conv_channels = split_sizes(val);
        else if (key == "layer_norm_eps") a.layer_norm_eps = std::stod(val);
        else if (key == "reconstruction") a.reconstruction = parse_reconstruction(val);
        else throw std::invalid_argument("unknown architecture key '" + key + "'");
    }
    a.validate();
    return a;
}

void Architecture::validate() const {
    if (grid_side == 0 || horizon == 0 || latent_dim == 0) {
        throw std::invalid_argument("architecture extents must be positive");
    }
    if (kind == ModelKind::svae) {
        if (conv_channels.empty()) throw std::invalid_argument("S-VAE needs at least one conv layer");
    } else {
        if (hidden_dim == 0 || encoder_hidden.empty() || decoder_hidden.empty()) {
            throw std::invalid_argument("recurrent models need hidden layers and a positive state size");
        }
    }
}

void ParamStore::add(std::string name, Tensor value) {
    if (lookup_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    lookup_[name] = names_.size();
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
}

std::size_t ParamStore::index(const std::string& name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it->second;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

BoundParams::BoundParams(ad::Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {
    vars_.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) vars_.push_back(tape.parameter(store[i]));
}

LossBreakdown LossTerms::values() const {
    return {reconstruction.value().item(), kl_primary.value().item(), kl_shared.value().item(), total.value().item()};
}

LossBreakdown GenerativeModel::evaluate(const Tensor& x, bool is_support, const LatentNoise& noise) const {
    ad::Tape tape;
    BoundParams p(tape, params_);
    return loss(p, x, is_support, noise).values();
}

Dataset GenerativeModel::generate(std::size_t n, std::uint64_t seed) const {
    Dataset ds;
    ds.grid_side = arch_.grid_side;
    ds.horizon = arch_.horizon;
    ds.provenance = Provenance::generated;
    ds.metadata["model"] = to_string(arch_.kind);
    ds.metadata["generate.seed"] = std::to_string(seed);
    ds.metadata["count"] = std::to_string(n);
    ds.data.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RngStream rng(seed, i);
        Datum d;
        d.observations = sample(rng);
        d.provenance = Provenance::generated;
        ds.data.push_back(std::move(d));
    }
    return ds;
}

namespace {

void add_dense(ParamStore& ps, const std::string& name, std::size_t out, std::size_t in, RngStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    ps.add(name + ".w", rng_uniform(rng, {out, in}, -bound, bound));
    ps.add(name + ".b", Tensor({out}));
}

Variable apply_dense(const BoundParams& p, const std::string& name, const Variable& x, Activation act) {
    return ad::dense(x, p(name + ".w"), p(name + ".b"), act);
}

Variable zeros_on(ad::Tape& tape, std::size_t n) { return tape.constant(Tensor({n})); }

Variable row_constant(ad::Tape& tape, const Tensor& x, std::size_t t) {
    const std::size_t n = x.shape()[1];
    std::vector<double> row(x.data().begin() + static_cast<std::ptrdiff_t>(t * n),
                            x.data().begin() + static_cast<std::ptrdiff_t>((t + 1) * n));
    return tape.constant(Tensor::vector(std::move(row)));
}

Variable reconstruction_term(const Architecture& a, const Variable& x_hat, const Tensor& x) {
    return a.reconstruction == Reconstruction::sum ? ad::sse(x_hat, x) : ad::mse(x_hat, x);
}

Variable accumulate(const Variable& acc, const Variable& term) { return acc.valid() ? ad::add(acc, term) : term; }

Tensor standard_normal(RngStream& rng, std::size_t n) { return rng_normal(rng, {n}); }

std::unique_ptr<GenerativeModel> build(const Architecture& arch, ParamStore params) {
    if (arch.kind == ModelKind::svae) return std::make_unique<SplitVae>(arch, std::move(params));
    return std::make_unique<RecurrentVae>(arch, std::move(params));
}

ParamStore init_for(const Architecture& arch, RngStream& rng) {
    return arch.kind == ModelKind::svae ? SplitVae::init_params(arch, rng) : RecurrentVae::init_params(arch, rng);
}

}  // namespace

std::unique_ptr<GenerativeModel> GenerativeModel::create(const Architecture& arch, std::uint64_t init_seed) {
    arch.validate();
    RngStream rng(init_seed, 0x1a17);
    return build(arch, init_for(arch, rng));
}

std::unique_ptr<GenerativeModel> GenerativeModel::from_params(const Architecture& arch, ParamStore params) {
    arch.validate();
    RngStream rng(0);
    const ParamStore expected = init_for(arch, rng);
    if (expected.size() != params.size()) {
        throw std::invalid_argument("expected " + std::to_string(expected.size()) + " parameter tensors for " +
                                    to_string(arch.kind) + ", got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const std::string& name = expected.name(i);
        if (!params.contains(name)) throw std::invalid_argument("missing parameter '" + name + "'");
        if (params.at(name).shape() != expected[i].shape()) {
            throw std::invalid_argument("parameter '" + name + "' has shape " + to_string(params.at(name).shape()) +
                                        ", expected " + to_string(expected[i].shape()));
        }
    }
    return build(arch, std::move(params));
}

// ---------------------------------------------------------------------------
// VRNN / S-VRNN

RecurrentVae::RecurrentVae(Architecture arch, ParamStore params) : GenerativeModel(std::move(arch), std::move(params)) {
    if (arch_.kind == ModelKind::svae) throw std::invalid_argument("RecurrentVae cannot host an S-VAE");
}

ParamStore RecurrentVae::init_params(const Architecture& a, RngStream& rng) {
    ParamStore ps;
    const std::size_t ng = a.grid_size(), H = a.hidden_dim, L = a.latent_dim, S = a.subspaces();
    std::size_t in = ng + H;
    for (std::size_t i = 0; i < a.encoder_hidden.size(); ++i) {
        add_dense(ps, "enc." + std::to_string(i), a.encoder_hidden[i], in, rng);
        in = a.encoder_hidden[i];
    }
    for (std::size_t s = 1; s <= S; ++s) add_dense(ps, "enc.head" + std::to_string(s), 2 * L, in, rng);
    in = S * L + H;
    for (std::size_t i = 0; i < a.decoder_hidden.size(); ++i) {
        add_dense(ps, "dec." + std::to_string(i), a.decoder_hidden[i], in, rng);
        in = a.decoder_hidden[i];
    }
    add_dense(ps, "dec.out", ng, in, rng);
    add_dense(ps, "rec", H, H + ng + S * L, rng);
    ps.add("rec.ln.gain", Tensor({H}, 1.0));
    ps.add("rec.ln.bias", Tensor({H}));
    return ps;
}

std::vector<GaussianLatent> RecurrentVae::encode_step(const BoundParams& p, const Variable& x_t,
                                                      const Variable& h_prev) const {
    if (x_t.value().size() != arch_.grid_size() || h_prev.value().size() != arch_.hidden_dim) {
        throw ShapeError("encode_step expects x of length " + std::to_string(arch_.grid_size()) + " and h of length " +
                         std::to_string(arch_.hidden_dim) + ", got " + to_string(x_t.shape()) + " and " +
                         to_string(h_prev.shape()));
    }
    Variable a = ad::concat({x_t, h_prev});
    for (std::size_t i = 0; i < arch_.encoder_hidden.size(); ++i) {
        a = apply_dense(p, "enc." + std::to_string(i), a, Activation::tanh);
    }
    const std::size_t L = arch_.latent_dim;
    std::vector<GaussianLatent> out;
    for (std::size_t s = 1; s <= arch_.subspaces(); ++s) {
        const Variable head = apply_dense(p, "enc.head" + std::to_string(s), a, Activation::none);
        out.push_back({ad::slice(head, 0, L), ad::slice(head, L, L)});
    }
    return out;
}

Variable RecurrentVae::decode_step(const BoundParams& p, const std::vector<Variable>& z_t,
                                   const Variable& h_prev) const {
    if (z_t.size() != arch_.subspaces()) throw ShapeError("decode_step: wrong number of latent subspaces");
    std::vector<Variable> parts = z_t;
    parts.push_back(h_prev);
    Variable a = ad::concat(parts);
    for (std::size_t i = 0; i < arch_.decoder_hidden.size(); ++i) {
        a = apply_dense(p, "dec." + std::to_string(i), a, Activation::tanh);
    }
    return apply_dense(p, "dec.out", a, Activation::none);
}

Variable RecurrentVae::recur(const BoundParams& p, const Variable& h_prev, const Variable& x_t,
                             const std::vector<Variable>& z_t) const {
    std::vector<Variable> parts{h_prev, x_t};
    parts.insert(parts.end(), z_t.begin(), z_t.end());
    const Variable pre = apply_dense(p, "rec", ad::concat(parts), Activation::tanh);
    return ad::layer_norm(pre, p("rec.ln.gain"), p("rec.ln.bias"), arch_.layer_norm_eps);
}

LatentNoise RecurrentVae::draw_noise(RngStream& rng) const {
    LatentNoise n;
    for (std::size_t t = 0; t < arch_.horizon; ++t) {
        n.primary.push_back(standard_normal(rng, arch_.latent_dim));
        if (arch_.subspaces() == 2) n.shared.push_back(standard_normal(rng, arch_.latent_dim));
    }
    return n;
}

LossTerms RecurrentVae::loss(const BoundParams& p, const Tensor& x, bool is_support, const LatentNoise& noise) const {
    if (x.rank() != 2 || x.shape()[0] != arch_.horizon || x.shape()[1] != arch_.grid_size()) {
        throw GeometryError("datum shape " + to_string(x.shape()) + " does not match sequence length " +
                            std::to_string(arch_.horizon) + " and grid size " + std::to_string(arch_.grid_size()));
    }
    const bool split = arch_.subspaces() == 2;
    if (noise.primary.size() != arch_.horizon || (split && noise.shared.size() != arch_.horizon)) {
        throw ShapeError("latent noise must supply one draw per time step");
    }
    // The VRNN has no indicator: its single KL term is always active.
    const bool primary_active = !split || is_support;
    ad::Tape& tape = p.tape();
    Variable h = zeros_on(tape, arch_.hidden_dim);
    Variable recon, kl1, kl2;
    for (std::size_t t = 0; t < arch_.horizon; ++t) {
        const Variable x_t = row_constant(tape, x, t);
        const auto q = encode_step(p, x_t, h);
        std::vector<Variable> z{ad::reparameterize(q[0], noise.primary[t])};
        if (split) z.push_back(ad::reparameterize(q[1], noise.shared[t]));
        const Variable x_hat = decode_step(p, z, h);
        recon = accumulate(recon, reconstruction_term(arch_, x_hat, x_t.value()));
        if (primary_active) kl1 = accumulate(kl1, ad::kl_to_standard_normal(q[0]));
        if (split) kl2 = accumulate(kl2, ad::kl_to_standard_normal(q[1]));
        h = recur(p, h, x_t, z);
    }
    if (!kl1.valid()) kl1 = tape.constant(Tensor::scalar(0.0));
    if (!kl2.valid()) kl2 = tape.constant(Tensor::scalar(0.0));
    const Variable total = ad::add(ad::add(recon, kl1), kl2);
    return {recon, kl1, kl2, total};
}

Tensor RecurrentVae::sample(RngStream& rng) const {
    ad::Tape tape;
    BoundParams p(tape, params_);
    Variable h = zeros_on(tape, arch_.hidden_dim);
    const std::size_t ng = arch_.grid_size();
    Tensor out({arch_.horizon, ng});
    for (std::size_t t = 0; t < arch_.horizon; ++t) {
        std::vector<Variable> z;
        for (std::size_t s = 0; s < arch_.subspaces(); ++s) {
            z.push_back(tape.constant(standard_normal(rng, arch_.latent_dim)));
        }
        const Variable x_hat = decode_step(p, z, h);
        std::copy(x_hat.value().data().begin(), x_hat.value().data().end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(t * ng));
        h = recur(p, h, x_hat, z);
    }
    return out;
}

std::vector<LayerShape> RecurrentVae::shape_audit() const {
    std::vector<LayerShape> rows;
    const std::size_t H = arch_.hidden_dim, S = arch_.subspaces();
    const Tensor& w0 = params_.at("enc.0.w");
    rows.push_back({"encoder", "input", {w0.shape()[1] - H}});
    for (std::size_t i = 0; i < arch_.encoder_hidden.size(); ++i) {
        rows.push_back({"encoder", "H" + std::to_string(i + 1),
                        {params_.at("enc." + std::to_string(i) + ".w").shape()[0]}});
    }
    Shape enc_out;
    for (std::size_t s = 1; s <= S; ++s) enc_out.push_back(params_.at("enc.head" + std::to_string(s) + ".w").shape()[0] / 2);
    rows.push_back({"encoder", "output", enc_out});

    const std::size_t dec_in = params_.at("dec.0.w").shape()[1] - H;
    rows.push_back({"decoder", "input", Shape(S, dec_in / S)});
    for (std::size_t i = 0; i < arch_.decoder_hidden.size(); ++i) {
        rows.push_back({"decoder", "H" + std::to_string(i + 1),
                        {params_.at("dec." + std::to_string(i) + ".w").shape()[0]}});
    }
    rows.push_back({"decoder", "output", {params_.at("dec.out.w").shape()[0]}});
    rows.push_back({"recurrence", "state", {params_.at("rec.w").shape()[0]}});
    return rows;
}

// ---------------------------------------------------------------------------
// S-VAE

SplitVae::SplitVae(Architecture arch, ParamStore params) : GenerativeModel(std::move(arch), std::move(params)) {
    if (arch_.kind != ModelKind::svae) throw std::invalid_argument("SplitVae hosts only the S-VAE");
}

std::vector<std::size_t> SplitVae::encoder_extents(const Architecture& a) {
    std::vector<std::size_t> ext{a.grid_side};
    for (std::size_t i = 0; i < a.conv_channels.size(); ++i) {
        ext.push_back(ad::conv_output_extent(ext.back(), encoder_geometry));
    }
    return ext;
}

ParamStore SplitVae::init_params(const Architecture& a, RngStream& rng) {
    ParamStore ps;
    const std::size_t k = encoder_geometry.kernel, L = a.latent_dim;
    const auto ext = encoder_extents(a);
    std::size_t cin = a.horizon;
    for (std::size_t i = 0; i < a.conv_channels.size(); ++i) {
        const std::size_t cout = a.conv_channels[i];
        const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
        const std::string name = "enc.conv" + std::to_string(i + 1);
        ps.add(name + ".k", rng_uniform(rng, {cout, cin, k, k}, -bound, bound));
        ps.add(name + ".b", Tensor({cout}));
        cin = cout;
    }
    const std::size_t flat = cin * ext.back() * ext.back();
    add_dense(ps, "enc.fc", 4 * L, flat, rng);
    add_dense(ps, "dec.fc", flat, 2 * L, rng);
    for (std::size_t i = a.conv_channels.size(); i-- > 0;) {
        const std::size_t cout = i == 0 ? a.horizon : a.conv_channels[i - 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
        const std::string name = "dec.deconv" + std::to_string(a.conv_channels.size() - i);
        ps.add(name + ".k", rng_uniform(rng, {cin, cout, k, k}, -bound, bound));
        ps.add(name + ".b", Tensor({cout}));
        cin = cout;
    }
    return ps;
}

std::pair<GaussianLatent, GaussianLatent> SplitVae::encode(const BoundParams& p, const Variable& x,
                                                           std::vector<LayerShape>* trace) const {
    const Shape want{arch_.horizon, arch_.grid_side, arch_.grid_side};
    if (x.shape() != want) {
        throw GeometryError("S-VAE input " + to_string(x.shape()) + " does not match " + to_string(want));
    }
    if (trace) trace->push_back({"encoder", "input", x.shape()});
    Variable a = x;
    for (std::size_t i = 0; i < arch_.conv_channels.size(); ++i) {
        const std::string name = "enc.conv" + std::to_string(i + 1);
        a = ad::relu(ad::channel_bias(ad::conv2d(a, p(name + ".k"), encoder_geometry), p(name + ".b")));
        if (trace) trace->push_back({"encoder", "conv" + std::to_string(i + 1), a.shape()});
    }
    a = ad::reshape(a, {a.value().size()});
    const Variable out = apply_dense(p, "enc.fc", a, Activation::none);
    const std::size_t L = arch_.latent_dim;
    if (trace) trace->push_back({"encoder", "fc", {2 * L}});
    return {GaussianLatent{ad::slice(out, 0, L), ad::slice(out, 2 * L, L)},
            GaussianLatent{ad::slice(out, L, L), ad::slice(out, 3 * L, L)}};
}

Variable SplitVae::decode(const BoundParams& p, const Variable& z1, const Variable& z2,
                          std::vector<LayerShape>* trace) const {
    if (z1.value().size() != arch_.latent_dim || z2.value().size() != arch_.latent_dim) {
        throw ShapeError("S-VAE decoder expects two latents of size " + std::to_string(arch_.latent_dim) +
                         ", got " + to_string(z1.shape()) + " and " + to_string(z2.shape()));
    }
    const auto ext = encoder_extents(arch_);
    const std::size_t c_last = arch_.conv_channels.back();
    Variable a = apply_dense(p, "dec.fc", ad::concat({z1, z2}), Activation::relu);
    a = ad::reshape(a, {c_last, ext.back(), ext.back()});
    if (trace) trace->push_back({"decoder", "fc", a.shape()});
    const std::size_t n = arch_.conv_channels.size();
    for (std::size_t i = 1; i <= n; ++i) {
        const std::string name = "dec.deconv" + std::to_string(i);
        a = ad::channel_bias(ad::conv_transpose2d(a, p(name + ".k"), decoder_geometry), p(name + ".b"));
        if (i < n) {
            a = ad::relu(a);
        } else {
            // Stride-2 doubling overshoots the grid; keep the centered window.
            a = ad::center_crop(a, arch_.grid_side, arch_.grid_side);
        }
        if (trace) trace->push_back({"decoder", "deconv" + std::to_string(i), a.shape()});
    }
    return a;
}

LatentNoise SplitVae::draw_noise(RngStream& rng) const {
    LatentNoise n;
    n.primary.push_back(standard_normal(rng, arch_.latent_dim));
    n.shared.push_back(standard_normal(rng, arch_.latent_dim));
    return n;
}

LossTerms SplitVae::loss(const BoundParams& p, const Tensor& x, bool is_support, const LatentNoise& noise) const {
    if (x.rank() != 2 || x.shape()[0] != arch_.horizon || x.shape()[1] != arch_.grid_size()) {
        throw GeometryError("datum shape " + to_string(x.shape()) + " does not match S-VAE geometry (" +
                            std::to_string(arch_.horizon) + "," + std::to_string(arch_.grid_size()) + ")");
    }
    if (noise.primary.size() != 1 || noise.shared.size() != 1) throw ShapeError("S-VAE needs one draw per subspace");
    ad::Tape& tape = p.tape();
    const Variable xin = tape.constant(x.reshaped({arch_.horizon, arch_.grid_side, arch_.grid_side}));
    const auto [q1, q2] = encode(p, xin);
    const Variable z1 = ad::reparameterize(q1, noise.primary[0]);
    const Variable z2 = ad::reparameterize(q2, noise.shared[0]);
    const Variable x_hat = decode(p, z1, z2);
    const Variable recon = reconstruction_term(arch_, x_hat, xin.value());
    const Variable kl1 = is_support ? ad::kl_to_standard_normal(q1) : tape.constant(Tensor::scalar(0.0));
    const Variable kl2 = ad::kl_to_standard_normal(q2);
    return {recon, kl1, kl2, ad::add(ad::add(recon, kl1), kl2)};
}

Tensor SplitVae::sample(RngStream& rng) const {
    ad::Tape tape;
    BoundParams p(tape, params_);
    const Variable z1 = tape.constant(standard_normal(rng, arch_.latent_dim));
    const Variable z2 = tape.constant(standard_normal(rng, arch_.latent_dim));
    return decode(p, z1, z2).value().reshaped({arch_.horizon, arch_.grid_size()});
}

std::vector<LayerShape> SplitVae::shape_audit() const {
    ad::Tape tape;
    BoundParams p(tape, params_);
    std::vector<LayerShape> trace;
    const Variable x = tape.constant(Tensor({arch_.horizon, arch_.grid_side, arch_.grid_side}));
    const auto [q1, q2] = encode(p, x, &trace);
    decode(p, q1.mu, q2.mu, &trace);
    return trace;
}

}  // namespace svrnn
