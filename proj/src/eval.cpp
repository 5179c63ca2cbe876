#include "svrnn/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace svrnn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_matrix(const Tensor& rows) {
    return Eigen::Map<const RowMatrix>(rows.data().data(), static_cast<Eigen::Index>(rows.shape()[0]),
                                       static_cast<Eigen::Index>(rows.shape()[1]));
}

void require_matrix(const Tensor& rows, const char* what) {
    if (rows.rank() != 2) throw ShapeError(std::string(what) + " expects an N x D matrix, got " + to_string(rows.shape()));
}

// Orthonormalizes v against `basis`; returns false if nothing is left.
bool orthonormalize(Eigen::VectorXd& v, const std::vector<Eigen::VectorXd>& basis) {
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& b : basis) v -= b.dot(v) * b;
    }
    const double n = v.norm();
    if (n < 1e-8) return false;
    v /= n;
    return true;
}

}  // namespace

Tensor flatten(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("cannot flatten an empty dataset");
    data.validate();
    const std::size_t d = data.feature_size();
    Tensor out({data.size(), d});
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto src = data.data[i].observations.data();
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return out;
}

PcaBasis fit_pca(const Tensor& rows, std::size_t k) {
    require_matrix(rows, "fit_pca");
    const std::size_t n = rows.shape()[0], d = rows.shape()[1];
    if (k == 0 || n < k + 1) {
        throw std::invalid_argument("fit_pca: " + std::to_string(k) + " components need at least " +
                                    std::to_string(k + 1) + " samples, got " + std::to_string(n));
    }
    if (k > d) throw std::invalid_argument("fit_pca: more components than dimensions");

    const auto X = as_matrix(rows);
    const Eigen::RowVectorXd mu = X.colwise().mean();
    const RowMatrix Xc = X.rowwise() - mu;
    const Eigen::MatrixXd gram = (Xc * Xc.transpose()) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigen decomposition failed");
    const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
    const double top = std::max(lambda(static_cast<Eigen::Index>(n) - 1), 0.0);

    PcaBasis basis;
    basis.mean = Tensor({d});
    std::copy(mu.data(), mu.data() + d, basis.mean.data().begin());

    std::vector<Eigen::VectorXd> comps;
    for (std::size_t i = 0; i < k; ++i) {
        const auto col = static_cast<Eigen::Index>(n - 1 - i);
        const double l = std::max(lambda(col), 0.0);
        Eigen::VectorXd v;
        bool ok = false;
        if (l > 1e-12 * top && l > 0.0) {
            // Feature-space direction from the Gram eigenvector u: v = Xc^T u / sqrt(N lambda).
            v = Xc.transpose() * eig.eigenvectors().col(col) / std::sqrt(static_cast<double>(n) * l);
            ok = orthonormalize(v, comps);
        }
        // Null directions: complete the basis from coordinate axes.
        for (std::size_t axis = 0; !ok && axis < d; ++axis) {
            v = Eigen::VectorXd::Unit(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(axis));
            ok = orthonormalize(v, comps);
        }
        comps.push_back(v);
        basis.eigenvalues.push_back(l);
        Tensor t({d});
        std::copy(v.data(), v.data() + d, t.data().begin());
        basis.components.push_back(std::move(t));
    }
    return basis;
}

PcaBasis fit_pca(const Dataset& data, std::size_t k) { return fit_pca(flatten(data), k); }

Tensor project(const PcaBasis& basis, const Tensor& rows) {
    require_matrix(rows, "project");
    const std::size_t n = rows.shape()[0], d = rows.shape()[1], k = basis.k();
    if (d != basis.dimension()) {
        throw GeometryError("project: data of dimension " + std::to_string(d) + " onto a basis of dimension " +
                            std::to_string(basis.dimension()));
    }
    Tensor out({n, k});
    const auto src = rows.data();
    const auto mu = basis.mean.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            const auto v = basis.components[c].data();
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += (src[i * d + j] - mu[j]) * v[j];
            out.at(i, c) = s;
        }
    }
    return out;
}

Tensor project(const PcaBasis& basis, const Dataset& data) { return project(basis, flatten(data)); }

double Moments::skew() const {
    if (!skewness) throw ZeroVarianceError("skewness undefined for zero variance");
    return *skewness;
}

double Moments::kurt() const {
    if (!kurtosis) throw ZeroVarianceError("kurtosis undefined for zero variance");
    return *kurtosis;
}

Moments moments(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2) throw std::invalid_argument("moments need at least two samples, got " + std::to_string(n));
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : samples) {
        const double c = x - mean, c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    Moments out;
    out.mean = mean;
    out.variance = m2;
    if (m2 > 0.0) {
        out.skewness = m3 / (m2 * std::sqrt(m2));
        out.kurtosis = m4 / (m2 * m2);
    }
    return out;
}

MomentReport moment_report(const std::string& label, const Tensor& coords) {
    require_matrix(coords, "moment_report");
    const std::size_t n = coords.shape()[0], k = coords.shape()[1];
    MomentReport r{label, {}};
    std::vector<double> column(n);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n; ++i) column[i] = coords.at(i, c);
        r.axes.push_back(moments(column));
    }
    return r;
}

double moment_distance(const MomentReport& generated, const MomentReport& pool) {
    if (generated.axes.size() != pool.axes.size()) throw std::invalid_argument("moment reports differ in axis count");
    double d = 0.0;
    auto term = [](double g, double p) { return std::abs(g - p) / (std::abs(p) + 1.0); };
    for (std::size_t a = 0; a < pool.axes.size(); ++a) {
        const Moments& g = generated.axes[a];
        const Moments& p = pool.axes[a];
        d += term(g.mean, p.mean);
        d += term(g.variance, p.variance);
        d += term(g.skewness.value_or(0.0), p.skewness.value_or(0.0));
        d += term(g.kurtosis.value_or(0.0), p.kurtosis.value_or(0.0));
    }
    return d;
}

SimilarityReport similarity_report(const Dataset& pool, const Dataset& train,
                                   const std::vector<std::pair<std::string, const Dataset*>>& generated,
                                   std::size_t k) {
    require_same_geometry(pool, train);
    for (const auto& [label, ds] : generated) {
        if (!ds) throw std::invalid_argument("null dataset for '" + label + "'");
        require_same_geometry(pool, *ds);
    }
    SimilarityReport rep;
    rep.basis = fit_pca(pool, k);
    rep.rows.push_back(moment_report("Training data pool", project(rep.basis, pool)));
    rep.rows.push_back(moment_report("Training data", project(rep.basis, train)));
    for (const auto& [label, ds] : generated) rep.rows.push_back(moment_report(label, project(rep.basis, *ds)));
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        rep.distances.emplace_back(rep.rows[i].label, moment_distance(rep.rows[i], rep.rows[0]));
    }
    return rep;
}

double SimilarityReport::distance(const std::string& label) const {
    for (const auto& [l, d] : distances) {
        if (l == label) return d;
    }
    throw std::out_of_range("no report row labelled '" + label + "'");
}

namespace {

std::string cell(const std::optional<double>& v, const char* fmt) {
    if (!v) return "undef";
    char buf[48];
    std::snprintf(buf, sizeof buf, fmt, *v);
    return buf;
}

}  // namespace

std::string SimilarityReport::to_text() const {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-24s", "dataset");
    os << buf;
    for (std::size_t a = 1; a <= basis.k(); ++a) {
        for (const char* m : {"mu", "var", "skew", "kurt"}) {
            std::snprintf(buf, sizeof buf, " %12s", (std::string(m) + "_S" + std::to_string(a)).c_str());
            os << buf;
        }
    }
    os << " " << "distance" << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%-24s", rows[r].label.c_str());
        os << buf;
        for (const auto& m : rows[r].axes) {
            for (const auto& s : {cell(m.mean, "%.4g"), cell(m.variance, "%.4g"), cell(m.skewness, "%.3f"),
                                  cell(m.kurtosis, "%.3f")}) {
                std::snprintf(buf, sizeof buf, " %12s", s.c_str());
                os << buf;
            }
        }
        if (r == 0) {
            os << " -";
        } else {
            std::snprintf(buf, sizeof buf, " %.4f", distances[r - 1].second);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::string SimilarityReport::to_csv() const {
    std::ostringstream os;
    os << "dataset";
    for (std::size_t a = 1; a <= basis.k(); ++a) {
        os << ",mean_" << a << ",variance_" << a << ",skewness_" << a << ",kurtosis_" << a;
    }
    os << ",distance\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        os << rows[r].label;
        for (const auto& m : rows[r].axes) {
            os << ',' << cell(m.mean, "%.17g") << ',' << cell(m.variance, "%.17g") << ','
               << cell(m.skewness, "%.17g") << ',' << cell(m.kurtosis, "%.17g");
        }
        os << ',' << (r == 0 ? std::string("0") : cell(distances[r - 1].second, "%.17g")) << '\n';
    }
    return os.str();
}

std::string coordinates_csv(const std::vector<std::pair<std::string, Tensor>>& labelled_coords) {
    std::ostringstream os;
    std::size_t k = 0;
    for (const auto& [label, c] : labelled_coords) {
        require_matrix(c, "coordinates_csv");
        if (k == 0) k = c.shape()[1];
        if (c.shape()[1] != k) throw ShapeError("coordinate blocks differ in component count");
    }
    static const char* names[] = {"x", "y", "z"};
    for (std::size_t c = 0; c < k; ++c) os << (c < 3 ? names[c] : ("c" + std::to_string(c + 1)).c_str()) << ',';
    os << "label\n";
    char buf[40];
    for (const auto& [label, c] : labelled_coords) {
        for (std::size_t i = 0; i < c.shape()[0]; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g,", c.at(i, j));
                os << buf;
            }
            os << label << '\n';
        }
    }
    return os.str();
}

std::vector<double> peak_magnitudes(const Datum& datum) {
    const std::size_t T = datum.horizon(), n = datum.grid_size();
    std::vector<double> out(T, 0.0);
    const auto x = datum.observations.data();
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < n; ++j) out[t] = std::max(out[t], std::abs(x[t * n + j] - 1.0));
    }
    return out;
}

double decay_fraction(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("decay_fraction of an empty dataset");
    if (data.horizon < 2) throw std::invalid_argument("decay_fraction needs at least two time steps");
    std::size_t hits = 0;
    for (const auto& d : data.data) {
        const auto p = peak_magnitudes(d);
        if (p.back() < p.front()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace svrnn
