#include "svrnn/persistence.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace svrnn {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

constexpr char kDatasetMagic[4] = {'S', 'V', 'T', 'F'};
constexpr char kCheckpointMagic[4] = {'S', 'V', 'C', 'K'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { le(v); }
    void u32(std::uint64_t v, const char* what) {
        if (v > 0xffffffffull) throw std::invalid_argument(std::string(what) + " does not fit in 32 bits");
        le(static_cast<std::uint32_t>(v));
    }
    void u64(std::uint64_t v) { le(v); }
    void f32(double v) { le(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t>& buffer() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> in, const char* what) : in_(in), what_(what) {}

    void need(std::size_t n) const {
        if (remaining() < n) {
            throw TruncationError(std::string(what_) + " truncated: needed " + std::to_string(n) + " bytes at offset " +
                                  std::to_string(pos_) + ", " + std::to_string(remaining()) + " left");
        }
    }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename U>
    U le() {
        auto b = bytes(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
        return v;
    }
    std::uint8_t u8() { return le<std::uint8_t>(); }
    std::uint16_t u16() { return le<std::uint16_t>(); }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t remaining() const { return in_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
    const char* what_;
};

void check_magic(Reader& r, const char (&magic)[4], const char* what) {
    auto m = r.bytes(4);
    if (std::memcmp(m.data(), magic, 4) != 0) {
        std::string got;
        for (auto c : m) got += (c >= 32 && c < 127) ? static_cast<char>(c) : '?';
        throw FormatError(std::string(what) + ": expected magic \"" + std::string(magic, 4) + "\", found \"" + got +
                          "\"");
    }
}

void check_version(std::uint16_t got, std::uint16_t want, const char* what) {
    if (got != want) {
        throw VersionError(std::string(what) + ": unsupported format version " + std::to_string(got) + " (expected " +
                           std::to_string(want) + ")");
    }
}

std::string origin_key(std::size_t i, const char* field) { return "origin." + std::to_string(i) + "." + field; }

std::string encode_metadata(const Dataset& ds) {
    std::map<std::string, std::string> meta = ds.metadata;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& o = ds.data[i].origin;
        if (!o) continue;
        std::vector<double> centers;
        for (const Point& p : o->basis.centers) {
            centers.push_back(p.x);
            centers.push_back(p.y);
        }
        meta[origin_key(i, "centers")] = format_reals(centers);
        meta[origin_key(i, "widths")] = format_reals(o->basis.widths);
        meta[origin_key(i, "theta0")] = format_reals(o->theta0.data());
    }
    std::string text;
    for (const auto& [k, v] : meta) {
        if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw std::invalid_argument("metadata entry '" + k + "' cannot be stored");
        }
        text += k + "=" + v + "\n";
    }
    return text;
}

void decode_metadata(const std::string& text, Dataset& ds) {
    std::istringstream in(text);
    std::string line;
    std::map<std::size_t, std::map<std::string, std::string>> origins;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) throw FormatError("malformed metadata line '" + line + "'");
        std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key.rfind("origin.", 0) == 0) {
            const auto dot = key.find('.', 7);
            if (dot == std::string::npos) throw FormatError("malformed origin key '" + key + "'");
            std::size_t idx = 0;
            try {
                idx = std::stoull(key.substr(7, dot - 7));
            } catch (const std::exception&) {
                throw FormatError("malformed origin key '" + key + "'");
            }
            origins[idx][key.substr(dot + 1)] = value;
        } else {
            ds.metadata[key] = value;
        }
    }
    for (auto& [idx, fields] : origins) {
        if (idx >= ds.size()) {
            throw CountMismatchError("origin recorded for datum " + std::to_string(idx) + " of " +
                                     std::to_string(ds.size()));
        }
        try {
            DatumOrigin o;
            const auto c = parse_reals(fields.at("centers"));
            if (c.size() % 2 != 0) throw FormatError("odd number of center coordinates");
            for (std::size_t j = 0; j < c.size(); j += 2) o.basis.centers.push_back({c[j], c[j + 1]});
            o.basis.widths = parse_reals(fields.at("widths"));
            o.theta0 = Tensor::vector(parse_reals(fields.at("theta0")));
            ds.data[idx].origin = std::move(o);
        } catch (const PersistenceError&) {
            throw;
        } catch (const std::exception& e) {
            throw FormatError("origin of datum " + std::to_string(idx) + " is malformed: " + e.what());
        }
    }
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
    ds.validate();
    Writer w;
    w.bytes(kDatasetMagic, 4);
    w.u16(kDatasetVersion);
    w.u32(ds.size(), "dataset size");
    w.u32(ds.horizon, "horizon");
    w.u32(ds.grid_side, "grid rows");
    w.u32(ds.grid_side, "grid columns");
    std::uint8_t flags = 0;
    if (ds.provenance == Provenance::support) flags |= 1u;
    if (ds.provenance == Provenance::generated) flags |= 2u;
    w.u8(flags);
    const std::string meta = encode_metadata(ds);
    w.u32(meta.size(), "metadata length");
    w.bytes(meta.data(), meta.size());
    for (const auto& d : ds.data) {
        for (double v : d.observations.data()) w.f32(v);
    }
    return std::move(w.buffer());
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "dataset file");
    check_magic(r, kDatasetMagic, "dataset file");
    check_version(r.u16(), kDatasetVersion, "dataset file");
    const std::uint64_t n = r.u32(), T = r.u32(), H = r.u32(), W = r.u32();
    const std::uint8_t flags = r.u8();
    if (H != W) throw FormatError("dataset grid " + std::to_string(H) + "x" + std::to_string(W) + " is not square");
    if (flags > 2) throw FormatError("dataset flags " + std::to_string(flags) + " are invalid");
    const std::uint32_t meta_len = r.u32();
    const auto meta = r.bytes(meta_len);

    const std::uint64_t values = n * T * H * W;
    const std::uint64_t expected = values * 4;
    if (r.remaining() < expected) {
        throw TruncationError("dataset payload truncated: header promises " + std::to_string(values) + " values (" +
                              std::to_string(expected) + " bytes), file holds " + std::to_string(r.remaining()));
    }
    if (r.remaining() > expected) {
        throw CountMismatchError("dataset payload holds " + std::to_string(r.remaining()) + " bytes, header counts give " +
                                 std::to_string(expected));
    }

    Dataset ds;
    ds.grid_side = H;
    ds.horizon = T;
    ds.provenance = flags == 1 ? Provenance::support : flags == 2 ? Provenance::generated : Provenance::real;
    ds.data.resize(n);
    for (auto& d : ds.data) {
        d.provenance = ds.provenance;
        d.observations = Tensor({T, H * W});
        for (double& v : d.observations.data()) v = r.f32();
    }
    decode_metadata(std::string(meta.begin(), meta.end()), ds);
    return ds;
}

void write_dataset(const Dataset& ds, const fs::path& path) { write_file_atomic(path, encode_dataset(ds)); }

Dataset read_dataset(const fs::path& path) { return decode_dataset(read_file(path)); }

std::vector<std::uint8_t> encode_checkpoint(const Architecture& arch, const ParamStore& params) {
    Writer w;
    w.bytes(kCheckpointMagic, 4);
    w.u16(kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(arch.kind));
    const std::string desc = arch.describe();
    w.u32(desc.size(), "architecture descriptor");
    w.bytes(desc.data(), desc.size());
    w.u32(params.size(), "parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params.name(i);
        w.u32(name.size(), "parameter name");
        w.bytes(name.data(), name.size());
        const Tensor& t = params[i];
        w.u32(t.rank(), "rank");
        for (std::size_t e : t.shape()) w.u64(e);
        for (double v : t.data()) w.f64(v);
    }
    const std::uint64_t sum = fnv1a64(w.buffer());
    w.u64(sum);
    return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    // Structure first (truncation), then the checksum, then the contents.
    Reader r(bytes, "checkpoint");
    check_magic(r, kCheckpointMagic, "checkpoint");
    check_version(r.u16(), kCheckpointVersion, "checkpoint");
    const std::uint8_t kind = r.u8();
    const auto desc = r.bytes(r.u32());
    const std::uint32_t count = r.u32();
    std::vector<std::pair<std::string, Tensor>> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_bytes = r.bytes(r.u32());
        std::string name(name_bytes.begin(), name_bytes.end());
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw FormatError("parameter '" + name + "' has implausible rank " + std::to_string(rank));
        Shape shape(rank);
        std::uint64_t size = 1;
        for (auto& e : shape) {
            e = r.u64();
            if (e != 0 && size > r.remaining() / e) throw TruncationError("parameter '" + name + "' exceeds the file");
            size *= e;
        }
        r.need(size * 8);
        Tensor t(shape);
        for (double& v : t.data()) v = r.f64();
        entries.emplace_back(std::move(name), std::move(t));
    }
    const std::size_t body_len = r.position();
    const std::uint64_t stored = r.u64();
    const std::uint64_t actual = fnv1a64(bytes.first(body_len));
    if (stored != actual) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "checkpoint checksum mismatch: stored %016llx, computed %016llx",
                      static_cast<unsigned long long>(stored), static_cast<unsigned long long>(actual));
        throw ChecksumError(buf);
    }
    if (r.remaining() != 0) throw FormatError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");

    Architecture arch;
    try {
        arch = Architecture::parse(std::string(desc.begin(), desc.end()));
    } catch (const std::exception& e) {
        throw FormatError(std::string("checkpoint architecture descriptor is invalid: ") + e.what());
    }
    if (kind != static_cast<std::uint8_t>(arch.kind)) {
        throw FormatError("checkpoint kind tag " + std::to_string(kind) + " disagrees with descriptor kind " +
                          to_string(arch.kind));
    }
    ParamStore params;
    for (auto& [name, t] : entries) {
        if (params.contains(name)) throw FormatError("parameter '" + name + "' appears twice");
        params.add(std::move(name), std::move(t));
    }
    try {
        auto model = GenerativeModel::from_params(arch, std::move(params));
        return {arch, model->params()};
    } catch (const std::invalid_argument& e) {
        throw CountMismatchError(std::string("checkpoint parameters do not match the architecture: ") + e.what());
    }
}

void write_checkpoint(const Architecture& arch, const ParamStore& params, const fs::path& path) {
    write_file_atomic(path, encode_checkpoint(arch, params));
}

void write_checkpoint(const GenerativeModel& model, const fs::path& path) {
    write_checkpoint(model.arch(), model.params(), path);
}

Checkpoint read_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

std::unique_ptr<GenerativeModel> load_model(const fs::path& path) {
    Checkpoint c = read_checkpoint(path);
    return GenerativeModel::from_params(c.arch, std::move(c.params));
}

std::vector<std::uint8_t> encode_field_image(const Datum& datum, std::size_t t, std::size_t grid_side) {
    const Tensor& x = datum.observations;
    if (x.rank() != 2 || x.shape()[1] != grid_side * grid_side) {
        throw GeometryError("datum shape " + to_string(x.shape()) + " does not match a " + std::to_string(grid_side) +
                            "x" + std::to_string(grid_side) + " grid");
    }
    if (t >= x.shape()[0]) {
        throw std::out_of_range("frame " + std::to_string(t) + " outside horizon " + std::to_string(x.shape()[0]));
    }
    double lo = x.data()[0], hi = x.data()[0];
    for (double v : x.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const std::string header = "P5\n" + std::to_string(grid_side) + " " + std::to_string(grid_side) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const std::size_t n = grid_side * grid_side;
    for (std::size_t j = 0; j < n; ++j) {
        const double v = x.data()[t * n + j];
        const double g = hi > lo ? std::round(255.0 * (v - lo) / (hi - lo)) : 128.0;
        out.push_back(static_cast<std::uint8_t>(std::clamp(g, 0.0, 255.0)));
    }
    return out;
}

void export_field_image(const Datum& datum, std::size_t t, std::size_t grid_side, const fs::path& path) {
    write_file_atomic(path, encode_field_image(datum, t, grid_side));
}

std::string history_csv(const std::vector<LossBreakdown>& history) {
    std::string out = "epoch,reconstruction,kl_primary,kl_shared,total\n";
    char buf[160];
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& h = history[i];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", i + 1, h.reconstruction, h.kl_primary,
                      h.kl_shared, h.total);
        out += buf;
    }
    return out;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw IoError("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename onto " + path.string());
    }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read of " + path.string() + " failed");
    return out;
}

}  // namespace svrnn
