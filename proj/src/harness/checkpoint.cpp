#include "alora/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "alora/format.hpp"

namespace alora {

const Matrix& Checkpoint::matrix(std::string_view name) const {
    for (const auto& m : matrices)
        if (m.name == name) return m.value;
    throw std::invalid_argument("checkpoint has no matrix '" + std::string(name) + "'");
}

bool Checkpoint::has_matrix(std::string_view name) const {
    return std::any_of(matrices.begin(), matrices.end(), [&](const NamedMatrix& m) { return m.name == name; });
}

bool Checkpoint::has_integer(std::string_view name) const {
    return std::any_of(integers.begin(), integers.end(), [&](const NamedInteger& i) { return i.name == name; });
}

std::uint64_t Checkpoint::integer(std::string_view name) const {
    for (const auto& i : integers)
        if (i.name == name) return i.value;
    throw std::invalid_argument("checkpoint has no integer '" + std::string(name) + "'");
}

CheckpointError::CheckpointError(const std::string& what, std::uint64_t offset)
    : std::runtime_error("checkpoint: " + what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

namespace {

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
    }
    void u64(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void text(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }
    std::vector<unsigned char> out;
};

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    void need(std::uint64_t n, const char* what) const {
        if (n > bytes_.size() - pos_)
            throw CheckpointError(std::string("truncated file while reading ") + what, pos_);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_ + k]) << (8 * k);
        pos_ += 8;
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::string text(const char* what) {
        const std::uint32_t n = u32(what);
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

std::uint64_t checksum(std::span<const unsigned char> bytes) {
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.out.insert(w.out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    w.u32(kCheckpointVersion);
    w.text(ckpt.tag);
    w.u64(ckpt.index);
    w.u64(ckpt.rng.seed);
    w.u64(ckpt.rng.draws);
    w.u64(ckpt.integers.size());
    for (const auto& i : ckpt.integers) {
        w.text(i.name);
        w.u64(i.value);
    }
    w.u64(ckpt.matrices.size());
    for (const auto& m : ckpt.matrices) {
        w.text(m.name);
        w.u64(m.value.rows());
        w.u64(m.value.cols());
        for (double v : m.value.data()) w.f64(v);
    }
    w.u64(checksum(w.out));
    return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
    Reader r(bytes);
    r.need(8, "magic");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw CheckpointError("bad magic (not a checkpoint)", 0);
    (void)r.u64("magic");
    const std::size_t version_at = r.pos();
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported format version " + std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointVersion) + ")",
                              version_at);

    Checkpoint ckpt;
    ckpt.tag = r.text("tag");
    ckpt.index = r.u64("index");
    ckpt.rng.seed = r.u64("rng seed");
    ckpt.rng.draws = r.u64("rng draws");
    const std::uint64_t n_int = r.u64("integer count");
    for (std::uint64_t k = 0; k < n_int; ++k) {
        NamedInteger i;
        i.name = r.text("integer name");
        i.value = r.u64("integer value");
        ckpt.integers.push_back(std::move(i));
    }
    const std::uint64_t n_mat = r.u64("matrix count");
    for (std::uint64_t k = 0; k < n_mat; ++k) {
        NamedMatrix m;
        m.name = r.text("matrix name");
        const std::size_t dims_at = r.pos();
        const std::uint64_t rows = r.u64("matrix rows");
        const std::uint64_t cols = r.u64("matrix cols");
        if (cols != 0 && rows > r.remaining() / 8 / cols)
            throw CheckpointError("truncated file while reading values of matrix '" + m.name + "'", dims_at);
        std::vector<double> values(rows * cols);
        for (double& v : values) v = r.f64("matrix values");
        m.value = Matrix(rows, cols, std::move(values));
        ckpt.matrices.push_back(std::move(m));
    }
    const std::size_t body_end = r.pos();
    const std::uint64_t stored = r.u64("checksum");
    if (stored != checksum(bytes.first(body_end))) throw CheckpointError("checksum mismatch (corrupt file)", body_end);
    if (r.remaining() != 0) throw CheckpointError("unexpected trailing bytes", r.pos());
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(ckpt);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint '" + path.string() + "'");
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

namespace {

Matrix scalar(double v) { return Matrix(1, 1, {v}); }

Matrix row_of(const std::vector<double>& v) { return Matrix(1, v.size(), v); }

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
    if (m.rows() != rows || m.cols() != cols)
        throw std::invalid_argument("checkpoint matrix '" + name + "' is " + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
}

void pack_optimizer(Checkpoint& c, const OptimizerState& opt, const std::string& prefix) {
    c.integers.push_back({prefix + "opt.step", opt.step});
    c.integers.push_back({prefix + "opt.moments", opt.first.size()});
    for (std::size_t k = 0; k < opt.first.size(); ++k) {
        c.matrices.push_back({prefix + "opt.first." + std::to_string(k), opt.first[k]});
        c.matrices.push_back({prefix + "opt.second." + std::to_string(k), opt.second[k]});
    }
}

OptimizerState unpack_optimizer(const Checkpoint& c, const std::string& prefix) {
    OptimizerState opt;
    opt.step = c.integer(prefix + "opt.step");
    const std::uint64_t n = c.integer(prefix + "opt.moments");
    for (std::uint64_t k = 0; k < n; ++k) {
        opt.first.push_back(c.matrix(prefix + "opt.first." + std::to_string(k)));
        opt.second.push_back(c.matrix(prefix + "opt.second." + std::to_string(k)));
    }
    return opt;
}

}  // namespace

Checkpoint pack_session(const AdapterState& state, const SessionProgress& progress) {
    Checkpoint c;
    c.tag = std::string(to_string(state.config.scheme));
    c.index = progress.epochs_done;
    c.rng = progress.rng;
    const AdapterConfig& cfg = state.config;
    c.integers = {{"d_in", cfg.d_in},
                  {"d_out", cfg.d_out},
                  {"rank", cfg.rank},
                  {"experts", cfg.experts},
                  {"epochs_done", progress.epochs_done},
                  {"steps_done", progress.steps_done}};
    c.matrices.push_back({"scaling", scalar(cfg.scaling)});
    for (std::size_t k = 0; k < state.a.size(); ++k) c.matrices.push_back({"a." + std::to_string(k), state.a[k]});
    for (std::size_t k = 0; k < state.b.size(); ++k) c.matrices.push_back({"b." + std::to_string(k), state.b[k]});
    if (is_routed(cfg.scheme)) c.matrices.push_back({"router", state.router});
    c.matrices.push_back({"loss_curve", row_of(progress.loss_curve)});
    pack_optimizer(c, progress.optimizer, "");
    return c;
}

SessionSnapshot unpack_session(const Checkpoint& c) {
    SessionSnapshot s;
    AdapterConfig& cfg = s.state.config;
    cfg.scheme = parse_scheme(c.tag);
    cfg.d_in = c.integer("d_in");
    cfg.d_out = c.integer("d_out");
    cfg.rank = c.integer("rank");
    cfg.experts = c.integer("experts");
    cfg.scaling = c.matrix("scaling")(0, 0);
    validate(cfg);

    const std::size_t n_a = cfg.scheme == Scheme::ALoRA ? cfg.experts : 1;
    const std::size_t n_b = cfg.scheme == Scheme::SharingA ? cfg.experts : 1;
    for (std::size_t k = 0; k < n_a; ++k) {
        const std::string name = "a." + std::to_string(k);
        s.state.a.push_back(c.matrix(name));
        expect_shape(s.state.a.back(), cfg.rank, cfg.d_in, name);
    }
    for (std::size_t k = 0; k < n_b; ++k) {
        const std::string name = "b." + std::to_string(k);
        s.state.b.push_back(c.matrix(name));
        expect_shape(s.state.b.back(), cfg.d_out, cfg.rank, name);
    }
    if (is_routed(cfg.scheme)) {
        s.state.router = c.matrix("router");
        expect_shape(s.state.router, cfg.experts, cfg.d_in, "router");
    }
    s.progress.rng = c.rng;
    s.progress.epochs_done = c.integer("epochs_done");
    s.progress.steps_done = c.integer("steps_done");
    const auto curve = c.matrix("loss_curve").data();
    s.progress.loss_curve.assign(curve.begin(), curve.end());
    s.progress.optimizer = unpack_optimizer(c, "");
    return s;
}

Checkpoint pack_federation(const Federation& fed, std::span<const Matrix> history) {
    const FedConfig& cfg = fed.config();
    Checkpoint c;
    c.tag = "fed:" + std::string(to_string(cfg.strategy));
    c.index = fed.server().round;
    c.rng = RngCursor{cfg.seed, 0};
    c.integers.push_back({"n_clients", fed.clients().size()});
    for (std::size_t i = 0; i < fed.clients().size(); ++i) {
        const FedClient& fc = fed.clients()[i];
        const std::string p = "client." + std::to_string(i) + ".";
        c.integers.push_back({p + "kind", fc.model.index()});
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, LoraClient>) {
                    c.matrices.push_back({p + "a", m.adapter.a[0]});
                    c.matrices.push_back({p + "b", m.adapter.b[0]});
                    c.matrices.push_back({p + "frozen", m.frozen_delta});
                } else if constexpr (std::is_same_v<T, HeteroBClient>) {
                    c.matrices.push_back({p + "a", m.a});
                    c.matrices.push_back({p + "m", m.m});
                    c.matrices.push_back({p + "b1", m.b1});
                    c.matrices.push_back({p + "b2", m.b2});
                    c.matrices.push_back({p + "b0", m.b0});
                } else {
                    c.matrices.push_back({p + "b", m.b});
                    c.matrices.push_back({p + "m", m.m});
                    c.matrices.push_back({p + "a1", m.a1});
                    c.matrices.push_back({p + "a2", m.a2});
                    c.matrices.push_back({p + "a0", m.a0});
                }
            },
            fc.model);
        c.matrices.push_back({p + "inbox", fc.inbox});
        c.matrices.push_back({p + "last_loss", scalar(fc.last_loss)});
    }
    c.integers.push_back({"server.globals", fed.server().global.size()});
    for (std::size_t k = 0; k < fed.server().global.size(); ++k)
        c.matrices.push_back({"server.global." + std::to_string(k), fed.server().global[k]});

    const auto& rounds = fed.ledger().rounds;
    const std::size_t n = fed.clients().size();
    Matrix up(rounds.size(), n), down(rounds.size(), n);
    for (std::size_t t = 0; t < rounds.size(); ++t)
        for (std::size_t i = 0; i < n; ++i) {
            up(t, i) = static_cast<double>(rounds[t].upload[i]);
            down(t, i) = static_cast<double>(rounds[t].download[i]);
        }
    c.matrices.push_back({"ledger.upload", std::move(up)});
    c.matrices.push_back({"ledger.download", std::move(down)});
    c.integers.push_back({"history.count", history.size()});
    for (std::size_t k = 0; k < history.size(); ++k)
        c.matrices.push_back({"history." + std::to_string(k), history[k]});
    return c;
}

FederationSnapshot unpack_federation(const Checkpoint& c, const FedConfig& cfg) {
    const std::string expected = "fed:" + std::string(to_string(cfg.strategy));
    if (c.tag != expected)
        throw std::invalid_argument("checkpoint tag '" + c.tag + "' does not match strategy tag '" + expected + "'");
    const std::uint64_t n = c.integer("n_clients");
    if (n != cfg.n_clients)
        throw std::invalid_argument("checkpoint holds " + std::to_string(n) + " clients, config has " +
                                    std::to_string(cfg.n_clients));
    FederationSnapshot s;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string p = "client." + std::to_string(i) + ".";
        FedClient fc;
        switch (c.integer(p + "kind")) {
            case 0: {
                LoraClient lc;
                const Matrix& a = c.matrix(p + "a");
                const Matrix& b = c.matrix(p + "b");
                lc.adapter.config = AdapterConfig{a.cols(), b.rows(), a.rows(), 1, Scheme::Vanilla, cfg.scaling};
                lc.adapter.a = {a};
                lc.adapter.b = {b};
                lc.frozen_delta = c.matrix(p + "frozen");
                fc.model = std::move(lc);
                break;
            }
            case 1:
                fc.model = HeteroBClient{c.matrix(p + "a"),  c.matrix(p + "m"),  c.matrix(p + "b1"),
                                         c.matrix(p + "b2"), c.matrix(p + "b0"), cfg.scaling};
                break;
            case 2:
                fc.model = HeteroAClient{c.matrix(p + "b"),  c.matrix(p + "m"),  c.matrix(p + "a1"),
                                         c.matrix(p + "a2"), c.matrix(p + "a0"), cfg.scaling};
                break;
            default: throw std::invalid_argument("checkpoint: unknown client model kind for client " + std::to_string(i));
        }
        fc.inbox = c.matrix(p + "inbox");
        fc.last_loss = c.matrix(p + "last_loss")(0, 0);
        s.clients.push_back(std::move(fc));
    }
    s.server.round = c.index;
    const std::uint64_t globals = c.integer("server.globals");
    for (std::uint64_t k = 0; k < globals; ++k) s.server.global.push_back(c.matrix("server.global." + std::to_string(k)));

    const Matrix& up = c.matrix("ledger.upload");
    const Matrix& down = c.matrix("ledger.download");
    for (std::size_t t = 0; t < up.rows(); ++t) {
        LedgerEntry e{t + 1, std::vector<std::uint64_t>(n), std::vector<std::uint64_t>(n)};
        for (std::size_t i = 0; i < n; ++i) {
            e.upload[i] = static_cast<std::uint64_t>(up(t, i));
            e.download[i] = static_cast<std::uint64_t>(down(t, i));
        }
        s.ledger.rounds.push_back(std::move(e));
    }
    const std::uint64_t hist = c.integer("history.count");
    for (std::uint64_t k = 0; k < hist; ++k) s.history.push_back(c.matrix("history." + std::to_string(k)));
    return s;
}

}  // namespace alora
