#include "alora/fed.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "alora/parallel.hpp"

namespace alora {

void validate(const FedConfig& cfg) {
    if (cfg.n_clients == 0) throw std::invalid_argument("fed: n_clients must be >= 1");
    if (cfg.rounds == 0) throw std::invalid_argument("fed: rounds must be >= 1");
    if (cfg.local_epochs == 0) throw std::invalid_argument("fed: local_epochs must be >= 1");
    if (cfg.ranks.size() != cfg.n_clients)
        throw std::invalid_argument("fed: ranks lists " + std::to_string(cfg.ranks.size()) + " entries but n_clients is " +
                                    std::to_string(cfg.n_clients));
    if (std::any_of(cfg.ranks.begin(), cfg.ranks.end(), [](std::size_t r) { return r == 0; }))
        throw std::invalid_argument("fed: every rank must be >= 1");
    if (requires_uniform_ranks(cfg.strategy) &&
        std::any_of(cfg.ranks.begin(), cfg.ranks.end(), [&](std::size_t r) { return r != cfg.ranks[0]; }))
        throw std::invalid_argument("fed: strategy " + std::string(to_string(cfg.strategy)) +
                                    " requires equal ranks across clients");
    if ((cfg.strategy == Strategy::FedALoRAHetero || cfg.strategy == Strategy::FedSAHetero) && cfg.d_m == 0)
        throw std::invalid_argument("fed: d_m must be >= 1");
    if (!cfg.weights.empty()) {
        if (cfg.weights.size() != cfg.n_clients)
            throw std::invalid_argument("fed: weights must list one entry per client");
        double total = 0.0;
        for (double w : cfg.weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("fed: weights must be non-negative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("fed: weights must sum to 1");
    }
    validate(cfg.train);
}

Matrix aggregate(std::span<const Matrix> matrices, std::span<const double> weights) {
    if (matrices.empty()) throw std::invalid_argument("aggregate: no matrices");
    if (matrices.size() != weights.size()) throw std::invalid_argument("aggregate: one weight per matrix required");
    Matrix out(matrices[0].rows(), matrices[0].cols());
    for (std::size_t j = 0; j < matrices.size(); ++j) {
        if (!matrices[j].same_shape(out))
            throw std::invalid_argument("aggregate: matrix " + std::to_string(j) + " has a different shape");
        add_scaled(out, weights[j], matrices[j]);
    }
    return out;
}

TrainConfig local_train_config(const FedConfig& cfg, std::size_t client, std::size_t round) {
    TrainConfig tc = cfg.train;
    tc.epochs = cfg.local_epochs;
    tc.seed = derive_seed(cfg.seed, "client.shuffle", client, round);
    return tc;
}

std::uint64_t client_init_seed(const FedConfig& cfg, std::size_t client, std::size_t round) {
    return derive_seed(cfg.seed, round == 0 ? "client.init" : "client.reinit", cfg.shared_init ? 0 : client, round);
}

FedClient init_client(const FedConfig& cfg, std::size_t d_in, std::size_t d_out, std::size_t client) {
    RngStream rng(client_init_seed(cfg, client, 0));
    const std::size_t r = cfg.ranks.at(client);
    FedClient fc;
    switch (cfg.strategy) {
        case Strategy::FedALoRAHetero:
            fc.model = init_hetero_b(d_in, d_out, r, cfg.d_m, rng, cfg.scaling);
            break;
        case Strategy::FedSAHetero:
            fc.model = init_hetero_a(d_in, d_out, r, cfg.d_m, rng, cfg.scaling);
            break;
        default: {
            LoraClient lc;
            lc.adapter = init_adapter(AdapterConfig{d_in, d_out, r, 1, Scheme::Vanilla, cfg.scaling}, rng);
            if (cfg.strategy == Strategy::FLoRA) lc.frozen_delta = Matrix(d_out, d_in);
            fc.model = std::move(lc);
        }
    }
    return fc;
}

namespace {

Vector resolved_weights(const FedConfig& cfg) {
    if (!cfg.weights.empty()) return cfg.weights;
    return Vector(cfg.n_clients, 1.0 / static_cast<double>(cfg.n_clients));
}

template <class Model>
double train_locally(Model& model, const Matrix& base, std::span<const Sample> data, const RoundContext& ctx,
                     std::size_t client) {
    TrainSession<Model> session(std::move(model), base, data, local_train_config(ctx.cfg, client, ctx.round));
    const double loss = session.run().back();
    model = std::move(session).release();
    return loss;
}

// Local training of every client; clients are independent so they run in
// parallel, and the round continues only after all have finished.
void train_all(std::vector<FedClient>& clients, const RoundContext& ctx) {
    parallel_for(clients.size(), [&](std::size_t i) {
        FedClient& fc = clients[i];
        std::visit(
            [&](auto& model) {
                using T = std::decay_t<decltype(model)>;
                if constexpr (std::is_same_v<T, LoraClient>) {
                    if (model.frozen_delta.empty()) {
                        fc.last_loss = train_locally(model.adapter, ctx.w0, ctx.data[i], ctx, i);
                    } else {
                        const Matrix base = add(ctx.w0, model.frozen_delta);
                        fc.last_loss = train_locally(model.adapter, base, ctx.data[i], ctx, i);
                    }
                } else {
                    fc.last_loss = train_locally(model, ctx.w0, ctx.data[i], ctx, i);
                }
            },
            fc.model);
    });
}

LoraClient& lora(FedClient& fc) { return std::get<LoraClient>(fc.model); }

void check_context(const std::vector<FedClient>& clients, const RoundContext& ctx) {
    if (clients.size() != ctx.cfg.n_clients || ctx.data.size() != ctx.cfg.n_clients)
        throw std::invalid_argument("federated round: client count does not match the configuration");
    if (ctx.round == 0) throw std::invalid_argument("federated round: rounds are numbered from 1");
}

Matrix pad_rows(const Matrix& m, std::size_t rows) {
    Matrix out(rows, m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) std::copy(m.row(i).begin(), m.row(i).end(), out.row(i).begin());
    return out;
}

Matrix pad_cols(const Matrix& m, std::size_t cols) {
    Matrix out(m.rows(), cols);
    for (std::size_t i = 0; i < m.rows(); ++i) std::copy(m.row(i).begin(), m.row(i).end(), out.row(i).begin());
    return out;
}

}  // namespace

LedgerEntry run_round_homog(std::vector<FedClient>& clients, ServerState& server, const RoundContext& ctx) {
    check_context(clients, ctx);
    if (ctx.cfg.strategy != Strategy::FedALoRA)
        throw std::invalid_argument("run_round_homog: strategy is " + std::string(to_string(ctx.cfg.strategy)));
    const std::size_t r = lora(clients[0]).adapter.config.rank;
    for (auto& c : clients)
        if (lora(c).adapter.config.rank != r) throw std::invalid_argument("run_round_homog: client ranks differ");

    ctx.transport.begin_round(ctx.round);
    train_all(clients, ctx);

    std::vector<Matrix> received;
    for (std::size_t i = 0; i < clients.size(); ++i)
        received.push_back(ctx.transport.upload(i, lora(clients[i]).adapter.b[0]));
    const Vector w = resolved_weights(ctx.cfg);
    server.global = {aggregate(received, w)};
    for (std::size_t i = 0; i < clients.size(); ++i)
        lora(clients[i]).adapter.b[0] = ctx.transport.download(i, server.global[0]);
    server.round = ctx.round;
    return ctx.transport.end_round();
}

LedgerEntry run_round_hetero(std::vector<FedClient>& clients, ServerState& server, const RoundContext& ctx) {
    check_context(clients, ctx);
    const bool share_b = ctx.cfg.strategy == Strategy::FedALoRAHetero;
    if (!share_b && ctx.cfg.strategy != Strategy::FedSAHetero)
        throw std::invalid_argument("run_round_hetero: strategy is " + std::string(to_string(ctx.cfg.strategy)));
    for (const auto& c : clients) {
        const bool ok = share_b ? std::holds_alternative<HeteroBClient>(c.model)
                                : std::holds_alternative<HeteroAClient>(c.model);
        if (!ok) throw std::invalid_argument("run_round_hetero: client model does not match the strategy");
    }
    const auto width = [](const FedClient& c) {
        return std::visit(
            [](const auto& m) -> std::size_t {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, HeteroBClient>) return m.b0.cols();
                else if constexpr (std::is_same_v<T, HeteroAClient>) return m.a0.rows();
                else return 0;
            },
            c.model);
    };
    for (const auto& c : clients)
        if (width(c) != width(clients[0])) throw std::invalid_argument("run_round_hetero: clients disagree on d_m");

    // Step 1 for rounds after the first.
    if (ctx.round > 1) {
        for (std::size_t i = 0; i < clients.size(); ++i) {
            FedClient& fc = clients[i];
            if (fc.inbox.empty()) throw std::logic_error("run_round_hetero: no global matrix received last round");
            RngStream rng(client_init_seed(ctx.cfg, i, ctx.round));
            std::visit(
                [&](auto& m) {
                    if constexpr (!std::is_same_v<std::decay_t<decltype(m)>, LoraClient>) begin_round(m, fc.inbox, rng);
                },
                fc.model);
            fc.inbox = Matrix();
        }
    }

    ctx.transport.begin_round(ctx.round);
    train_all(clients, ctx);

    // Upload the factor pair; the server reconstructs each client's product.
    std::vector<Matrix> products;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (share_b) {
            const auto& m = std::get<HeteroBClient>(clients[i].model);
            const Matrix b1 = ctx.transport.upload(i, m.b1);
            const Matrix b2 = ctx.transport.upload(i, m.b2);
            products.push_back(matmul(b2, b1));
        } else {
            const auto& m = std::get<HeteroAClient>(clients[i].model);
            const Matrix a1 = ctx.transport.upload(i, m.a1);
            const Matrix a2 = ctx.transport.upload(i, m.a2);
            products.push_back(matmul(a1, a2));
        }
    }
    const Vector w = resolved_weights(ctx.cfg);
    Matrix accumulator = server.global.empty() ? Matrix(products[0].rows(), products[0].cols()) : server.global[0];
    add_scaled(accumulator, 1.0, aggregate(products, w));
    server.global = {std::move(accumulator)};
    for (std::size_t i = 0; i < clients.size(); ++i) clients[i].inbox = ctx.transport.download(i, server.global[0]);
    server.round = ctx.round;
    return ctx.transport.end_round();
}

LedgerEntry run_round_baseline(std::vector<FedClient>& clients, ServerState& server, const RoundContext& ctx) {
    check_context(clients, ctx);
    const Strategy s = ctx.cfg.strategy;
    if (s != Strategy::FedIT && s != Strategy::FedSA && s != Strategy::ZeroPadding && s != Strategy::FLoRA)
        throw std::invalid_argument("run_round_baseline: strategy is " + std::string(to_string(s)));
    for (const auto& c : clients)
        if (!std::holds_alternative<LoraClient>(c.model))
            throw std::invalid_argument("run_round_baseline: client model does not match the strategy");
    if (requires_uniform_ranks(s)) {
        const std::size_t r = lora(clients[0]).adapter.config.rank;
        for (auto& c : clients)
            if (lora(c).adapter.config.rank != r)
                throw std::invalid_argument("run_round_baseline: " + std::string(to_string(s)) + " requires equal ranks");
    }

    ctx.transport.begin_round(ctx.round);
    train_all(clients, ctx);
    const Vector w = resolved_weights(ctx.cfg);
    const std::size_t n = clients.size();

    switch (s) {
        case Strategy::FedIT: {
            std::vector<Matrix> as, bs;
            for (std::size_t i = 0; i < n; ++i) {
                as.push_back(ctx.transport.upload(i, lora(clients[i]).adapter.a[0]));
                bs.push_back(ctx.transport.upload(i, lora(clients[i]).adapter.b[0]));
            }
            server.global = {aggregate(as, w), aggregate(bs, w)};
            for (std::size_t i = 0; i < n; ++i) {
                lora(clients[i]).adapter.a[0] = ctx.transport.download(i, server.global[0]);
                lora(clients[i]).adapter.b[0] = ctx.transport.download(i, server.global[1]);
            }
            break;
        }
        case Strategy::FedSA: {
            std::vector<Matrix> as;
            for (std::size_t i = 0; i < n; ++i) as.push_back(ctx.transport.upload(i, lora(clients[i]).adapter.a[0]));
            server.global = {aggregate(as, w)};
            for (std::size_t i = 0; i < n; ++i)
                lora(clients[i]).adapter.a[0] = ctx.transport.download(i, server.global[0]);
            break;
        }
        case Strategy::ZeroPadding: {
            std::size_t r_max = 0;
            for (auto& c : clients) r_max = std::max(r_max, lora(c).adapter.config.rank);
            std::vector<Matrix> as, bs;
            for (std::size_t i = 0; i < n; ++i) {
                as.push_back(pad_rows(ctx.transport.upload(i, lora(clients[i]).adapter.a[0]), r_max));
                bs.push_back(pad_cols(ctx.transport.upload(i, lora(clients[i]).adapter.b[0]), r_max));
            }
            server.global = {aggregate(as, w), aggregate(bs, w)};
            for (std::size_t i = 0; i < n; ++i) {
                AdapterState& ad = lora(clients[i]).adapter;
                const std::size_t r = ad.config.rank;
                ad.a[0] = row_block(ctx.transport.download(i, server.global[0]), 0, r);
                ad.b[0] = column_block(ctx.transport.download(i, server.global[1]), 0, r);
            }
            break;
        }
        case Strategy::FLoRA: {
            std::vector<Matrix> as, bs;
            std::size_t r_sum = 0;
            for (std::size_t i = 0; i < n; ++i) {
                as.push_back(ctx.transport.upload(i, lora(clients[i]).adapter.a[0]));
                bs.push_back(scale(ctx.transport.upload(i, lora(clients[i]).adapter.b[0]), w[i]));
                r_sum += as.back().rows();
            }
            const std::size_t d_in = as[0].cols();
            const std::size_t d_out = bs[0].rows();
            Matrix a_stack(r_sum, d_in);
            Matrix b_stack(d_out, r_sum);
            std::size_t offset = 0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < as[i].rows(); ++k) {
                    std::copy(as[i].row(k).begin(), as[i].row(k).end(), a_stack.row(offset + k).begin());
                    for (std::size_t row = 0; row < d_out; ++row) b_stack(row, offset + k) = bs[i](row, k);
                }
                offset += as[i].rows();
            }
            server.global = {std::move(a_stack), std::move(b_stack)};
            for (std::size_t i = 0; i < n; ++i) {
                LoraClient& lc = lora(clients[i]);
                const Matrix a = ctx.transport.download(i, server.global[0]);
                const Matrix b = ctx.transport.download(i, server.global[1]);
                add_scaled(lc.frozen_delta, lc.adapter.config.scaling, matmul(b, a));
                RngStream rng(client_init_seed(ctx.cfg, i, ctx.round + 1));
                lc.adapter = init_adapter(lc.adapter.config, rng);
            }
            break;
        }
        default: break;
    }
    server.round = ctx.round;
    return ctx.transport.end_round();
}

Federation::Federation(FedConfig cfg, Matrix w0, std::vector<std::vector<Sample>> client_train)
    : cfg_(std::move(cfg)), w0_(std::move(w0)), data_(std::move(client_train)) {
    validate(cfg_);
    if (data_.size() != cfg_.n_clients)
        throw std::invalid_argument("Federation: " + std::to_string(data_.size()) + " client datasets for " +
                                    std::to_string(cfg_.n_clients) + " clients");
    for (std::size_t i = 0; i < cfg_.n_clients; ++i) clients_.push_back(init_client(cfg_, w0_.cols(), w0_.rows(), i));
}

Federation::Federation(FedConfig cfg, Matrix w0, std::vector<std::vector<Sample>> client_train,
                       std::vector<FedClient> clients, ServerState server, CommLedger ledger)
    : cfg_(std::move(cfg)),
      w0_(std::move(w0)),
      data_(std::move(client_train)),
      clients_(std::move(clients)),
      server_(std::move(server)),
      ledger_(std::move(ledger)) {
    validate(cfg_);
    if (data_.size() != cfg_.n_clients || clients_.size() != cfg_.n_clients)
        throw std::invalid_argument("Federation: restored state does not match n_clients");
}

const LedgerEntry& Federation::run_round() {
    if (finished()) throw std::logic_error("Federation: all rounds already run");
    Transport transport(cfg_.n_clients);
    const RoundContext ctx{cfg_, w0_, data_, transport, server_.round + 1};
    switch (cfg_.strategy) {
        case Strategy::FedALoRA: ledger_.rounds.push_back(run_round_homog(clients_, server_, ctx)); break;
        case Strategy::FedALoRAHetero:
        case Strategy::FedSAHetero: ledger_.rounds.push_back(run_round_hetero(clients_, server_, ctx)); break;
        default: ledger_.rounds.push_back(run_round_baseline(clients_, server_, ctx)); break;
    }
    return ledger_.rounds.back();
}

void Federation::run() {
    while (!finished()) run_round();
}

Matrix Federation::client_delta(std::size_t client) const {
    const FedClient& fc = clients_.at(client);
    return std::visit(
        [&](const auto& m) -> Matrix {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LoraClient>) {
                Matrix d = effective_delta(m.adapter);
                if (!m.frozen_delta.empty()) add_scaled(d, 1.0, m.frozen_delta);
                return d;
            } else {
                if (fc.inbox.empty()) return effective_delta(m);
                T applied = m;
                if constexpr (std::is_same_v<T, HeteroBClient>) {
                    applied.b0 = fc.inbox;
                    applied.b2 = Matrix(m.b2.rows(), m.b2.cols());
                } else {
                    applied.a0 = fc.inbox;
                    applied.a2 = Matrix(m.a2.rows(), m.a2.cols());
                }
                return effective_delta(applied);
            }
        },
        fc.model);
}

double Federation::evaluate_client(std::size_t client, std::span<const Sample> data) const {
    if (data.empty()) throw std::invalid_argument("evaluate_client: empty dataset");
    const Matrix w = add(w0_, client_delta(client));
    double total = 0.0;
    for (const Sample& s : data) total += mse(matvec(w, s.x), s.y);
    return total / static_cast<double>(data.size());
}

}  // namespace alora
