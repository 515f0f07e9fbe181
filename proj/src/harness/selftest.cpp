#include "alora/selftest.hpp"

#include <cmath>
#include <functional>

#include "alora/analysis.hpp"
#include "alora/checkpoint.hpp"
#include "alora/comm.hpp"
#include "alora/format.hpp"
#include "alora/gradcheck.hpp"
#include "alora/hetero.hpp"
#include "alora/linalg.hpp"

namespace alora {

namespace {

constexpr std::size_t kInstances = 5;
constexpr double kGradTolerance = 1e-5;

Vector gaussian_vector(std::size_t n, RngStream& rng) {
    Vector v(n);
    for (double& e : v) e = rng.normal();
    return v;
}

std::vector<Sample> random_batch(std::size_t n, std::size_t d_in, std::size_t d_out, RngStream& rng) {
    std::vector<Sample> batch(n);
    for (Sample& s : batch) {
        s.x = gaussian_vector(d_in, rng);
        s.y = gaussian_vector(d_out, rng);
    }
    return batch;
}

template <class Model>
void randomize(Model& model, RngStream& rng) {
    for (Matrix* m : trainable(model))
        for (double& v : m->data()) v = 0.5 * rng.normal();
}

CheckResult check(std::string name, bool passed, std::string detail) {
    return {std::move(name), passed, std::move(detail)};
}

template <class Make>
CheckResult gradient_check(const std::string& name, RngStream& rng, Make&& make) {
    double worst = 0.0;
    for (std::size_t i = 0; i < kInstances; ++i) {
        const std::size_t d_in = 5, d_out = 4;
        auto model = make(d_in, d_out, rng);
        randomize(model, rng);
        const Matrix w0 = gaussian(d_out, d_in, rng);
        const auto batch = random_batch(3, d_in, d_out, rng);
        worst = std::max(worst, finite_difference_check(model, w0, batch).max_rel_error);
    }
    return check(name, worst < kGradTolerance, "max relative error " + format_shortest(worst));
}

bool near(double value, double expected, double rel) { return std::abs(value - expected) <= rel * std::abs(expected); }

}  // namespace

std::vector<CheckResult> run_selftest(std::uint64_t seed) {
    RngStream rng(derive_seed(seed, "selftest"));
    std::vector<CheckResult> out;

    for (Scheme scheme : {Scheme::Vanilla, Scheme::SharingA, Scheme::ALoRA}) {
        out.push_back(gradient_check("gradient." + std::string(to_string(scheme)), rng,
                                     [&](std::size_t d_in, std::size_t d_out, RngStream& r) {
                                         const std::size_t experts = scheme == Scheme::Vanilla ? 1 : 3;
                                         return init_adapter({d_in, d_out, 2, experts, scheme, 1.0}, r);
                                     }));
    }
    out.push_back(gradient_check("gradient.hetero_b", rng, [](std::size_t d_in, std::size_t d_out, RngStream& r) {
        HeteroBClient c = init_hetero_b(d_in, d_out, 3, 2, r);
        c.b0 = gaussian(d_out, 2, r);
        return c;
    }));
    out.push_back(gradient_check("gradient.hetero_a", rng, [](std::size_t d_in, std::size_t d_out, RngStream& r) {
        HeteroAClient c = init_hetero_a(d_in, d_out, 3, 2, r);
        c.a0 = gaussian(2, d_in, r);
        return c;
    }));

    {
        const Matrix m = gaussian(8, 3, rng);
        const Matrix mixed = matmul(m, gaussian(3, 3, rng));
        Matrix e1(8, 1), e2(8, 1);
        e1(0, 0) = 1.0;
        e2(1, 0) = 1.0;
        const double self = subspace_similarity(m, m);
        const double mix = subspace_similarity(m, mixed);
        const double orth = subspace_similarity(e1, e2);
        out.push_back(check("similarity", near(self, 1.0, 1e-10) && near(mix, 1.0, 1e-10) && std::abs(orth) < 1e-12,
                            "self " + format_shortest(self) + ", reparametrized " + format_shortest(mix) +
                                ", orthogonal " + format_shortest(orth)));
    }
    {
        const Matrix m = gaussian(8, 4, rng);
        const Svd s = svd_thin(m);
        Matrix us = s.u;
        for (std::size_t i = 0; i < us.rows(); ++i)
            for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s.s[j];
        const double err = frobenius_norm(subtract(matmul(us, s.vt), m)) / frobenius_norm(m);
        out.push_back(check("svd.reconstruction", err < 1e-10, "relative error " + format_shortest(err)));
    }
    {
        const Vector w = softmax(Vector{1000.0, 1000.0, 1000.0});
        bool ok = true;
        for (double v : w) ok = ok && near(v, 1.0 / 3.0, 1e-12);
        out.push_back(check("softmax.stability", ok, "softmax(1000, 1000, 1000) = 1/3 each"));
    }
    {
        // Commonsense benchmark accuracies: single-task baseline, then LoRA,
        // HydraLoRA and ALoRA, with their reported balance scores.
        const Vector single{78.84, 90.70, 73.98, 95.33, 85.80, 89.77, 81.06, 85.64};
        const std::vector<std::pair<Vector, double>> rows{
            {{77.39, 88.13, 73.61, 94.21, 84.20, 87.49, 79.53, 86.11}, 1.51},
            {{78.67, 90.07, 75.15, 95.13, 86.00, 87.92, 79.48, 85.16}, 0.48},
            {{79.69, 90.19, 74.31, 94.68, 86.00, 87.92, 80.40, 85.48}, 0.32},
        };
        bool ok = true;
        std::string detail;
        for (const auto& [values, expected] : rows) {
            const double dm = delta_m_percent({values, single, std::vector<int>(values.size(), 1)});
            ok = ok && std::abs(dm - expected) <= 0.01;
            detail += (detail.empty() ? "" : ", ") + format_shortest(std::round(dm * 100.0) / 100.0);
        }
        out.push_back(check("delta_m.reproduction", ok, detail + " (expected 1.51, 0.48, 0.32)"));
    }
    {
        const Geometry llama{4096, 4096, 64};
        const auto millions = [](const std::vector<CommCost>& costs, Strategy s) {
            for (const CommCost& c : costs)
                if (c.strategy == s) return c.total() / 1e6;
            return std::nan("");
        };
        const std::vector<std::size_t> homog(8, 8), hetero{64, 64, 32, 32, 16, 16, 8, 8};
        const auto h = comm_cost(llama, homog, 16);
        const auto x = comm_cost(llama, hetero, 16);
        const double fedit = millions(h, Strategy::FedIT), fedsa = millions(h, Strategy::FedSA);
        const double falora = millions(h, Strategy::FedALoRA), zp = millions(x, Strategy::ZeroPadding);
        const double flora = millions(x, Strategy::FLoRA), fhet = millions(x, Strategy::FedALoRAHetero);
        const bool ok = near(fedit, 8.39, 0.005) && near(fedsa, 4.19, 0.005) && near(falora, 4.19, 0.005) &&
                        near(zp, 49.28, 0.005) && near(flora, 141.56, 0.005) && near(fhet, 12.12, 0.01);
        out.push_back(check("commcost.reproduction", ok,
                            "FedIT " + format_shortest(fedit) + "M, FedSA " + format_shortest(fedsa) +
                                "M, Fed-ALoRA " + format_shortest(falora) + "M, ZeroPadding " + format_shortest(zp) +
                                "M, FLoRA " + format_shortest(flora) + "M, Fed-ALoRA hetero " +
                                format_shortest(fhet) + "M"));
    }
    {
        AdapterState state = init_adapter({6, 5, 2, 3, Scheme::ALoRA, 1.0}, rng);
        randomize(state, rng);
        SessionProgress progress;
        progress.rng = {7, 11};
        progress.epochs_done = 2;
        progress.steps_done = 9;
        progress.loss_curve = {0.5, 0.25};
        const Checkpoint ckpt = pack_session(state, progress);
        const Checkpoint back = decode_checkpoint(encode_checkpoint(ckpt));
        const SessionSnapshot snap = unpack_session(back);
        const bool ok = back == ckpt && snap.state == state && snap.progress.loss_curve == progress.loss_curve &&
                        snap.progress.rng == progress.rng && snap.progress.steps_done == 9;
        out.push_back(check("checkpoint.roundtrip", ok, std::to_string(encode_checkpoint(ckpt).size()) + " bytes"));
    }
    return out;
}

}  // namespace alora
