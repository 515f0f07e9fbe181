#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "alora/analysis.hpp"
#include "alora/optimizer.hpp"
#include "alora/tasks.hpp"
#include "alora/train.hpp"
#include "support.hpp"

using namespace alora;

namespace {

SuiteSpec small_spec(std::size_t n_tasks, Family family, double noise = 0.01) {
    return {.n_tasks = n_tasks, .d_in = 16, .d_out = 16, .true_rank = 2, .family = family, .noise = noise,
            .samples_per_task = 200, .seed = 5};
}

}  // namespace

TEST_CASE("suite families and determinism") {
    const SyntheticSuite b = gen_suite(small_spec(3, Family::SharedB));
    REQUIRE(b.tasks.size() == 3);
    for (std::size_t k = 1; k < 3; ++k) {
        CHECK(b.tasks[k].b_true == b.tasks[0].b_true);
        CHECK(b.tasks[k].a_true != b.tasks[0].a_true);
        CHECK(subspace_similarity(b.tasks[k].b_true, b.tasks[0].b_true) == doctest::Approx(1.0));
    }
    const SyntheticSuite a = gen_suite(small_spec(3, Family::SharedA));
    for (std::size_t k = 1; k < 3; ++k) {
        CHECK(a.tasks[k].a_true == a.tasks[0].a_true);
        CHECK(a.tasks[k].b_true != a.tasks[0].b_true);
    }
    const SyntheticSuite again = gen_suite(small_spec(3, Family::SharedB));
    CHECK(again.w0 == b.w0);
    for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(again.tasks[k].train.size() == b.tasks[k].train.size());
        for (std::size_t i = 0; i < b.tasks[k].train.size(); ++i) CHECK(again.tasks[k].train[i].y == b.tasks[k].train[i].y);
    }
    CHECK(b.tasks[0].train.size() == 160);
    CHECK(b.tasks[0].test.size() == 40);
    for (const auto& s : b.tasks[2].test) CHECK(s.task == 2);
}

TEST_CASE("adding a task leaves earlier tasks unchanged") {
    const SyntheticSuite two = gen_suite(small_spec(2, Family::Independent));
    const SyntheticSuite three = gen_suite(small_spec(3, Family::Independent));
    CHECK(two.w0 == three.w0);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(two.tasks[k].a_true == three.tasks[k].a_true);
        CHECK(two.tasks[k].test.back().y == three.tasks[k].test.back().y);
    }
}

TEST_CASE("noiseless targets follow the generative model") {
    const SyntheticSuite s = gen_suite(small_spec(2, Family::SharedB, 0.0));
    for (const auto& t : s.tasks) {
        const Matrix w = add(s.w0, testing::naive_matmul(t.b_true, t.a_true));
        for (const Sample& smp : t.train) CHECK(testing::max_abs(smp.y, testing::naive_matvec(w, smp.x)) < 1e-12);
    }
}

TEST_CASE("suite validation") {
    SuiteSpec bad = small_spec(1, Family::SharedB);
    bad.true_rank = 17;
    CHECK_THROWS_AS(gen_suite(bad), std::invalid_argument);
    bad = small_spec(0, Family::SharedB);
    CHECK_THROWS_AS(gen_suite(bad), std::invalid_argument);
    bad = small_spec(1, Family::SharedB);
    bad.latent_dim = 20;
    CHECK_THROWS_AS(gen_suite(bad), std::invalid_argument);
}

TEST_CASE("latent inputs lie in the input basis") {
    SuiteSpec spec = small_spec(1, Family::SharedB);
    spec.latent_dim = 3;
    const SyntheticSuite s = gen_suite(spec);
    REQUIRE(s.input_basis.cols() == 3);
    for (const Sample& smp : s.tasks[0].train) {
        // Residual after projecting onto the basis.
        const Vector c = testing::naive_matvec(transpose(s.input_basis), smp.x);
        const Vector proj = testing::naive_matvec(s.input_basis, c);
        CHECK(testing::max_abs(proj, smp.x) < 1e-10);
    }
}

TEST_CASE("task shift moves each task's input mean") {
    SuiteSpec spec = small_spec(2, Family::SharedB);
    spec.samples_per_task = 4000;
    spec.task_shift = 3.0;
    const SyntheticSuite s = gen_suite(spec);
    SuiteSpec plain = spec;
    plain.task_shift = 0.0;
    const SyntheticSuite p = gen_suite(plain);
    std::vector<Vector> means;
    for (std::size_t k = 0; k < 2; ++k) {
        Vector mean(16, 0.0);
        for (std::size_t i = 0; i < s.tasks[k].train.size(); ++i)
            for (std::size_t d = 0; d < 16; ++d)
                mean[d] += (s.tasks[k].train[i].x[d] - p.tasks[k].train[i].x[d]) / s.tasks[k].train.size();
        CHECK(norm(mean) == doctest::Approx(3.0));
        means.push_back(mean);
    }
    CHECK(testing::max_abs(means[0], means[1]) > 0.1);
    CHECK(s.tasks[0].a_true == p.tasks[0].a_true);
}

TEST_CASE("adam matches a hand-stepped trace on a 1-D quadratic") {
    // loss(p) = (p - 3)^2, gradient 2 (p - 3), p0 = 0.
    const OptimizerSettings adam{OptimizerKind::Adam, 0.1, 0.9, 0.999, 1e-8};
    Matrix p(1, 1);
    OptimizerState state;
    double q = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 5; ++t) {
        const double g = 2.0 * (q - 3.0);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
        q -= 0.1 * mh / (std::sqrt(vh) + 1e-8);

        Matrix* params[] = {&p};
        const std::vector<Matrix> grads{Matrix(1, 1, 2.0 * (p(0, 0) - 3.0))};
        optimizer_step(adam, params, grads, state);
        CHECK(p(0, 0) == doctest::Approx(q).epsilon(1e-14));
    }
    CHECK(state.step == 5);

    // The first bias-corrected step has length lr whatever the gradient scale.
    Matrix r(1, 1);
    OptimizerState fresh;
    Matrix* rp[] = {&r};
    optimizer_step(adam, rp, std::vector<Matrix>{Matrix(1, 1, 1000.0)}, fresh);
    CHECK(r(0, 0) == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("sgd step") {
    Matrix p = Matrix::from_rows({{1, 2}});
    Matrix* params[] = {&p};
    OptimizerState st;
    optimizer_step({OptimizerKind::Sgd, 0.5}, params, std::vector<Matrix>{Matrix::from_rows({{2, -2}})}, st);
    CHECK(p == Matrix::from_rows({{0, 3}}));
    CHECK(st.first.empty());
}

TEST_CASE("training: lr 0, determinism, frozen base") {
    const SyntheticSuite s = gen_suite(small_spec(1, Family::SharedB));
    RngStream rng(1);
    const AdapterState init = init_adapter({16, 16, 2, 3, Scheme::ALoRA, 1.0}, rng);
    TrainConfig frozen{.optimizer = {.kind = OptimizerKind::Sgd, .lr = 0.0}, .epochs = 3, .batch_size = 16, .seed = 1};
    CHECK(train(init, s.w0, s.tasks[0].train, frozen).model == init);

    const Matrix w0 = s.w0;
    TrainConfig cfg{.optimizer = {.lr = 1e-2}, .epochs = 5, .batch_size = 16, .seed = 9};
    const auto r1 = train(init, s.w0, s.tasks[0].train, cfg);
    const auto r2 = train(init, s.w0, s.tasks[0].train, cfg);
    CHECK(r1.loss_curve == r2.loss_curve);
    CHECK(r1.model == r2.model);
    CHECK(s.w0 == w0);
    CHECK(r1.loss_curve.back() < r1.loss_curve.front());
    cfg.seed = 10;
    CHECK(train(init, s.w0, s.tasks[0].train, cfg).loss_curve != r1.loss_curve);
}

TEST_CASE("training reports divergence with the step") {
    const SyntheticSuite s = gen_suite(small_spec(1, Family::SharedB));
    RngStream rng(2);
    const AdapterState init = init_adapter({16, 16, 2, 1, Scheme::Vanilla, 1.0}, rng);
    TrainConfig cfg{.optimizer = {.kind = OptimizerKind::Sgd, .lr = 1e6}, .epochs = 50, .batch_size = 16, .seed = 1};
    try {
        train(init, s.w0, s.tasks[0].train, cfg);
        FAIL("expected divergence");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("session split across epochs equals a straight run") {
    const SyntheticSuite s = gen_suite(small_spec(2, Family::SharedB));
    const auto pooled = pooled_train(s);
    RngStream rng(3);
    const AdapterState init = init_adapter({16, 16, 2, 3, Scheme::SharingA, 1.0}, rng);
    TrainConfig cfg{.optimizer = {.lr = 1e-2}, .epochs = 6, .batch_size = 32, .seed = 4};
    const auto straight = train(init, s.w0, pooled, cfg);

    TrainSession<AdapterState> first(init, s.w0, pooled, cfg);
    first.run_epoch();
    first.run_epoch();
    TrainSession<AdapterState> second(first.model(), s.w0, pooled, cfg, first.progress());
    second.run();
    CHECK(second.model() == straight.model);
    CHECK(second.progress().loss_curve == straight.loss_curve);
}

TEST_CASE("realizable single task converges") {
    SuiteSpec spec = small_spec(1, Family::SharedB, 0.0);
    spec.samples_per_task = 400;
    const SyntheticSuite s = gen_suite(spec);
    RngStream rng(4);
    const AdapterState init = init_adapter({16, 16, 2, 1, Scheme::Vanilla, 1.0}, rng);
    TrainConfig cfg{.optimizer = {.lr = 1e-2}, .epochs = 500, .batch_size = 32, .seed = 1};
    TrainSession<AdapterState> session(init, s.w0, s.tasks[0].train, cfg);
    while (session.progress().epochs_done < cfg.epochs && session.run_epoch() >= 1e-6) {
    }
    CHECK(evaluate(session.model(), s.w0, s.tasks[0].train) < 1e-4);
    CHECK(evaluate(session.model(), s.w0, s.tasks[0].test) < 1e-4);
}

TEST_CASE("evaluate: zero adapter, perfect adapter, no mutation") {
    SuiteSpec spec = small_spec(1, Family::SharedB, 0.0);
    spec.samples_per_task = 10000;
    const SyntheticSuite s = gen_suite(spec);
    RngStream rng(5);
    AdapterState zero = init_adapter({16, 16, 2, 1, Scheme::Vanilla, 1.0}, rng);
    const AdapterState before = zero;
    // Isotropic inputs: E||B*A* x||^2 / d_out = ||B*A*||_F^2 / d_out.
    const Matrix delta = testing::naive_matmul(s.tasks[0].b_true, s.tasks[0].a_true);
    const double expected = frobenius_norm(delta) * frobenius_norm(delta) / 16.0;
    CHECK(evaluate(zero, s.w0, s.tasks[0].train) == doctest::Approx(expected).epsilon(0.05));
    CHECK(zero == before);

    AdapterState perfect = zero;
    perfect.a[0] = s.tasks[0].a_true;
    perfect.b[0] = s.tasks[0].b_true;
    CHECK(evaluate(perfect, s.w0, s.tasks[0].test) < 1e-24);
    CHECK_THROWS_AS(evaluate(perfect, s.w0, std::span<const Sample>{}), std::invalid_argument);
}

TEST_CASE("single-task baselines") {
    SuiteSpec spec = small_spec(2, Family::SharedB, 0.0);
    spec.samples_per_task = 300;
    const SyntheticSuite s = gen_suite(spec);
    const AdapterConfig ac{16, 16, 2, 1, Scheme::Vanilla, 1.0};
    TrainConfig cfg{.optimizer = {.lr = 1e-2}, .epochs = 300, .batch_size = 32, .seed = 3};
    const Vector m0 = single_task_baselines(s, ac, cfg);
    REQUIRE(m0.size() == 2);
    for (double v : m0) CHECK(v < 1e-3);
    CHECK(single_task_baselines(s, ac, cfg) == m0);

    SuiteSpec one = spec;
    one.n_tasks = 1;
    cfg.epochs = 1;
    CHECK(single_task_baselines(gen_suite(one), ac, cfg).size() == 1);
}

TEST_CASE("ALoRA matches or beats SharingA on a SharedB suite at equal parameter count") {
    // Tasks differ in their input mean so the router can tell them apart.
    std::size_t wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SuiteSpec spec{.n_tasks = 3, .family = Family::SharedB, .task_shift = 4.0, .seed = derive_seed(seed, "suite")};
        const SyntheticSuite s = gen_suite(spec);
        const auto pooled = pooled_train(s);
        TrainConfig cfg{.optimizer = {.lr = 1e-3}, .epochs = 30, .batch_size = 32, .seed = derive_seed(seed, "shuffle")};
        double score[2];
        for (Scheme scheme : {Scheme::SharingA, Scheme::ALoRA}) {
            RngStream rng(derive_seed(seed, "init"));
            const AdapterConfig ac{64, 64, 4, 3, scheme, 1.0};
            const auto r = train(init_adapter(ac, rng), s.w0, pooled, cfg);
            double mean = 0.0;
            for (const auto& t : s.tasks) mean += evaluate(r.model, s.w0, t.test) / 3.0;
            score[scheme == Scheme::ALoRA] = mean;
        }
        MESSAGE("seed ", seed, ": sharing_a ", score[0], " alora ", score[1]);
        wins += score[1] <= score[0] ? 1 : 0;
    }
    CHECK(trainable_count({64, 64, 4, 3, Scheme::ALoRA, 1.0}) == trainable_count({64, 64, 4, 3, Scheme::SharingA, 1.0}));
    CHECK(wins >= 8);
}
