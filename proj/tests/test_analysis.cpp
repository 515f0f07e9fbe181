#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "alora/analysis.hpp"
#include "support.hpp"

using namespace alora;

namespace {

// Modified Gram-Schmidt on the columns of a full-column-rank matrix.
Matrix gram_schmidt(const Matrix& m) {
    Matrix q = m;
    for (std::size_t j = 0; j < q.cols(); ++j) {
        for (std::size_t p = 0; p < j; ++p) {
            double d = 0.0;
            for (std::size_t i = 0; i < q.rows(); ++i) d += q(i, p) * q(i, j);
            for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) -= d * q(i, p);
        }
        double n = 0.0;
        for (std::size_t i = 0; i < q.rows(); ++i) n += q(i, j) * q(i, j);
        n = std::sqrt(n);
        for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) /= n;
    }
    return q;
}

double oracle_similarity(const Matrix& a, const Matrix& b) {
    const Matrix c = testing::naive_matmul(transpose(gram_schmidt(a)), gram_schmidt(b));
    double s = 0.0;
    for (double v : c.data()) s += v * v;
    return s / static_cast<double>(std::min(a.cols(), b.cols()));
}

}  // namespace

TEST_CASE("similarity basics and invariances") {
    RngStream rng(1);
    for (int t = 0; t < 20; ++t) {
        const Matrix m = gaussian(20, 4, rng), other = gaussian(20, 4, rng);
        CHECK(subspace_similarity(m, m) == doctest::Approx(1.0).epsilon(1e-12));
        const Matrix r = gaussian(4, 4, rng);
        CHECK(subspace_similarity(m, matmul(m, r)) == doctest::Approx(1.0).epsilon(1e-9));
        const double s = subspace_similarity(m, other);
        CHECK(std::abs(s - subspace_similarity(other, m)) < 1e-9);
        CHECK(std::abs(s - subspace_similarity(matmul(m, r), other)) < 1e-9);
        CHECK(std::abs(s - oracle_similarity(m, other)) < 1e-10);
        CHECK(s >= -1e-9);
        CHECK(s <= 1.0 + 1e-9);
    }
    CHECK_THROWS_AS(subspace_similarity(Matrix(5, 2), gaussian(5, 2, rng)), std::invalid_argument);
    CHECK_THROWS_AS(subspace_similarity(gaussian(5, 2, rng), gaussian(6, 2, rng)), std::invalid_argument);
}

TEST_CASE("similarity of random subspaces is about r/d") {
    RngStream rng(2);
    double mean = 0.0;
    for (int t = 0; t < 200; ++t) mean += subspace_similarity(gaussian(64, 8, rng), gaussian(64, 8, rng)) / 200.0;
    CHECK(std::abs(mean - 8.0 / 64.0) < 0.02);
}

TEST_CASE("similarity uses the smaller numerical rank") {
    Matrix a(4, 2), b(4, 1);
    a(0, 0) = 1;
    a(1, 1) = 1;
    b(0, 0) = 3;
    CHECK(subspace_similarity(a, b) == doctest::Approx(1.0));
    Matrix rank1(4, 2);
    rank1(2, 0) = 1;
    rank1(2, 1) = 2;
    CHECK(subspace_similarity(a, rank1) == doctest::Approx(0.0));
}

TEST_CASE("mag_dir") {
    const MagDir id = mag_dir(Matrix::identity(3));
    CHECK(id.magnitude == Vector{1, 1, 1});
    CHECK(id.direction == Matrix::identity(3));
    CHECK(id.zero_columns.empty());

    const MagDir h = mag_dir(Matrix::from_rows({{3, 0}, {4, 0}}));
    CHECK(h.magnitude == Vector{5, 0});
    CHECK(h.direction(0, 0) == doctest::Approx(0.6));
    CHECK(h.direction(1, 0) == doctest::Approx(0.8));
    CHECK(h.zero_columns == std::vector<std::size_t>{1});

    RngStream rng(3);
    const Matrix w = gaussian(7, 5, rng);
    const MagDir md = mag_dir(w);
    Matrix back = md.direction;
    for (std::size_t i = 0; i < back.rows(); ++i)
        for (std::size_t j = 0; j < back.cols(); ++j) back(i, j) *= md.magnitude[j];
    CHECK(max_abs_diff(back, w) < 1e-12);
    for (std::size_t j = 0; j < 5; ++j) {
        double n = 0.0;
        for (std::size_t i = 0; i < 7; ++i) n += md.direction(i, j) * md.direction(i, j);
        CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-10);
    }
}

TEST_CASE("delta_mag_dir") {
    RngStream rng(4);
    const Matrix w = gaussian(5, 4, rng);
    const MagDirDelta same = delta_mag_dir(w, w);
    CHECK(same.delta_m == 0.0);
    CHECK(same.delta_d == doctest::Approx(0.0));

    const MagDirDelta hand = delta_mag_dir(Matrix::identity(2), Matrix::from_rows({{2, 0}, {0, 1}}));
    CHECK(hand.delta_m == doctest::Approx(0.5));
    CHECK(hand.delta_d == doctest::Approx(0.0));

    const MagDirDelta anti = delta_mag_dir(w, scale(w, -1.0));
    CHECK(anti.delta_m == doctest::Approx(0.0));
    CHECK(anti.delta_d == doctest::Approx(2.0));

    Matrix z = w;
    for (std::size_t i = 0; i < 5; ++i) z(i, 1) = 0.0;
    const MagDirDelta partial = delta_mag_dir(w, z);
    CHECK(partial.undefined_pairs == 1);
    CHECK(partial.delta_d >= 0.0);
    CHECK_THROWS_AS(delta_mag_dir(w, Matrix(4, 5)), std::invalid_argument);
}

TEST_CASE("conflict_count") {
    RngStream rng(5);
    const Matrix m = gaussian(3, 3, rng);
    const std::vector<Matrix> same{m, m};
    const ConflictReport r1 = conflict_count(same);
    CHECK(r1.count == 0);
    CHECK(r1.pairs[0].cosine == doctest::Approx(1.0));
    const std::vector<Matrix> opposite{m, scale(m, -1.0)};
    const ConflictReport r2 = conflict_count(opposite);
    CHECK(r2.count == 1);
    CHECK(r2.pairs[0].cosine == doctest::Approx(-1.0));

    for (int t = 0; t < 50; ++t) {
        std::vector<Matrix> comps;
        for (int k = 0; k < 2 + t % 4; ++k) comps.push_back(gaussian(2, 3, rng));
        std::size_t brute = 0;
        for (std::size_t i = 0; i < comps.size(); ++i)
            for (std::size_t j = i + 1; j < comps.size(); ++j) {
                double d = 0.0;
                for (std::size_t e = 0; e < comps[i].size(); ++e) d += comps[i].data()[e] * comps[j].data()[e];
                brute += d < 0.0 ? 1 : 0;
            }
        const ConflictReport r = conflict_count(comps);
        CHECK(r.count == brute);
        CHECK(r.pairs.size() == comps.size() * (comps.size() - 1) / 2);
    }

    const std::vector<Matrix> with_zero{m, Matrix(3, 3), scale(m, -2.0)};
    const ConflictReport r3 = conflict_count(with_zero);
    CHECK(r3.excluded == std::vector<std::size_t>{1});
    CHECK(r3.count == 1);
    CHECK_THROWS_AS(conflict_count(std::vector<Matrix>{m}), std::invalid_argument);
    CHECK_THROWS_AS(conflict_count(std::vector<Matrix>{m, Matrix(2, 2)}), std::invalid_argument);
}

TEST_CASE("delta_m_percent against reported commonsense scores") {
    const Vector single{78.84, 90.70, 73.98, 95.33, 85.80, 89.77, 81.06, 85.64};
    const std::vector<int> higher(8, 1);
    const Vector lora{77.39, 88.13, 73.61, 94.21, 84.20, 87.49, 79.53, 86.11};
    const Vector hydra{78.67, 90.07, 75.15, 95.13, 86.00, 87.92, 79.48, 85.16};
    const Vector alora{79.69, 90.19, 74.31, 94.68, 86.00, 87.92, 80.40, 85.48};
    CHECK(std::abs(delta_m_percent({lora, single, higher}) - 1.51) <= 0.01);
    CHECK(std::abs(delta_m_percent({hydra, single, higher}) - 0.48) <= 0.01);
    CHECK(std::abs(delta_m_percent({alora, single, higher}) - 0.32) <= 0.01);
    CHECK(delta_m_percent({single, single, higher}) == 0.0);
}

TEST_CASE("delta_m_percent formula and sign") {
    // Hand evaluation: one accuracy task and one error task.
    const double dm = delta_m_percent({{90, 0.5}, {80, 0.4}, {1, 0}});
    CHECK(dm == doctest::Approx(((-1.0) * 10.0 / 80.0 + 0.1 / 0.4) * 100.0 / 2.0));

    const Vector base{50, 60, 70};
    Vector v{55, 58, 71};
    const std::vector<int> higher(3, 1);
    const double before = delta_m_percent({v, base, higher});
    v[1] -= 1.0;
    CHECK(delta_m_percent({v, base, higher}) > before);
    CHECK_THROWS_AS(delta_m_percent({{1, 2}, {1, 0}, {1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(delta_m_percent({{1, 2}, {1}, {1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(delta_m_percent({{}, {}, {}}), std::invalid_argument);
}

TEST_CASE("gate activation log") {
    RngStream rng(6);
    AdapterState one = init_adapter({6, 4, 2, 1, Scheme::ALoRA, 1.0}, rng);
    auto samples = testing::random_batch(9, 6, 4, rng);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].task = i % 3;
    const GateLog l1 = gate_activation_log(one, samples);
    REQUIRE(l1.rows.size() == 9);
    for (const auto& r : l1.rows) CHECK(r.weights == Vector{1.0});

    AdapterState three = init_adapter({6, 4, 2, 3, Scheme::SharingA, 1.0}, rng);
    const GateLog l3 = gate_activation_log(three, samples);
    CHECK(l3.rows.size() == samples.size());
    for (std::size_t i = 0; i < l3.rows.size(); ++i) {
        CHECK(l3.rows[i].sample == i);
        CHECK(l3.rows[i].task == i % 3);
        CHECK(l3.rows[i].layer == 0);
        double sum = 0.0;
        for (double w : l3.rows[i].weights) sum += w;
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    const GateLog again = gate_activation_log(three, samples);
    for (std::size_t i = 0; i < l3.rows.size(); ++i) CHECK(again.rows[i].weights == l3.rows[i].weights);

    AdapterState vanilla = init_adapter({6, 4, 2, 1, Scheme::Vanilla, 1.0}, rng);
    const GateLog none = gate_activation_log(vanilla, samples);
    CHECK(none.rows.empty());
    CHECK(none.warning.has_value());
}
