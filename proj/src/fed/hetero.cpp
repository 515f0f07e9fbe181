#include "alora/hetero.hpp"

#include <stdexcept>

namespace alora {

namespace {

void axpy(Vector& y, double s, const Vector& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

void check_dims(std::size_t d_in, std::size_t d_out, std::size_t rank, std::size_t d_m) {
    if (d_in == 0 || d_out == 0 || rank == 0 || d_m == 0)
        throw std::invalid_argument("hetero client: d_in, d_out, rank and d_m must all be >= 1");
}

}  // namespace

HeteroBClient init_hetero_b(std::size_t d_in, std::size_t d_out, std::size_t rank, std::size_t d_m,
                            RngStream& rng, double scaling) {
    check_dims(d_in, d_out, rank, d_m);
    HeteroBClient c;
    c.a = kaiming_uniform(rank, d_in, rng);
    c.m = kaiming_uniform(d_m, rank, rng);
    c.b1 = kaiming_uniform(rank, d_m, rng);
    c.b2 = Matrix(d_out, rank);
    c.b0 = Matrix(d_out, d_m);
    c.scaling = scaling;
    return c;
}

void begin_round(HeteroBClient& client, const Matrix& global_b0, RngStream& rng) {
    if (!global_b0.same_shape(client.b0)) throw std::invalid_argument("begin_round: global B0 has wrong shape");
    client.b0 = global_b0;
    client.b1 = kaiming_uniform(client.b1.rows(), client.b1.cols(), rng);
    client.b2 = Matrix(client.b2.rows(), client.b2.cols());
}

Matrix shared_factor(const HeteroBClient& client) { return matmul(client.b2, client.b1); }

Matrix effective_delta(const HeteroBClient& c) {
    return scale(matmul(matmul(add(c.b0, shared_factor(c)), c.m), c.a), c.scaling);
}

std::vector<Matrix*> trainable(HeteroBClient& c) { return {&c.a, &c.m, &c.b1, &c.b2}; }

Vector predict(const HeteroBClient& c, const Matrix& w0, std::span<const double> x) {
    const Vector h = matvec(c.a, x);
    const Vector p = matvec(c.m, h);
    const Vector q = matvec(c.b1, p);
    Vector y = matvec(w0, x);
    Vector delta = matvec(c.b0, p);
    axpy(delta, 1.0, matvec(c.b2, q));
    axpy(y, c.scaling, delta);
    return y;
}

FlatGradient sample_gradient(const HeteroBClient& c, const Matrix& w0, const Sample& sample) {
    const auto& x = sample.x;
    const Vector h = matvec(c.a, x);
    const Vector p = matvec(c.m, h);
    const Vector q = matvec(c.b1, p);
    Vector y = matvec(w0, x);
    Vector delta = matvec(c.b0, p);
    axpy(delta, 1.0, matvec(c.b2, q));
    axpy(y, c.scaling, delta);

    const double s = c.scaling;
    const Vector g = mse_gradient(y, sample.y);
    Vector dq = matvec_transposed(c.b2, g);
    for (double& v : dq) v *= s;
    Vector dp = matvec_transposed(c.b0, g);
    for (double& v : dp) v *= s;
    axpy(dp, 1.0, matvec_transposed(c.b1, dq));
    const Vector dh = matvec_transposed(c.m, dp);

    FlatGradient out;
    out.grads.push_back(outer(dh, x));
    out.grads.push_back(outer(dp, h));
    out.grads.push_back(outer(dq, p));
    out.grads.push_back(scale(outer(g, q), s));
    out.loss = mse(y, sample.y);
    return out;
}

FlatGradient batch_gradient(const HeteroBClient& c, const Matrix& w0, std::span<const Sample> batch) {
    return mean_gradient(batch, [&](const Sample& s) { return sample_gradient(c, w0, s); });
}

HeteroAClient init_hetero_a(std::size_t d_in, std::size_t d_out, std::size_t rank, std::size_t d_m,
                            RngStream& rng, double scaling) {
    check_dims(d_in, d_out, rank, d_m);
    // Drawn as transposes so the distributions mirror HeteroBClient exactly.
    HeteroAClient c;
    c.b = transpose(kaiming_uniform(rank, d_out, rng));
    c.m = transpose(kaiming_uniform(d_m, rank, rng));
    c.a1 = transpose(kaiming_uniform(rank, d_m, rng));
    c.a2 = Matrix(rank, d_in);
    c.a0 = Matrix(d_m, d_in);
    c.scaling = scaling;
    return c;
}

void begin_round(HeteroAClient& client, const Matrix& global_a0, RngStream& rng) {
    if (!global_a0.same_shape(client.a0)) throw std::invalid_argument("begin_round: global A0 has wrong shape");
    client.a0 = global_a0;
    client.a1 = transpose(kaiming_uniform(client.a1.cols(), client.a1.rows(), rng));
    client.a2 = Matrix(client.a2.rows(), client.a2.cols());
}

Matrix shared_factor(const HeteroAClient& client) { return matmul(client.a1, client.a2); }

Matrix effective_delta(const HeteroAClient& c) {
    return scale(matmul(matmul(c.b, c.m), add(c.a0, shared_factor(c))), c.scaling);
}

std::vector<Matrix*> trainable(HeteroAClient& c) { return {&c.b, &c.m, &c.a1, &c.a2}; }

Vector predict(const HeteroAClient& c, const Matrix& w0, std::span<const double> x) {
    const Vector u = matvec(c.a2, x);
    Vector a = matvec(c.a0, x);
    axpy(a, 1.0, matvec(c.a1, u));
    const Vector mm = matvec(c.m, a);
    Vector y = matvec(w0, x);
    axpy(y, c.scaling, matvec(c.b, mm));
    return y;
}

FlatGradient sample_gradient(const HeteroAClient& c, const Matrix& w0, const Sample& sample) {
    const auto& x = sample.x;
    const Vector u = matvec(c.a2, x);
    Vector a = matvec(c.a0, x);
    axpy(a, 1.0, matvec(c.a1, u));
    const Vector mm = matvec(c.m, a);
    Vector y = matvec(w0, x);
    axpy(y, c.scaling, matvec(c.b, mm));

    const double s = c.scaling;
    const Vector g = mse_gradient(y, sample.y);
    Vector dmm = matvec_transposed(c.b, g);
    for (double& v : dmm) v *= s;
    const Vector da = matvec_transposed(c.m, dmm);
    const Vector du = matvec_transposed(c.a1, da);

    FlatGradient out;
    out.grads.push_back(scale(outer(g, mm), s));
    out.grads.push_back(outer(dmm, a));
    out.grads.push_back(outer(da, u));
    out.grads.push_back(outer(du, x));
    out.loss = mse(y, sample.y);
    return out;
}

FlatGradient batch_gradient(const HeteroAClient& c, const Matrix& w0, std::span<const Sample> batch) {
    return mean_gradient(batch, [&](const Sample& s) { return sample_gradient(c, w0, s); });
}

}  // namespace alora
