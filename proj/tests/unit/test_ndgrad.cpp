#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "convert.hpp"
#include "madt/ndgrad/adam.hpp"
#include "madt/ndgrad/gradcheck.hpp"
#include "madt/ndgrad/ops.hpp"

using namespace madt;
using nd::Matrix;
using nd::Tape;
using nd::Var;

namespace {

Matrix random(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1, double hi = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (auto& v : m.storage()) v = u(rng);
    m.requires_grad = true;
    return m;
}

// Finite-difference check of a scalar function of the given leaves.
void check_op(std::vector<Matrix*> leaves, const std::function<Var<double>(Tape<double>&, std::vector<Var<double>>&)>& f,
              std::uint64_t seed = 1) {
    auto run = [&](bool grad) {
        Tape<double> tape;
        std::vector<Var<double>> vars;
        for (auto* l : leaves) vars.push_back(tape.watch(*l));
        auto loss = f(tape, vars);
        if (grad) {
            for (auto* l : leaves) l->grad.clear();
            tape.backward(loss);
        }
        return loss.value()(0, 0);
    };
    nd::NamedParams params;
    for (std::size_t i = 0; i < leaves.size(); ++i) params.emplace_back("leaf" + std::to_string(i), leaves[i]);
    nd::GradCheckOptions opts;
    opts.probes = 100;
    opts.seed = seed;
    const auto r = nd::check_gradients(params, [&] { return run(false); }, [&] { run(true); }, opts);
    CHECK(r.max_rel_err <= 1e-3);
}

}  // namespace

TEST_CASE("matmul matches hand arithmetic") {
    Tape<double> tape;
    auto a = tape.constant(Matrix::from_rows({{1, 2}, {3, 4}}));
    auto b = tape.constant(Matrix::from_rows({{5}, {6}}));
    const auto& c = nd::matmul(a, b).value();
    CHECK(c == Matrix::from_rows({{17}, {39}}));

    auto m = tape.constant(random(2, 3, 4));
    CHECK(nd::matmul(tape.constant(Matrix::identity(2)), m).value() == m.value());
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tape<double> tape;
    auto a = tape.constant(Matrix(2, 3));
    auto b = tape.constant(Matrix(2, 3));
    try {
        nd::matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
    }
}

TEST_CASE("softmax rows") {
    Tape<double> tape;
    const auto s = nd::softmax_rows(tape.constant(Matrix::from_rows({{1, 2, 3}, {0, 0, 0}, {1000, 0, 0}}))).value();
    const auto expect = oracle::softmax({1, 2, 3});
    for (int j = 0; j < 3; ++j) CHECK(s(0, j) == doctest::Approx(expect[j]).epsilon(1e-12));
    CHECK(s(0, 0) == doctest::Approx(0.09003).epsilon(1e-4));
    CHECK(s(0, 1) == doctest::Approx(0.24473).epsilon(1e-4));
    CHECK(s(0, 2) == doctest::Approx(0.66524).epsilon(1e-4));
    for (int j = 0; j < 3; ++j) CHECK(s(1, j) == doctest::Approx(1.0 / 3));
    CHECK(s(2, 0) == doctest::Approx(1.0));
    CHECK(std::isfinite(s(2, 1)));

    const auto r = nd::softmax_rows(tape.constant(random(5, 7, 9, -30, 30))).value();
    for (std::size_t i = 0; i < 5; ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < 7; ++j) sum += r(i, j);
        CHECK(std::abs(sum - 1) < 1e-6);
    }

    Matrix bad(1, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(nd::softmax_rows(tape.constant(bad)), NumericError);
}

TEST_CASE("layer norm") {
    Tape<double> tape;
    auto gain = tape.constant(Matrix(1, 2, 1.0));
    auto bias = tape.constant(Matrix(1, 2, 0.0));
    const auto y = nd::layer_norm(tape.constant(Matrix::from_rows({{1, 3}})), gain, bias, 1e-12).value();
    CHECK(std::abs(y(0, 0) + 1) < 1e-6);
    CHECK(std::abs(y(0, 1) - 1) < 1e-6);

    auto g3 = tape.constant(Matrix(1, 3, 1.0));
    auto b3 = tape.constant(Matrix(1, 3, 0.0));
    const auto z = nd::layer_norm(tape.constant(Matrix(2, 3, 4.0)), g3, b3, 1e-5).value();
    for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("elementwise family") {
    Tape<double> tape;
    CHECK(nd::frobenius_sq(tape.constant(Matrix::from_rows({{3, 4}}))).value()(0, 0) == 25.0);
    auto a = tape.constant(random(3, 3, 2));
    for (double v : nd::sub(a, a).value().data()) CHECK(v == 0.0);
    CHECK_THROWS_AS(nd::add(a, tape.constant(Matrix(3, 2))), DimensionError);
    CHECK_THROWS_AS(nd::log(tape.constant(Matrix::from_rows({{1, 0}}))), NumericError);
    CHECK_THROWS_AS(nd::log(tape.constant(Matrix::from_rows({{-1, 2}}))), NumericError);

    const auto parts = nd::split_cols(tape.constant(Matrix::from_rows({{1, 2, 3, 4}})), 2);
    REQUIRE(parts.size() == 2);
    CHECK(parts[1].value() == Matrix::from_rows({{3, 4}}));
    CHECK(nd::concat_cols(parts).value() == Matrix::from_rows({{1, 2, 3, 4}}));
    CHECK(nd::transpose(tape.constant(Matrix::from_rows({{1, 2}}))).value() == Matrix::from_rows({{1}, {2}}));
    CHECK(nd::row_sum(tape.constant(Matrix::from_rows({{1, 2}, {3, 4}}))).value() == Matrix::from_rows({{3}, {7}}));
    CHECK(nd::relu(tape.constant(Matrix::from_rows({{-1, 2}}))).value() == Matrix::from_rows({{0, 2}}));
    const double g = nd::gelu(tape.constant(Matrix::from_rows({{1.0}}))).value()(0, 0);
    CHECK(g == doctest::Approx(0.5 * (1 + std::erf(1 / std::sqrt(2.0)))));
}

TEST_CASE("backward basics") {
    Matrix x = random(2, 3, 5);
    {
        Tape<double> tape;
        tape.backward(nd::sum(tape.watch(x)));
        for (double g : x.grad) CHECK(g == 1.0);
    }
    {
        x.grad.clear();
        Tape<double> tape;
        tape.backward(nd::frobenius_sq(tape.watch(x)));
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad[i] == doctest::Approx(2 * x.data()[i]));
    }
    {
        x.grad.clear();
        Tape<double> tape;
        auto v = tape.watch(x);
        tape.backward(nd::sum(nd::add(v, v)));
        for (double g : x.grad) CHECK(g == 2.0);
    }
    {
        Tape<double> tape;
        CHECK_THROWS_AS(tape.backward(tape.watch(x)), ContractError);
    }
    {
        // Repeated backward without reset accumulates.
        x.grad.clear();
        Tape<double> t1;
        t1.backward(nd::sum(t1.watch(x)));
        Tape<double> t2;
        t2.backward(nd::sum(t2.watch(x)));
        for (double g : x.grad) CHECK(g == 2.0);
    }
}

TEST_CASE("every differentiable op passes a finite-difference check") {
    Matrix a = random(3, 4, 11), b = random(4, 2, 12), c = random(3, 4, 13), p = random(3, 4, 14, 0.1, 2.0);
    Matrix row = random(1, 4, 15), gain = random(1, 4, 16, 0.5, 1.5), bias = random(1, 4, 17);
    Matrix bt = random(2, 4, 18);
    using V = std::vector<Var<double>>;
    check_op({&a, &b}, [](Tape<double>&, V& v) { return nd::frobenius_sq(nd::matmul(v[0], v[1])); });
    check_op({&a, &bt}, [](Tape<double>&, V& v) { return nd::frobenius_sq(nd::matmul_nt(v[0], v[1])); });
    check_op({&a, &c}, [](Tape<double>&, V& v) { return nd::frobenius_sq(nd::mul(nd::add(v[0], v[1]), nd::sub(v[0], v[1]))); });
    check_op({&a, &row}, [](Tape<double>&, V& v) { return nd::frobenius_sq(nd::add_row(v[0], v[1])); });
    check_op({&a}, [](Tape<double>&, V& v) { return nd::frobenius_sq(nd::scale(nd::transpose(v[0]), 0.7)); });
    check_op({&a}, [](Tape<double>&, V& v) { return nd::sum(nd::mul(nd::row_sum(v[0]), nd::row_sum(v[0]))); });
    check_op({&a}, [](Tape<double>&, V& v) {
        auto parts = nd::split_cols(v[0], 2);
        return nd::frobenius_sq(nd::concat_cols(std::vector<Var<double>>{nd::scale(parts[1], 2.0), parts[0]}));
    });
    check_op({&a}, [](Tape<double>&, V& v) { return nd::frobenius_sq(nd::slice_cols(v[0], 1, 2)); });
    check_op({&a}, [](Tape<double>&, V& v) { return nd::frobenius_sq(nd::gelu(v[0])); });
    check_op({&p}, [](Tape<double>&, V& v) { return nd::sum(nd::log(v[0])); });
    check_op({&p}, [](Tape<double>&, V& v) { return nd::sum(nd::log_floor(v[0], 1e-12)); });
    check_op({&a, &c}, [](Tape<double>&, V& v) { return nd::sum(nd::mul(nd::softmax_rows(v[0]), v[1])); });
    check_op({&a, &gain, &bias, &c}, [](Tape<double>&, V& v) {
        return nd::sum(nd::mul(nd::layer_norm(v[0], v[1], v[2], 1e-5), v[3]));
    });
}

TEST_CASE("relu gradient away from the kink") {
    Matrix a = Matrix::from_rows({{-1.5, 0.5, 2.0}});
    a.requires_grad = true;
    Tape<double> tape;
    tape.backward(nd::sum(nd::relu(tape.watch(a))));
    CHECK(a.grad == std::vector<double>{0, 1, 1});
}

TEST_CASE("adam") {
    Matrix p(1, 1, 1.0);
    p.requires_grad = true;
    nd::Adam<double> opt({&p}, {0.1, 0.9, 0.999, 1e-8});

    // Hand recurrence for g = 1: m = 0.1, v = 0.001, m̂ = 1, v̂ = 1, step = lr · 1 / (1 + eps).
    p.grad = {1.0};
    opt.step();
    CHECK(p(0, 0) - 1.0 == doctest::Approx(-0.1 / (1 + 1e-8)).epsilon(1e-12));
    CHECK(opt.step_count() == 1);
    CHECK(p.grad.empty());

    p.grad = {1.0};
    opt.step();
    CHECK(opt.step_count() == 2);

    Matrix q(2, 2, 3.0);
    q.requires_grad = true;
    nd::Adam<double> opt2({&q}, {});
    q.grad.assign(4, 0.0);
    opt2.step();
    for (double v : q.data()) CHECK(v == 3.0);

    CHECK_THROWS_AS(opt2.step(), ContractError);
}

TEST_CASE("tape is deterministic") {
    Matrix a = random(4, 4, 21), b = random(4, 4, 22);
    auto run = [&] {
        Tape<double> tape;
        return nd::softmax_rows(nd::matmul(tape.watch(a), tape.watch(b))).value();
    };
    CHECK(run() == run());
}
