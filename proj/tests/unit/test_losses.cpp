#include <doctest.h>

#include <cmath>
#include <random>

#include "convert.hpp"
#include "madt/losses/losses.hpp"

using namespace madt;

namespace {

model::AssociationMaps random_maps(std::size_t w, std::size_t n, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    model::AssociationMaps m;
    for (std::size_t l = 0; l < k; ++l) {
        m.seri.push_back(testutil::to_matrix(oracle::random_stochastic(w, w, rng)));
        m.temp.push_back(testutil::to_matrix(oracle::random_stochastic(w, w, rng)));
        m.space.push_back(testutil::to_matrix(oracle::random_stochastic(n, n, rng)));
    }
    return m;
}

std::vector<oracle::Mat> as_mats(const std::vector<nd::Matrix>& v) {
    std::vector<oracle::Mat> out;
    for (const auto& m : v) out.push_back(testutil::to_mat(m));
    return out;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST_CASE("mass aggregation resampling") {
    const auto r = losses::resample_matrix(4, 2);
    const auto q = oracle::matmul({{0.1, 0.2, 0.3, 0.4}}, testutil::to_mat(r));
    CHECK(q[0][0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(q[0][1] == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(losses::resample_matrix(5, 5) == nd::Matrix::identity(5));

    std::mt19937_64 rng(2);
    for (std::size_t m : {3u, 7u, 10u, 100u})
        for (std::size_t bins : {1u, 2u, 3u, 7u}) {
            if (bins > m) continue;
            const auto a = losses::resample_matrix(m, bins);
            for (std::size_t i = 0; i < m; ++i) {
                double s = 0;
                for (std::size_t j = 0; j < bins; ++j) s += a(i, j);
                CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
            }
            const auto v = oracle::random_stochastic(1, m, rng)[0];
            const auto got = oracle::matmul({v}, testutil::to_mat(a))[0];
            CHECK(max_diff(got, oracle::resample(v, bins)) < 1e-14);
        }
    CHECK_THROWS_AS(losses::resample_matrix(0, 1), ParameterError);
}

TEST_CASE("symmetric KL with the log floor") {
    const auto p = nd::Matrix::from_rows({{1.0, 0.0}});
    const auto q = nd::Matrix::from_rows({{0.5, 0.5}});
    const double expect = 0.5 * std::log(2.0) + (-0.5) * (std::log(1e-12) - std::log(0.5));
    CHECK(losses::sym_kl_rows(p, q)[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(losses::sym_kl_rows(q, p)[0] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(losses::sym_kl_rows(q, q)[0] == 0.0);
    CHECK_THROWS_AS(losses::sym_kl_rows(p, nd::Matrix::from_rows({{1.0, 0.0, 0.0}})), DimensionError);
}

TEST_CASE("alignment terms match the oracles") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto maps = random_maps(6, 4, 2, seed);
        const auto seri = as_mats(maps.seri), temp = as_mats(maps.temp), space = as_mats(maps.space);
        CHECK(max_diff(losses::align_seri_temp(maps), oracle::align_seri_temp(seri, temp)) < 1e-12);
        CHECK(max_diff(losses::align_space_seri_rowwise(maps), oracle::align_space_seri_rowwise(space, seri)) < 1e-12);
        CHECK(losses::cross_dim_kl(maps.seri[0], maps.space[1]) ==
              doctest::Approx(oracle::cross_dim_kl(seri[0], space[1])).epsilon(1e-12));
        CHECK(max_diff(losses::cross_dim_kl_rowwise(maps.temp[1], maps.space[0]),
                       oracle::cross_dim_kl_rowwise(temp[1], space[0])) < 1e-12);
    }
}

TEST_CASE("identical maps give zero alignment and K layers are averaged") {
    auto maps = random_maps(5, 3, 1, 9);
    maps.temp[0] = maps.seri[0];
    for (double v : losses::align_seri_temp(maps)) CHECK(v == 0.0);

    auto two = random_maps(5, 3, 2, 11);
    auto first = two, second = two;
    first.seri.resize(1), first.temp.resize(1), first.space.resize(1);
    second.seri.erase(second.seri.begin()), second.temp.erase(second.temp.begin()),
        second.space.erase(second.space.begin());
    const auto a = losses::align_seri_temp(first), b = losses::align_seri_temp(second),
               both = losses::align_seri_temp(two);
    for (std::size_t i = 0; i < both.size(); ++i) CHECK(both[i] == doctest::Approx((a[i] + b[i]) / 2).epsilon(1e-13));
}

TEST_CASE("reconstruction and total loss") {
    model::ForwardOutput out;
    out.x_rec = nd::Matrix(3, 2);
    out.t_rec = nd::Matrix(3, 3);
    out.s_rec = nd::Matrix(2, 2);
    auto x = nd::Matrix(3, 2);
    x(1, 1) = 3.0;
    const auto r = losses::reconstruction_loss(out, x, nd::Matrix(3, 3), nd::Matrix(2, 2));
    CHECK(r.x == 9.0);
    CHECK(r.t == 0.0);
    CHECK(r.s == 0.0);

    losses::LossBreakdown parts;
    parts.recon_x = 2, parts.recon_t = 3, parts.align_st = 0.5, parts.align_ssp = 0.25;
    CHECK(losses::total_loss(parts, 0.0) == 5.0);
    CHECK(losses::total_loss(parts, 19.0) == doctest::Approx(5.0 + 19.0 * 0.75));
    CHECK_THROWS_AS(losses::total_loss(parts, -1.0), ParameterError);
    CHECK_THROWS_AS(losses::reconstruction_loss(out, nd::Matrix(2, 2), nd::Matrix(3, 3), nd::Matrix(2, 2)),
                    DimensionError);
}

TEST_CASE("tape and plain totals agree") {
    const auto maps = random_maps(6, 4, 2, 21);
    std::mt19937_64 rng(4);
    model::ForwardOutput out;
    out.x_rec = testutil::to_matrix(oracle::random_matrix(6, 4, rng));
    out.t_rec = testutil::to_matrix(oracle::random_matrix(6, 6, rng));
    out.s_rec = testutil::to_matrix(oracle::random_matrix(4, 4, rng));
    out.maps = maps;
    const auto x = testutil::to_matrix(oracle::random_matrix(6, 4, rng));
    const auto t = testutil::to_matrix(oracle::random_matrix(6, 6, rng));
    const auto s = testutil::to_matrix(oracle::random_matrix(4, 4, rng));

    nd::Tape<double> tape;
    model::ForwardGraph<double> g;
    g.x_rec = tape.watch(out.x_rec);
    g.t_rec = tape.watch(out.t_rec);
    g.s_rec = tape.watch(out.s_rec);
    for (std::size_t k = 0; k < 2; ++k)
        g.maps.push_back({tape.watch(maps.seri[k]), tape.watch(maps.temp[k]), tape.watch(maps.space[k])});
    for (double lambda : {0.0, 1.0, 19.0}) {
        const auto terms = losses::total_loss(g, tape.watch(x), tape.watch(t), tape.watch(s), lambda);
        const auto plain = losses::evaluate_losses(out, x, t, s, lambda);
        CHECK(terms.total.value()(0, 0) == doctest::Approx(plain.total).epsilon(1e-12));
        CHECK(terms.align_st.value()(0, 0) == doctest::Approx(plain.align_st).epsilon(1e-12));
    }
}

TEST_CASE("degenerate or incompatible maps are rejected") {
    const auto one = nd::Matrix::from_rows({{1.0}});
    const auto good = nd::Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
    const auto rect = nd::Matrix::from_rows({{0.5, 0.5}});
    CHECK_THROWS_AS(losses::cross_dim_kl(one, good), ParameterError);
    CHECK_THROWS_AS(losses::cross_dim_kl(rect, good), DimensionError);
    CHECK_THROWS_AS(losses::cross_dim_kl_rowwise(good, one), ParameterError);

    model::AssociationMaps empty;
    CHECK_THROWS_AS(losses::align_seri_temp(empty), ParameterError);
}
