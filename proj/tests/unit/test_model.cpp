#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "convert.hpp"
#include "madt/model/checkpoint.hpp"
#include "madt/model/forward.hpp"
#include "madt/ndgrad/ops.hpp"

using namespace madt;
using model::ModelConfig;
using model::ModelState;

namespace {

ModelConfig tiny(std::size_t w = 6, std::size_t n = 3, std::size_t d = 8, std::size_t h = 2, std::size_t k = 2) {
    ModelConfig c;
    c.window = w;
    c.sensors = n;
    c.d_model = d;
    c.heads = h;
    c.layers = k;
    return c;
}

statemat::TimeWindow random_window(std::size_t w, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    statemat::TimeWindow win;
    win.values = testutil::to_matrix(oracle::random_matrix(w, n, rng));
    return win;
}

template <typename Real>
void fill(nd::Tensor2<Real>& t, Real v) {
    for (auto& x : t.storage()) x = v;
}

}  // namespace

TEST_CASE("config validation and parameter count") {
    auto c = tiny();
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = tiny();
    c.layers = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);

    for (auto cfg : {tiny(), tiny(10, 4, 12, 3, 1), ModelConfig::desk(7), ModelConfig::large(25)}) {
        for (int mask = 0; mask < 4; ++mask) {
            cfg.temporal_branch = mask & 1;
            cfg.spatial_branch = mask & 2;
            auto st = ModelState<float>::initialize(cfg, 1);
            std::size_t allocated = 0;
            for (const auto& [name, p] : st.parameters()) allocated += p->size();
            CHECK(allocated == model::parameter_count(cfg));
        }
    }
}

TEST_CASE("forward shapes, determinism and row-stochastic maps") {
    const auto cfg = tiny();
    const auto st = ModelState<double>::initialize(cfg, 4);
    const auto win = random_window(cfg.window, cfg.sensors, 5);
    const auto pair = statemat::build_state_matrices(win);
    const auto out = model::forward_values(st, win, pair);
    CHECK(out.x_rec.rows() == cfg.window);
    CHECK(out.x_rec.cols() == cfg.sensors);
    CHECK(out.t_rec.rows() == cfg.window);
    CHECK(out.t_rec.cols() == cfg.window);
    CHECK(out.s_rec.rows() == cfg.sensors);
    CHECK(out.s_rec.cols() == cfg.sensors);
    REQUIRE(out.maps.layers() == cfg.layers);
    for (std::size_t k = 0; k < cfg.layers; ++k) {
        CHECK(out.maps.seri[k].rows() == cfg.window);
        CHECK(out.maps.temp[k].cols() == cfg.window);
        CHECK(out.maps.space[k].rows() == cfg.sensors);
        for (const auto* m : {&out.maps.seri[k], &out.maps.temp[k], &out.maps.space[k]})
            for (std::size_t i = 0; i < m->rows(); ++i) {
                double s = 0;
                for (std::size_t j = 0; j < m->cols(); ++j) s += (*m)(i, j);
                CHECK(std::abs(s - 1) < 1e-5);
            }
    }
    const auto again = model::forward_values(st, win, pair);
    CHECK(again.x_rec == out.x_rec);
    CHECK(again.t_rec == out.t_rec);
    CHECK(again.maps.space[1] == out.maps.space[1]);
}

TEST_CASE("embed rejects wrong shapes") {
    const auto cfg = tiny();
    auto st = ModelState<double>::initialize(cfg, 1);
    nd::Tape<double> tape;
    auto x = tape.constant(nd::Matrix(cfg.window, cfg.sensors + 1));
    auto t = tape.constant(nd::Matrix(cfg.window, cfg.window));
    auto s = tape.constant(nd::Matrix(cfg.sensors, cfg.sensors));
    CHECK_THROWS_AS(model::embed(tape, st, x, t, s), DimensionError);
}

TEST_CASE("zero weights leave only the bias path in embed") {
    const auto cfg = tiny();
    auto st = ModelState<double>::initialize(cfg, 2);
    for (auto& enc : st.encoders)
        for (auto& stage : enc.stages) fill(stage.weight, 0.0);
    const auto win = random_window(cfg.window, cfg.sensors, 3);
    const auto pair = statemat::build_state_matrices(win);
    nd::Tape<double> tape;
    const auto streams = model::embed(tape, st, tape.watch(win.values), tape.watch(pair.temporal), tape.watch(pair.spatial));
    const auto& h = streams.series.value();
    const auto& b = st.encoders[0].stages[2].bias;
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) CHECK(h(i, j) == b(0, j));
}

TEST_CASE("uniform attention averages the value rows") {
    auto cfg = tiny(5, 3, 4, 1, 1);
    auto st = ModelState<double>::initialize(cfg, 3);
    auto& attn = st.layers[0].branch[0].attn;
    fill(attn.wq, 0.0);
    fill(attn.wk, 0.0);
    attn.wv = nd::Matrix::identity(4);
    attn.out.weight = nd::Matrix::identity(4);
    fill(attn.out.bias, 0.0);

    std::mt19937_64 rng(1);
    const auto h_in = testutil::to_matrix(oracle::random_matrix(5, 4, rng));
    nd::Tape<double> tape;
    model::Streams<double> in;
    in.series = tape.watch(h_in);
    const auto r = model::mad_attention(tape, st.layers[0], in, cfg);
    const auto& out = r.streams.series.value();
    for (std::size_t j = 0; j < 4; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < 5; ++i) mean += h_in(i, j) / 5.0;
        for (std::size_t i = 0; i < 5; ++i) CHECK(out(i, j) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("zero attention and feed-forward weights reduce a layer to two layer norms") {
    const auto cfg = tiny(5, 3, 4, 2, 1);
    auto st = ModelState<double>::initialize(cfg, 6);
    auto& bl = st.layers[0].branch[0];
    for (auto* t : {&bl.attn.wq, &bl.attn.wk, &bl.attn.wv, &bl.attn.out.weight, &bl.attn.out.bias, &bl.ff_up.weight,
                    &bl.ff_up.bias, &bl.ff_down.weight, &bl.ff_down.bias})
        fill(*t, 0.0);
    std::mt19937_64 rng(2);
    const auto h_in = testutil::to_matrix(oracle::random_matrix(5, 4, rng));
    nd::Tape<double> tape;
    model::Streams<double> in;
    in.series = tape.watch(h_in);
    const auto out = model::layer_forward(tape, st.layers[0], in, cfg).streams.series.value();

    auto ln = [&](const oracle::Mat& m) {
        oracle::Mat r = m;
        for (auto& row : r) {
            double mu = 0, var = 0;
            for (double v : row) mu += v / double(row.size());
            for (double v : row) var += (v - mu) * (v - mu) / double(row.size());
            for (auto& v : row) v = (v - mu) / std::sqrt(var + cfg.ln_eps);
        }
        return r;
    };
    const auto expect = ln(ln(testutil::to_mat(h_in)));
    CHECK(testutil::max_abs_diff_mat(testutil::to_mat(out), expect) < 1e-10);
}

TEST_CASE("attention follows the per-head algorithm literally") {
    const auto cfg = tiny(4, 3, 4, 2, 1);
    const auto st = ModelState<double>::initialize(cfg, 99);
    std::mt19937_64 rng(7);
    const auto hx = oracle::random_matrix(4, 4, rng), ht = oracle::random_matrix(4, 4, rng),
               hs = oracle::random_matrix(3, 4, rng);
    nd::Tape<double> tape;
    model::Streams<double> in;
    const auto mx = testutil::to_matrix(hx), mt = testutil::to_matrix(ht), ms = testutil::to_matrix(hs);
    in.series = tape.watch(mx);
    in.temporal = tape.watch(mt);
    in.spatial = tape.watch(ms);
    const auto r = model::mad_attention(tape, st.layers[0], in, cfg);

    const oracle::Mat* inputs[3] = {&hx, &ht, &hs};
    const nd::Var<double> outs[3] = {r.streams.series, r.streams.temporal, r.streams.spatial};
    const nd::Var<double> maps[3] = {r.maps.seri, r.maps.temp, r.maps.space};
    for (int b = 0; b < 3; ++b) {
        const auto& p = st.layers[0].branch[b].attn;
        const auto bias = testutil::to_mat(p.out.bias)[0];
        const auto ref = oracle::attention(*inputs[b], testutil::to_mat(p.wq), testutil::to_mat(p.wk),
                                           testutil::to_mat(p.wv), testutil::to_mat(p.out.weight), bias, cfg.heads);
        CHECK(testutil::max_abs_diff_mat(testutil::to_mat(outs[b].value()), ref.out) < 1e-10);
        CHECK(testutil::max_abs_diff_mat(testutil::to_mat(maps[b].value()), ref.map) < 1e-10);
    }
}

TEST_CASE("disabled branches produce no temporal or spatial outputs") {
    auto cfg = tiny();
    cfg.temporal_branch = false;
    const auto st = ModelState<float>::initialize(cfg, 1);
    const auto win = random_window(cfg.window, cfg.sensors, 2);
    const auto out = model::forward_values(st, win, statemat::build_state_matrices(win));
    CHECK(out.t_rec.empty());
    CHECK(out.maps.temp.empty());
    CHECK(out.maps.space.size() == cfg.layers);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const auto cfg = tiny();
    const auto st = ModelState<float>::initialize(cfg, 12);
    const auto path = std::filesystem::temp_directory_path() / "madt_model_roundtrip.madt";
    model::Container c;
    model::store_state(c, st);
    c.meta["note"] = "with spaces in value";
    c.put("extra", nd::Matrix::from_rows({{1.5, -2.25}}));
    model::write_container(path, c);
    const auto back = model::read_container(path);
    CHECK(back.meta_at("note") == "with spaces in value");
    CHECK(back.get<double>("extra") == nd::Matrix::from_rows({{1.5, -2.25}}));
    const auto loaded = model::load_state<float>(back);

    const auto a = st.parameters(true), b = loaded.parameters(true);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(*a[i].second == *b[i].second);
    }
    const auto win = random_window(cfg.window, cfg.sensors, 3);
    const auto pair = statemat::build_state_matrices(win);
    const auto o1 = model::forward_values(st, win, pair), o2 = model::forward_values(loaded, win, pair);
    CHECK(o1.x_rec == o2.x_rec);
    CHECK(o1.t_rec == o2.t_rec);
    CHECK(o1.s_rec == o2.s_rec);
    std::filesystem::remove(path);
}

TEST_CASE("container rejects corrupt files") {
    const auto path = std::filesystem::temp_directory_path() / "madt_corrupt.madt";
    {
        std::ofstream f(path);
        f << "NOT-A-CONTAINER\n";
    }
    CHECK_THROWS_AS(model::read_container(path), InputError);
    CHECK_THROWS_AS(model::read_container(path.string() + ".missing"), InputError);
    std::filesystem::remove(path);
}
