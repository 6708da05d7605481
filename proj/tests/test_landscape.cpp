#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "rose/landscape.hpp"
#include "rose/model.hpp"
#include "rose/risk.hpp"
#include "rose/rng.hpp"

using namespace rose;
using model::Dataset;
using model::ModelSpec;
using model::ParamSet;

namespace {

ModelSpec probe_spec() {
    ModelSpec s;
    s.input_dim = 4;
    s.hidden_dims = {16, 16};
    s.classes = 3;
    s.activation = model::Activation::tanh;
    s.dropout_rate = 0.0;
    return s;
}

Dataset sample_dataset(std::uint64_t key, std::size_t n, std::size_t dim, std::size_t classes) {
    rng::Stream s(key);
    Dataset d;
    d.x = Tensor::zeros({n, dim});
    for (double& v : d.x.data) v = s.next_gaussian();
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.y[i] = s.next_u64() % classes;
    return d;
}

std::vector<double> flatten(const std::vector<Tensor>& ts) {
    std::vector<double> out;
    for (const Tensor& t : ts) out.insert(out.end(), t.data.begin(), t.data.end());
    return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST_CASE("line endpoints reproduce the stored losses exactly") {
    const ModelSpec spec = probe_spec();
    const ParamSet a = model::init_params(spec, 1);
    const ParamSet b = model::init_params(spec, 2);
    const Dataset data = sample_dataset(3, 32, 4, 3);

    const double la = landscape::dataset_loss(spec, a, data);
    const double lb = landscape::dataset_loss(spec, b, data);
    CHECK(landscape::line_loss(spec, a, b, 0.0, data) == la);
    CHECK(landscape::line_loss(spec, a, b, 1.0, data) == lb);
    CHECK(landscape::line_loss(spec, a, b, 0.5, data) ==
          landscape::line_loss(spec, a, b, 0.5, data));
}

TEST_CASE("the 1d grid spans [-0.5, 1.5] with 51 points") {
    const ModelSpec spec = probe_spec();
    const ParamSet a = model::init_params(spec, 1);
    const ParamSet b = model::init_params(spec, 2);
    const Dataset data = sample_dataset(3, 16, 4, 3);

    const landscape::Grid1D curve = landscape::interp_1d(spec, a, b, data);
    REQUIRE(curve.alphas.size() == landscape::kGridPoints);
    REQUIRE(curve.losses.size() == landscape::kGridPoints);
    REQUIRE(curve.accuracies.size() == landscape::kGridPoints);
    CHECK(curve.alphas.front() == landscape::kLo1D);
    CHECK(curve.alphas.back() == landscape::kHi1D);
    for (std::size_t i = 1; i < curve.alphas.size(); ++i) {
        CHECK(curve.alphas[i] > curve.alphas[i - 1]);
    }
    for (std::size_t i : {std::size_t{0}, std::size_t{17}, std::size_t{50}}) {
        CHECK(curve.losses[i] == landscape::line_loss(spec, a, b, curve.alphas[i], data));
    }
    for (double acc : curve.accuracies) {
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
}

TEST_CASE("direction samples are filter-normalized per group") {
    const ModelSpec spec = probe_spec();
    const ParamSet p = model::init_params(spec, 4);
    const landscape::DirectionPair dirs = landscape::sample_directions(p, 9);

    REQUIRE(dirs.delta.size() == p.group_count());
    REQUIRE(dirs.eta.size() == p.group_count());
    for (std::size_t g = 0; g < p.group_count(); ++g) {
        const double pn = risk::frobenius_norm(p.tensors[g]);
        const double dn = risk::frobenius_norm(dirs.delta[g]);
        const double en = risk::frobenius_norm(dirs.eta[g]);
        if (pn == 0.0) {
            // Fresh bias groups are zero; their directions must vanish too.
            CHECK(dn == 0.0);
            CHECK(en == 0.0);
        } else {
            CHECK(std::fabs(dn - pn) <= 1e-12 * pn);
            CHECK(std::fabs(en - pn) <= 1e-12 * pn);
        }
    }

    const std::vector<double> fd = flatten(dirs.delta);
    const std::vector<double> fe = flatten(dirs.eta);
    CHECK(fd != fe);
    CHECK(std::fabs(cosine(fd, fe)) < 0.2);

    const landscape::DirectionPair again = landscape::sample_directions(p, 9);
    CHECK(std::memcmp(flatten(again.delta).data(), fd.data(), fd.size() * sizeof(double)) == 0);
    const landscape::DirectionPair other = landscape::sample_directions(p, 10);
    CHECK(flatten(other.delta) != fd);
}

TEST_CASE("the surface origin reproduces the center loss exactly") {
    const ModelSpec spec = probe_spec();
    const ParamSet p = model::init_params(spec, 5);
    const Dataset data = sample_dataset(6, 24, 4, 3);
    const landscape::DirectionPair dirs = landscape::sample_directions(p, 11);

    const double center = landscape::dataset_loss(spec, p, data);
    CHECK(landscape::surface_loss(spec, p, dirs, 0.0, 0.0, data) == center);
    CHECK(landscape::surface_loss(spec, p, dirs, 0.1, -0.1, data) !=
          doctest::Approx(center).epsilon(1e-15));
}

TEST_CASE("surface_2d emits the full 51x51 grid with an exact center") {
    const ModelSpec spec = probe_spec();
    const ParamSet p = model::init_params(spec, 7);
    const Dataset data = sample_dataset(8, 24, 4, 3);

    landscape::DirectionPair dirs;
    const landscape::Grid2D grid = landscape::surface_2d(spec, p, data, 13, &dirs);
    REQUIRE(grid.alphas.size() == landscape::kGridPoints);
    REQUIRE(grid.betas.size() == landscape::kGridPoints);
    REQUIRE(grid.losses.size() == landscape::kGridPoints * landscape::kGridPoints);
    CHECK(grid.alphas.front() == landscape::kLo2D);
    CHECK(grid.alphas.back() == landscape::kHi2D);
    CHECK(grid.alphas[25] == 0.0);
    CHECK(grid.betas[25] == 0.0);
    CHECK(grid.losses[25 * 51 + 25] == landscape::dataset_loss(spec, p, data));
    CHECK_FALSE(dirs.delta.empty());

    const landscape::FlatnessSummary flat = landscape::flatness_summary(grid);
    CHECK(flat.center_loss == grid.losses[25 * 51 + 25]);
    CHECK(flat.boundary_mean > 0.0);
    CHECK(flat.basin_fraction > 0.0);
    CHECK(flat.basin_fraction <= 1.0);
}

TEST_CASE("flatness_summary matches a hand-computed 3x3 grid") {
    landscape::Grid2D g;
    g.alphas = {-1.0, 0.0, 1.0};
    g.betas = {-1.0, 0.0, 1.0};
    g.losses = {1.0, 2.0, 3.0, 4.0, 0.5, 6.0, 7.0, 8.0, 0.2};

    const landscape::FlatnessSummary flat = landscape::flatness_summary(g);
    CHECK(flat.center_loss == 0.5);
    // Boundary excludes only the center cell.
    const double want = (1.0 + 2.0 + 3.0 + 4.0 + 6.0 + 7.0 + 8.0 + 0.2) / 8.0;
    CHECK(flat.boundary_mean == doctest::Approx(want).epsilon(1e-12));
    // Cells at or below 2 * 0.5: the 1.0, the 0.5, and the 0.2.
    CHECK(flat.basin_fraction == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("structure mismatches and malformed grids are rejected") {
    const ModelSpec spec = probe_spec();
    ModelSpec other = spec;
    other.hidden_dims = {16};
    const ParamSet a = model::init_params(spec, 1);
    const ParamSet c = model::init_params(other, 1);
    const Dataset data = sample_dataset(3, 8, 4, 3);

    CHECK_THROWS_AS(landscape::line_loss(spec, a, c, 0.5, data), std::invalid_argument);
    CHECK_THROWS_AS(landscape::interp_1d(spec, a, c, data), std::invalid_argument);

    const Dataset empty;
    CHECK_THROWS_AS(landscape::dataset_loss(spec, a, empty), std::invalid_argument);

    landscape::Grid2D bad;
    bad.alphas = {0.0, 1.0};
    bad.betas = {0.0, 1.0};
    bad.losses = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(landscape::flatness_summary(bad), std::invalid_argument);
}
