#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "rose/model.hpp"
#include "rose/tape.hpp"

using namespace rose;
using model::ModelSpec;
using model::ParamSet;

namespace {

ModelSpec small_spec() {
    ModelSpec s;
    s.input_dim = 4;
    s.hidden_dims = {8, 6};
    s.classes = 3;
    s.activation = model::Activation::tanh;
    s.dropout_rate = 0.5;
    return s;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace

TEST_CASE("init_params lays out named groups in declaration order") {
    const ParamSet p = model::init_params(small_spec(), 1);
    REQUIRE(p.group_count() == 6);
    CHECK(p.names == std::vector<std::string>{"layer0.weight", "layer0.bias", "layer1.weight",
                                              "layer1.bias", "out.weight", "out.bias"});
    CHECK(p.tensors[0].shape == std::vector<std::size_t>{4, 8});
    CHECK(p.tensors[1].shape == std::vector<std::size_t>{1, 8});
    CHECK(p.tensors[2].shape == std::vector<std::size_t>{8, 6});
    CHECK(p.tensors[3].shape == std::vector<std::size_t>{1, 6});
    CHECK(p.tensors[4].shape == std::vector<std::size_t>{6, 3});
    CHECK(p.tensors[5].shape == std::vector<std::size_t>{1, 3});
    CHECK(p.total_scalar_count() == 4 * 8 + 8 + 8 * 6 + 6 + 6 * 3 + 3);
    CHECK(p.index_of("out.weight") == 4);
    CHECK_THROWS(p.index_of("nope"));
}

TEST_CASE("init draws weights within the fan-in bound and zeroes biases") {
    const ModelSpec spec = small_spec();
    const ParamSet p = model::init_params(spec, 7);
    for (std::size_t g = 0; g < p.group_count(); ++g) {
        const bool is_bias = p.names[g].find(".bias") != std::string::npos;
        const double bound = is_bias ? 0.0 : 1.0 / std::sqrt(static_cast<double>(
                                                 p.tensors[g].shape[0]));
        for (double v : p.tensors[g].data) {
            CHECK(std::fabs(v) <= bound);
        }
    }
    // Same seed reproduces bit for bit; another seed differs somewhere.
    const ParamSet q = model::init_params(spec, 7);
    for (std::size_t g = 0; g < p.group_count(); ++g) {
        CHECK(bits_equal(p.tensors[g].data, q.tensors[g].data));
    }
    const ParamSet r = model::init_params(spec, 8);
    CHECK_FALSE(bits_equal(p.tensors[0].data, r.tensors[0].data));
}

TEST_CASE("hand-checked forward through one hidden layer") {
    ModelSpec spec;
    spec.input_dim = 2;
    spec.hidden_dims = {2};
    spec.classes = 2;
    spec.dropout_rate = 0.0;

    ParamSet p;
    p.names = {"layer0.weight", "layer0.bias", "out.weight", "out.bias"};
    p.tensors = {Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}), Tensor({1, 2}, {0.5, -0.5}),
                 Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}), Tensor({1, 2}, {0.1, -0.1})};

    const Tensor x({1, 2}, {1.0, 0.5});
    const Tensor logits = model::eval_logits(spec, p, x);
    const double h0 = std::tanh(1.0 + 0.5);
    const double h1 = std::tanh(0.5 - 0.5);
    CHECK(logits.at(0, 0) == doctest::Approx(h0 * 1.0 + h1 * 3.0 + 0.1).epsilon(1e-14));
    CHECK(logits.at(0, 1) == doctest::Approx(h0 * 2.0 + h1 * 4.0 - 0.1).epsilon(1e-14));
}

TEST_CASE("dropout masks are inverted-scaled, keyed, and balanced") {
    const rng::DropoutKey key{5, 3, 0};
    const std::size_t n = 20000;
    const std::vector<double> mask = model::dropout_mask(key, 0, n, 0.5);
    std::size_t kept = 0;
    for (double m : mask) {
        CHECK((m == 0.0 || m == 2.0));
        if (m != 0.0) ++kept;
    }
    // 3-sigma band around half.
    CHECK(kept > n / 2 - 3 * 71);
    CHECK(kept < n / 2 + 3 * 71);

    CHECK(model::dropout_mask(key, 0, n, 0.5) == mask);             // pure function
    CHECK(model::dropout_mask(key, 1, n, 0.5) != mask);             // site matters
    CHECK(model::dropout_mask({5, 3, 1}, 0, n, 0.5) != mask);       // pass matters
    const std::vector<double> all_on = model::dropout_mask(key, 0, 8, 0.0);
    CHECK(all_on == std::vector<double>(8, 1.0));
    CHECK_THROWS(model::dropout_mask(key, 0, 8, 1.0));
}

TEST_CASE("clean forward equals eval_logits; dropout forward differs") {
    const ModelSpec spec = small_spec();
    const ParamSet p = model::init_params(spec, 3);
    rng::Stream s(99);
    Tensor x = Tensor::zeros({6, 4});
    for (double& v : x.data) v = s.next_gaussian();

    autograd::Tape tape;
    const model::ForwardNodes f = model::build_forward(tape, spec, p, x, nullptr);
    const auto& clean = tape.node(f.logits).val;
    CHECK(bits_equal(clean, model::eval_logits(spec, p, x).data));

    const model::DropoutContext ctx{{1, 1, 0}, spec.dropout_rate};
    autograd::Tape tape2;
    const model::ForwardNodes fd = model::build_forward(tape2, spec, p, x, &ctx);
    CHECK_FALSE(bits_equal(tape2.node(fd.logits).val, clean));

    // Same dropout key reproduces the same perturbed logits.
    autograd::Tape tape3;
    const model::ForwardNodes fd2 = model::build_forward(tape3, spec, p, x, &ctx);
    CHECK(bits_equal(tape3.node(fd2.logits).val, tape2.node(fd.logits).val));
}

TEST_CASE("reused parameter nodes make both passes differentiable at once") {
    const ModelSpec spec = small_spec();
    const ParamSet p = model::init_params(spec, 4);
    rng::Stream s(17);
    Tensor x = Tensor::zeros({3, 4});
    for (double& v : x.data) v = s.next_gaussian();

    autograd::Tape tape;
    const auto count_params = [&tape] {
        std::size_t c = 0;
        for (std::size_t i = 0; i < tape.size(); ++i) {
            if (tape.node(static_cast<autograd::NodeId>(i)).kind == autograd::OpKind::param) ++c;
        }
        return c;
    };
    const model::ForwardNodes f0 = model::build_forward(tape, spec, p, x, nullptr);
    const std::size_t params_before = count_params();
    const model::ForwardNodes f1 = model::build_forward(tape, spec, p, x, nullptr, &f0.params);
    CHECK(f1.params == f0.params);
    // The reusing pass must not re-register parameter nodes.
    CHECK(count_params() == params_before);
}

TEST_CASE("argmax breaks ties toward the lower class index") {
    const Tensor logits({3, 3}, {1.0, 1.0, 0.0, 0.0, 2.0, 2.0, -1.0, -2.0, -0.5});
    CHECK(model::argmax_rows(logits) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("accuracy counts exact matches") {
    ModelSpec spec;
    spec.input_dim = 2;
    spec.hidden_dims = {2};
    spec.classes = 2;
    spec.dropout_rate = 0.0;
    ParamSet p;
    p.names = {"layer0.weight", "layer0.bias", "out.weight", "out.bias"};
    // Logit margin follows the sign of x0.
    p.tensors = {Tensor({2, 2}, {5.0, 0.0, 0.0, 0.0}), Tensor({1, 2}, {0.0, 0.0}),
                 Tensor({2, 2}, {-1.0, 1.0, 0.0, 0.0}), Tensor({1, 2}, {0.0, 0.0})};
    model::Dataset d;
    d.x = Tensor({4, 2}, {1.0, 0.0, -1.0, 0.0, 2.0, 0.0, -2.0, 0.0});
    d.y = {1, 0, 1, 1};
    CHECK(model::accuracy(spec, p, d) == doctest::Approx(0.75));
}

TEST_CASE("forward validates shapes and group counts") {
    const ModelSpec spec = small_spec();
    const ParamSet p = model::init_params(spec, 1);
    autograd::Tape tape;
    CHECK_THROWS(model::build_forward(tape, spec, p, Tensor::zeros({2, 5}), nullptr));
    ParamSet bad = p;
    bad.names.pop_back();
    bad.tensors.pop_back();
    CHECK_THROWS(model::build_forward(tape, spec, bad, Tensor::zeros({2, 4}), nullptr));
    ModelSpec invalid = spec;
    invalid.hidden_dims.clear();
    CHECK_THROWS(invalid.validate());
}
