#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rose/losses.hpp"
#include "rose/rng.hpp"
#include "rose/tape.hpp"

using namespace rose;
using autograd::NodeId;
using autograd::Tape;
using losses::ProbDist;

namespace {

ProbDist random_dist(std::uint64_t key, std::size_t rows, std::size_t cols) {
    rng::Stream s(key);
    Tensor t = Tensor::zeros({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            t.data[r * cols + c] = std::exp(s.next_gaussian());
            sum += t.data[r * cols + c];
        }
        for (std::size_t c = 0; c < cols; ++c) t.data[r * cols + c] /= sum;
    }
    return ProbDist{t};
}

}  // namespace

TEST_CASE("sce_loss is the mean negative log-likelihood") {
    Tape tape;
    const NodeId logits = tape.input(Tensor({2, 2}, {1.0, 2.0, 3.0, 1.0}));
    NodeId logp = -1;
    const NodeId loss = losses::sce_loss(tape, logits, {1, 0}, &logp);
    const double want =
        0.5 * (std::log1p(std::exp(-1.0)) + std::log1p(std::exp(-2.0)));
    CHECK(tape.value(loss) == doctest::Approx(want).epsilon(1e-12));
    CHECK(tape.node(logp).kind == autograd::OpKind::log_softmax);

    const NodeId again = losses::sce_from_logp(tape, logp, {1, 0});
    CHECK(tape.value(again) == tape.value(loss));
}

TEST_CASE("hand value: sym KL of (0.5,0.5) vs (0.9,0.1) is 0.8 ln 3") {
    // Logits (0,0) and (log 9, 0) soft-max to exactly those distributions.
    Tape tape;
    const NodeId lp = tape.log_softmax(tape.input(Tensor({1, 2}, {0.0, 0.0})));
    const NodeId lq = tape.log_softmax(tape.input(Tensor({1, 2}, {std::log(9.0), 0.0})));
    const double want = 0.8 * std::log(3.0);
    CHECK(std::fabs(tape.value(tape.sym_kl(lp, lq)) - want) < 1e-10);

    const ProbDist p{Tensor({1, 2}, {0.5, 0.5})};
    const ProbDist q{Tensor({1, 2}, {0.9, 0.1})};
    CHECK(std::fabs(losses::sym_kl_value(p, q) - want) < 1e-10);
}

TEST_CASE("sym_kl_value is symmetric, nonnegative, zero only at equality") {
    for (std::uint64_t k = 0; k < 50; ++k) {
        const ProbDist p = random_dist(2 * k, 4, 5);
        const ProbDist q = random_dist(2 * k + 1, 4, 5);
        const double v = losses::sym_kl_value(p, q);
        CHECK(v >= 0.0);
        CHECK(v == losses::sym_kl_value(q, p));
        CHECK(losses::sym_kl_value(p, p) == 0.0);
    }
}

TEST_CASE("sym_kl_value stays finite when one side has zero mass") {
    const ProbDist p{Tensor({1, 2}, {1.0, 0.0})};
    const ProbDist q{Tensor({1, 2}, {0.5, 0.5})};
    const double v = losses::sym_kl_value(p, q);
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
}

TEST_CASE("log-space and probability-space paths agree") {
    rng::Stream s(77);
    Tensor la = Tensor::zeros({3, 4});
    Tensor lb = Tensor::zeros({3, 4});
    for (double& v : la.data) v = 2.0 * s.next_gaussian();
    for (double& v : lb.data) v = 2.0 * s.next_gaussian();

    Tape tape;
    const NodeId loss = losses::sym_kl_loss(tape, tape.input(la), tape.input(lb));

    const auto softmax_rows = [](const Tensor& t) {
        Tensor out = t;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            double mx = t.data[r * t.cols()];
            for (std::size_t c = 1; c < t.cols(); ++c) {
                mx = std::max(mx, t.data[r * t.cols() + c]);
            }
            double sum = 0.0;
            for (std::size_t c = 0; c < t.cols(); ++c) {
                out.data[r * t.cols() + c] = std::exp(t.data[r * t.cols() + c] - mx);
                sum += out.data[r * t.cols() + c];
            }
            for (std::size_t c = 0; c < t.cols(); ++c) out.data[r * t.cols() + c] /= sum;
        }
        return out;
    };
    const double want =
        losses::sym_kl_value(ProbDist{softmax_rows(la)}, ProbDist{softmax_rows(lb)});
    CHECK(tape.value(loss) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("rdrop_loss combines its three terms with the given weight") {
    Tape tape;
    const NodeId s0 = tape.input(Tensor({1, 1}, {0.8}));
    const NodeId s1 = tape.input(Tensor({1, 1}, {0.6}));
    const NodeId kl = tape.input(Tensor({1, 1}, {0.25}));
    const NodeId loss = losses::rdrop_loss(tape, s0, s1, kl, 2.0);
    CHECK(tape.value(loss) == doctest::Approx(0.5 * 0.8 + 0.5 * 0.6 + 2.0 * 0.25).epsilon(1e-15));
    CHECK_THROWS(losses::rdrop_loss(tape, s0, s1, kl, -0.1));
}

TEST_CASE("ProbDist validation") {
    CHECK_NOTHROW(ProbDist{Tensor({1, 2}, {0.25, 0.75})}.validate());
    CHECK_THROWS(ProbDist{Tensor({1, 2}, {-0.1, 1.1})}.validate());
    CHECK_THROWS(ProbDist{Tensor({1, 2}, {0.4, 0.4})}.validate());
    CHECK_THROWS(losses::sym_kl_value(ProbDist{Tensor({1, 2}, {0.5, 0.5})},
                                      ProbDist{Tensor({1, 3}, {0.2, 0.3, 0.5})}));
}
