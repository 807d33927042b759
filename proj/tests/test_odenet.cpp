#include <cmath>
#include <vector>

#include "doctest.h"
#include "etnode/odenet.hpp"
#include "testutil.hpp"

using namespace etnode;
using namespace etnode::autodiff;
using namespace etnode::odenet;

namespace {

FieldParams zero_field(std::size_t q) {
    FieldParams p;
    p.W_r = Tensor::zeros({q, q});
    p.W_u = Tensor::zeros({q, q});
    p.W_h = Tensor::zeros({q, q});
    p.b_r = Tensor::zeros({q});
    p.b_u = Tensor::zeros({q});
    p.b_h = Tensor::zeros({q});
    return p;
}

FieldFn decay_field() {
    return [](Node* z) { return scalar_mul(z, -1.0); };
}

SolverConfig cfg_of(SolverMethod m, double h) {
    SolverConfig cfg;
    cfg.method = m;
    cfg.step = h;
    return cfg;
}

double solve_decay_at_1(SolverMethod m, double h) {
    Tape tape;
    Node* z0 = tape.constant(Tensor::from({1}, {1.0}));
    auto out = ode_solve(decay_field(), z0, TimeGrid::from({1.0}), cfg_of(m, h));
    return out[0]->value[0];
}

}  // namespace

TEST_SUITE_BEGIN("odenet");

TEST_CASE("zero-parameter field values") {
    Tape tape;
    FieldParams p = zero_field(1);
    BoundField b = bind(tape, p);
    Node* at_zero = vector_field(b, tape.constant(Tensor::from({1}, {0.0})));
    CHECK(at_zero->value[0] == 0.0);
    Node* at_one = vector_field(b, tape.constant(Tensor::from({1}, {1.0})));
    CHECK(at_one->value[0] == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("the field points inward at the unit box") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        Tape tape;
        std::size_t q = 2 + rng.below(4);
        FieldParams p = FieldParams::init(q, rng);
        p.b_r = rng.uniform_tensor({q}, -1.0, 1.0);
        p.b_u = rng.uniform_tensor({q}, -1.0, 1.0);
        p.b_h = rng.uniform_tensor({q}, -1.0, 1.0);
        BoundField b = bind(tape, p);
        Tensor z = rng.uniform_tensor({q}, -1.0, 1.0);
        std::size_t j = rng.below(q);
        z[j] = trial % 2 == 0 ? 1.0 : -1.0;
        Node* dz = vector_field(b, tape.constant(z));
        if (z[j] == 1.0) {
            CHECK(dz->value[j] <= 0.0);
        } else {
            CHECK(dz->value[j] >= 0.0);
        }
    }
}

TEST_CASE("rk4 solves exponential decay to 1e-6") {
    double got = solve_decay_at_1(SolverMethod::rk4, 0.1);
    CHECK(std::abs(got - std::exp(-1.0)) < 1e-6);
}

TEST_CASE("euler reproduces the exact update recurrence") {
    double got = solve_decay_at_1(SolverMethod::euler, 0.1);
    // The same 10-step recurrence evaluated in scalar arithmetic, plus the
    // closed form (0.9)^10 at a loose tolerance.
    double v = 1.0;
    for (int i = 0; i < 10; ++i) v = v + 0.1 * (-v);
    CHECK(got == v);
    CHECK(got == doctest::Approx(0.34867844).epsilon(1e-8));
    CHECK(std::abs(got - std::pow(0.9, 10)) < 1e-12);
}

TEST_CASE("zero-parameter GRU field decays at rate one half") {
    // u = 0.5 and h~ = 0, so dz/dt = -z/2 and z(t) = v exp(-t/2).
    Rng rng(7);
    Tensor v = rng.uniform_tensor({3}, -1.0, 1.0);
    Tape tape;
    FieldParams p = zero_field(3);
    BoundField b = bind(tape, p);
    auto field = [&](Node* z) { return vector_field(b, z); };
    auto out = ode_solve(field, tape.constant(v), TimeGrid::from({0.5, 1.0, 2.0}),
                         cfg_of(SolverMethod::rk4, 0.05));
    std::vector<double> ts = {0.5, 1.0, 2.0};
    for (std::size_t k = 0; k < ts.size(); ++k)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(out[k]->value[j] - v[j] * std::exp(-ts[k] / 2.0)) <
                  1e-7);
}

TEST_CASE("solver orders of convergence on exponential decay") {
    double exact = std::exp(-1.0);
    double rk4_err_h = std::abs(solve_decay_at_1(SolverMethod::rk4, 0.1) - exact);
    double rk4_err_h2 =
        std::abs(solve_decay_at_1(SolverMethod::rk4, 0.05) - exact);
    double ratio4 = rk4_err_h / rk4_err_h2;
    CHECK(ratio4 >= 14.0);
    CHECK(ratio4 <= 18.0);

    double e_err_h = std::abs(solve_decay_at_1(SolverMethod::euler, 0.1) - exact);
    double e_err_h2 =
        std::abs(solve_decay_at_1(SolverMethod::euler, 0.05) - exact);
    double ratio1 = e_err_h / e_err_h2;
    CHECK(ratio1 >= 1.8);
    CHECK(ratio1 <= 2.2);
}

TEST_CASE("forward invariance of the GRU field on the unit box") {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        Tape tape;
        std::size_t q = 2 + rng.below(3);
        FieldParams p = FieldParams::init(q, rng);
        BoundField b = bind(tape, p);
        auto field = [&](Node* z) { return vector_field(b, z); };
        Tensor z0 = rng.uniform_tensor({q}, -1.0, 1.0);
        auto out = ode_solve(field, tape.constant(z0),
                             TimeGrid::from({2.5, 5.0, 10.0}),
                             cfg_of(SolverMethod::rk4, 0.1));
        for (Node* z : out)
            for (std::size_t j = 0; j < q; ++j)
                CHECK(std::abs(z->value[j]) <= 1.0 + 1e-9);
    }
}

TEST_CASE("one grid equals solve-then-restart") {
    Rng rng(13);
    Tape tape;
    FieldParams p = FieldParams::init(4, rng);
    BoundField b = bind(tape, p);
    auto field = [&](Node* z) { return vector_field(b, z); };
    Tensor z0 = rng.uniform_tensor({4}, -0.8, 0.8);
    SolverConfig cfg = cfg_of(SolverMethod::rk4, 0.1);

    auto joint = ode_solve(field, tape.constant(z0),
                           TimeGrid::from({0.7, 1.9}), cfg);
    auto first = ode_solve(field, tape.constant(z0), TimeGrid::from({0.7}), cfg);
    Tensor mid = first[0]->value;
    auto second = ode_solve(field, tape.constant(mid), TimeGrid::from({1.2}), cfg);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(joint[0]->value[j] - first[0]->value[j]) < 1e-15);
        CHECK(std::abs(joint[1]->value[j] - second[0]->value[j]) < 1e-10);
    }
}

TEST_CASE("rk45 matches the analytic solution and lands on grid points") {
    Tape tape;
    SolverConfig cfg;
    cfg.method = SolverMethod::rk45;
    cfg.rtol = 1e-8;
    cfg.atol = 1e-10;
    Node* z0 = tape.constant(Tensor::from({1}, {1.0}));
    auto out = ode_solve(decay_field(), z0, TimeGrid::from({0.3, 1.0, 2.2}), cfg);
    REQUIRE(out.size() == 3);
    std::vector<double> ts = {0.3, 1.0, 2.2};
    for (std::size_t k = 0; k < 3; ++k)
        CHECK(std::abs(out[k]->value[0] - std::exp(-ts[k])) < 1e-7);
}

TEST_CASE("rk45 stays within the step budget contract") {
    Tape tape;
    SolverConfig cfg;
    cfg.method = SolverMethod::rk45;
    cfg.max_steps = 3;
    Node* z0 = tape.constant(Tensor::from({1}, {1.0}));
    CHECK_THROWS_AS(ode_solve(decay_field(), z0, TimeGrid::from({5.0}), cfg),
                    SolverError);
}

TEST_CASE("time grid validation") {
    CHECK_THROWS_AS(TimeGrid::from({}), ContractError);
    CHECK_THROWS_AS(TimeGrid::from({0.0, 1.0}), ContractError);
    CHECK_THROWS_AS(TimeGrid::from({1.0, 1.0}), ContractError);
    CHECK_THROWS_AS(TimeGrid::from({2.0, 1.0}), ContractError);
    CHECK_THROWS_AS(TimeGrid::from({-1.0}), ContractError);
    CHECK(TimeGrid::from({0.5, 1.5, 2.5}).size() == 3);
}

TEST_CASE("readout basics") {
    Rng rng(17);
    Tape tape;
    SUBCASE("zero weight returns the bias everywhere") {
        ReadoutParams p{Tensor::zeros({3}), Tensor::scalar(2.5)};
        BoundReadout b = bind(tape, p);
        std::vector<Node*> zs = {tape.constant(rng.uniform_tensor({3}, -1, 1)),
                                 tape.constant(rng.uniform_tensor({3}, -1, 1))};
        auto ys = readout(b, zs);
        CHECK(ys[0]->value[0] == 2.5);
        CHECK(ys[1]->value[0] == 2.5);
    }
    SUBCASE("hand example") {
        ReadoutParams p{Tensor::from({1}, {2.0}), Tensor::scalar(1.0)};
        BoundReadout b = bind(tape, p);
        auto ys = readout(b, {tape.constant(Tensor::from({1}, {3.0}))});
        CHECK(ys[0]->value[0] == 7.0);
    }
    SUBCASE("readout is pointwise: permuting inputs permutes outputs") {
        ReadoutParams p = ReadoutParams::init(3, rng);
        BoundReadout b = bind(tape, p);
        Tensor z1 = rng.uniform_tensor({3}, -1, 1);
        Tensor z2 = rng.uniform_tensor({3}, -1, 1);
        auto fwd = readout(b, {tape.constant(z1), tape.constant(z2)});
        auto rev = readout(b, {tape.constant(z2), tape.constant(z1)});
        CHECK(fwd[0]->value[0] == rev[1]->value[0]);
        CHECK(fwd[1]->value[0] == rev[0]->value[0]);
    }
}

TEST_CASE("gradients through the unrolled rk4 solve pass the check") {
    Rng rng(19);
    std::size_t q = 3;
    FieldParams p = FieldParams::init(q, rng);
    ReadoutParams ro = ReadoutParams::init(q, rng);
    Tensor z0 = rng.uniform_tensor({q}, -0.8, 0.8);
    std::vector<Tensor*> params = {&p.W_r, &p.W_u, &p.W_h, &p.b_r, &p.b_u,
                                   &p.b_h, &ro.weight, &ro.bias, &z0};
    double err = grad_check(
        [&](Tape& t) {
            GradCheckGraph g;
            BoundField bf = bind(t, p);
            BoundReadout br = bind(t, ro);
            Node* z0n = t.param(z0);
            g.param_nodes = {bf.W_r, bf.W_u, bf.W_h, bf.b_r, bf.b_u,
                             bf.b_h, br.weight, br.bias, z0n};
            auto field = [&](Node* z) { return vector_field(bf, z); };
            auto zs = ode_solve(field, z0n, TimeGrid::from({0.5, 1.0}),
                                cfg_of(SolverMethod::rk4, 0.25));
            auto ys = readout(br, zs);
            Node* acc = square(ys[0]);
            for (std::size_t k = 1; k < ys.size(); ++k)
                acc = add(acc, square(ys[k]));
            g.loss = acc;
            return g;
        },
        params, 1e-6);
    CHECK(err < 1e-4);
}

TEST_CASE("gradients flow through rk45 as well") {
    Rng rng(23);
    std::size_t q = 2;
    FieldParams p = FieldParams::init(q, rng);
    Tensor z0 = rng.uniform_tensor({q}, -0.5, 0.5);
    SolverConfig cfg;
    cfg.method = SolverMethod::rk45;
    cfg.rtol = 1e-9;
    cfg.atol = 1e-11;
    std::vector<Tensor*> params = {&p.W_u, &z0};
    double err = grad_check(
        [&](Tape& t) {
            GradCheckGraph g;
            BoundField bf = bind(t, p);
            Node* z0n = t.param(z0);
            g.param_nodes = {bf.W_u, z0n};
            auto field = [&](Node* z) { return vector_field(bf, z); };
            auto zs = ode_solve(field, z0n, TimeGrid::from({1.0}), cfg);
            g.loss = mean_all(square(zs[0]));
            return g;
        },
        params, 1e-6);
    CHECK(err < 1e-4);
}

TEST_SUITE_END();
