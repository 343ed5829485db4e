#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "dwa/core.hpp"
#include "dwa/rng.hpp"

using namespace dwa;

TEST_CASE("matrix elementwise ops") {
    CHECK(add(Matrix{{1, 2}}, Matrix{{3, 4}}) == Matrix{{4, 6}});
    CHECK(sub(Matrix{{3, 4}}, Matrix{{1, 2}}) == Matrix{{2, 2}});
    CHECK(scale(Matrix{{1, -1}}, 0.0) == Matrix{{0, 0}});
}

TEST_CASE("matvec identity") {
    auto y = matvec(Matrix::identity(3), {5, 6, 7});
    CHECK(y == std::vector<double>{5, 6, 7});
}

TEST_CASE("shape mismatch names both shapes") {
    try {
        add(Matrix{{1, 2}}, Matrix{{1}, {2}});
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("1x2") != std::string::npos);
        CHECK(msg.find("2x1") != std::string::npos);
    }
    CHECK_THROWS_AS(matvec(Matrix{{1, 2}}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("slice_rows") {
    Matrix m{{1}, {2}, {3}, {4}};
    CHECK(slice_rows(m, 1, 2) == Matrix{{2}, {3}});
    CHECK_THROWS_AS(slice_rows(m, 3, 2), std::invalid_argument);
}

TEST_CASE("series rejects non-finite values") {
    Rng rng(7);
    const double bads[] = {std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::infinity(),
                           -std::numeric_limits<double>::infinity()};
    for (int trial = 0; trial < 60; ++trial) {
        std::size_t rows = 1 + rng.uniform_int(Stream::Synth, 6);
        std::size_t cols = 1 + rng.uniform_int(Stream::Synth, 4);
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(Stream::Synth);
        CHECK_NOTHROW(make_series(m));
        std::size_t r = rng.uniform_int(Stream::Synth, rows);
        std::size_t c = rng.uniform_int(Stream::Synth, cols);
        m(r, c) = bads[trial % 3];
        CHECK_THROWS_AS(make_series(m), std::invalid_argument);
    }
    CHECK_THROWS_AS(make_series(Matrix()), std::invalid_argument);
}

TEST_CASE("dataset label validation") {
    Dataset ds;
    ds.num_classes = 2;
    ds.feature_dim = 1;
    ds.items.push_back(make_series(Matrix{{1}}, 0));
    ds.items.push_back(make_series(Matrix{{2}}, 3));
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
    ds.items[1].label = 0;
    CHECK_NOTHROW(ds.validate());
    CHECK_THROWS_AS(ds.validate(true), std::invalid_argument);  // class 1 missing
}

TEST_CASE("rng reproducibility over 1e4 draws") {
    Rng a(42), b(42);
    for (int i = 0; i < 10000; ++i) {
        CHECK(a.raw(Stream::Init) == b.raw(Stream::Init));
    }
    for (int i = 0; i < 100; ++i) {
        CHECK(a.uniform(Stream::Shuffle) == b.uniform(Stream::Shuffle));
        CHECK(a.gaussian(Stream::Synth, 0, 1) == b.gaussian(Stream::Synth, 0, 1));
        CHECK(a.uniform_int(Stream::Split, 17) == b.uniform_int(Stream::Split, 17));
    }
}

TEST_CASE("rng substreams are independent") {
    Rng a(11), b(11);
    // b interleaves draws on another stream; the Init stream must not notice.
    for (int i = 0; i < 50; ++i) {
        (void)b.raw(Stream::Shuffle);
        CHECK(a.raw(Stream::Init) == b.raw(Stream::Init));
    }
}

TEST_CASE("rng restore fast-forwards to the same point") {
    Rng a(99);
    for (int i = 0; i < 123; ++i) (void)a.raw(Stream::Synth);
    std::uint64_t next = a.raw(Stream::Synth);

    Rng b(99);
    b.restore(Stream::Synth, 123);
    CHECK(b.raw(Stream::Synth) == next);
    CHECK(b.draws(Stream::Synth) == 124);
}

TEST_CASE("rng uniform_int stays in range and shuffle is deterministic") {
    Rng a(5), b(5);
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t v = a.uniform_int(Stream::Split, 7);
        CHECK(v < 7);
        (void)b.uniform_int(Stream::Split, 7);
    }
    std::vector<int> va(20), vb(20);
    for (int i = 0; i < 20; ++i) va[i] = vb[i] = i;
    a.shuffle(va, Stream::Shuffle);
    b.shuffle(vb, Stream::Shuffle);
    CHECK(va == vb);
}
