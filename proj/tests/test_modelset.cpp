#include <gtest/gtest.h>

#include "recdyn/lindisc.hpp"
#include "recdyn/modelset.hpp"

using namespace recdyn;

namespace {

Eigen::MatrixXd mat(std::initializer_list<double> v, int n) {
    Eigen::MatrixXd m(n, n);
    auto it = v.begin();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = *it++;
    return m;
}

// Scans every lattice point B z near x (z in a wide box) for x - B z in W.
bool brute_member(const LatticeBasis& L, std::span<const double> x, int r) {
    const int m = L.dim();
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), m);
    Eigen::VectorXd c = L.inverse() * xv;
    std::vector<int> off(static_cast<std::size_t>(m), -r);
    Window w{m};
    for (;;) {
        Eigen::VectorXd z(m);
        for (int j = 0; j < m; ++j) z(j) = std::round(c(j)) + off[static_cast<std::size_t>(j)];
        Eigen::VectorXd y = xv - L.basis() * z;
        if (w.contains(std::span<const double>(y.data(), static_cast<std::size_t>(m)))) return true;
        int j = m - 1;
        while (j >= 0 && off[static_cast<std::size_t>(j)] == r) off[static_cast<std::size_t>(j--)] = -r;
        if (j < 0) return false;
        ++off[static_cast<std::size_t>(j)];
    }
}

std::vector<double> random_point(Rng& rng, int m, double scale) {
    std::vector<double> x(static_cast<std::size_t>(m));
    for (auto& v : x) v = rng.uniform(-scale, scale);
    return x;
}

}  // namespace

TEST(LatticeBasis, RejectsSingular) {
    EXPECT_THROW(LatticeBasis(mat({1, 2, 2, 4}, 2)), NumericalError);
}

TEST(LatticeBasis, CovolumeOneForConservativeSequences) {
    for (std::size_t k = 1; k <= 6; ++k) {
        auto lp = build_lattices(random_sl2_sequence(k, 1, k));
        EXPECT_NEAR(lp.tilde.covolume(), 1.0, 1e-6);
        EXPECT_NEAR(lp.full.covolume(), 1.0, 1e-6);
    }
}

TEST(BuildLattices, IdentityInDimensionOne) {
    auto lp = build_lattices(MatrixSeq::identity(1, 1));
    EXPECT_EQ(lp.tilde.basis(), Eigen::MatrixXd::Identity(1, 1));
    EXPECT_EQ(lp.full.basis(), mat({1, -1, 0, 1}, 2));
}

TEST(BuildLattices, TwoScalars) {
    MatrixSeq seq({mat({3}, 1), mat({0.25}, 1)});
    auto lp = build_lattices(seq);
    EXPECT_EQ(lp.tilde.basis(), mat({3, -1, 0, 0.25}, 2));
    EXPECT_NEAR(lp.tilde.covolume(), 0.75, 1e-15);
    EXPECT_EQ(lp.full.basis(), mat({3, -1, 0, 0, 0.25, -1, 0, 0, 1}, 3));
}

TEST(BuildLattices, ProductFormInverse) {
    for (std::size_t k : {2u, 5u}) {
        auto seq = random_sl2_sequence(k, 77, 0);
        auto lp = build_lattices(seq);
        EXPECT_LE((lp.tilde.inverse() - tilde_inverse_product_form(seq)).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Member, UnitLatticeAlwaysCovers) {
    LatticeBasis z3(Eigen::MatrixXd::Identity(3, 3));
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        auto x = random_point(rng, 3, 50);
        EXPECT_TRUE(member(z3, Window{3}, x));
    }
}

TEST(Member, TwoZ) {
    LatticeBasis two(mat({2}, 1));
    std::vector<double> a{0.3}, b{1.2}, c{2.5}, d{1.5};
    EXPECT_TRUE(member(two, Window{1}, a));
    EXPECT_FALSE(member(two, Window{1}, b));
    EXPECT_TRUE(member(two, Window{1}, c));   // 2.5 - 2 = 0.5 is in (-1/2, 1/2]
    EXPECT_FALSE(member(two, Window{1}, d));  // 1.5 - 2 = -0.5 is not
}

TEST(Member, MatchesBruteForce) {
    Rng rng(3);
    for (std::uint64_t idx = 0; idx < 4; ++idx) {
        auto L = build_lattices(random_sl2_sequence(2, 5, idx)).tilde;
        for (int i = 0; i < 300; ++i) {
            auto x = random_point(rng, 4, 6);
            ASSERT_EQ(member(L, Window{4}, x), brute_member(L, x, 7));
        }
    }
}

TEST(Member, IllConditionedBasisIsRejected) {
    LatticeBasis tiny(Eigen::MatrixXd::Identity(3, 3) * 1e-3);
    std::vector<double> x{0.1, 0.2, 0.3};
    EXPECT_THROW(member(tiny, Window{3}, x), NumericalError);
}

TEST(ChainLattice, BasisMatchesBlockMatrices) {
    auto seq = random_sl2_sequence(3, 9, 0);
    EXPECT_EQ(ChainLattice::tilde(seq).basis().basis(), chain_matrix(seq, false));
    EXPECT_EQ(ChainLattice::full(seq).basis().basis(), chain_matrix(seq, true));
}

TEST(ChainLattice, AgreesWithGenericMember) {
    Rng rng(21);
    std::vector<MatrixSeq> seqs;
    for (std::size_t k = 1; k <= 3; ++k) seqs.push_back(random_sl2_sequence(k, 13, k));
    seqs.push_back(MatrixSeq({mat({2, 0.3, -0.1, 0.7}, 2), mat({0.5, 0, 0.2, 1.5}, 2)}));
    seqs.push_back(MatrixSeq({mat({4, 0, 0, 0.25}, 2), mat({0.5, 0, 0, 2}, 2)}));
    seqs.push_back(MatrixSeq({mat({2}, 1), mat({0.3}, 1), mat({1.7}, 1)}));
    int checked = 0;
    for (const auto& seq : seqs) {
        for (bool full : {false, true}) {
            auto cl = full ? ChainLattice::full(seq) : ChainLattice::tilde(seq);
            const int m = cl.dim();
            std::vector<double> x(static_cast<std::size_t>(m));
            cl.sample_fundamental(rng, x);
            // Keep the enumeration oracle to small boxes.
            double norm = cl.basis().inverse().cwiseAbs().rowwise().sum().maxCoeff();
            if (std::pow(2.0 * (std::ceil(norm / 2.0) + 1.0) + 1.0, m) > 2e5) continue;
            ++checked;
            for (int i = 0; i < 600; ++i) {
                if (i % 2) x = random_point(rng, m, 20);
                else cl.sample_fundamental(rng, x);
                ASSERT_EQ(cl.contains(x), member(cl.basis(), Window{m}, x)) << "k=" << seq.length() << " full=" << full;
            }
        }
    }
    EXPECT_GE(checked, 5);
}

TEST(ChainLattice, FundamentalSamplesHaveUnitCoordinates) {
    auto cl = ChainLattice::tilde(random_sl2_sequence(3, 2, 0));
    Rng rng(4);
    std::vector<double> x(6);
    for (int i = 0; i < 200; ++i) {
        cl.sample_fundamental(rng, x);
        Eigen::VectorXd u = cl.basis().inverse() * Eigen::Map<Eigen::VectorXd>(x.data(), 6);
        for (int j = 0; j < 6; ++j) {
            EXPECT_GE(u(j), -1e-9);
            EXPECT_LT(u(j), 1.0 + 1e-9);
        }
    }
}

TEST(MeanRate, IdentityIsExactlyOne) {
    auto e = mean_rate(MatrixSeq::identity(2, 4), 20000, 1);
    EXPECT_EQ(e.hits, e.samples);
    EXPECT_EQ(e.estimate, 1.0);
    EXPECT_EQ(e.std_error, 0.0);
    EXPECT_EQ(mean_rate_alt(MatrixSeq::identity(2, 4), 20000, 1).estimate, 1.0);
}

TEST(MeanRate, UnitUpperTriangularTiles) {
    MatrixSeq seq({mat({1, 0.37, 0, 1}, 2), mat({1, -2.1, 0, 1}, 2), mat({1, 0.05, 0, 1}, 2)});
    auto e = mean_rate(seq, 100000, 2);
    EXPECT_EQ(e.hits, e.samples);
    EXPECT_EQ(mean_rate_alt(seq, 100000, 2).hits, 100000u);
}

TEST(MeanRate, DiagonalTwoHalf) {
    MatrixSeq seq({mat({2, 0, 0, 0.5}, 2)});
    auto e = mean_rate(seq, 200000, 3);
    EXPECT_NEAR(e.estimate, 0.5, 3 * e.std_error + 1e-12);
    auto f = mean_rate_alt(seq, 200000, 4);
    EXPECT_NEAR(f.estimate, 0.5, 3 * f.std_error + 1e-12);
    auto ball = rate_injectivity_ball_detail(seq, 500);
    EXPECT_NEAR(ball.rate, 0.5, 0.5 / (2 * ball.output_radius + 1) + 1e-12);
}

TEST(MeanRate, NonConservativeMatchesImageDensity) {
    // The covered fraction is already the image density; no covolume division.
    MatrixSeq two({mat({2}, 1)});
    auto e = mean_rate(two, 100000, 5);
    EXPECT_NEAR(e.estimate, 0.5, 3 * e.std_error + 1e-12);
    EXPECT_DOUBLE_EQ(e.covolume, 2.0);
    MatrixSeq stretch({mat({3, 0, 0, 0.5}, 2)});
    auto s = mean_rate(stretch, 100000, 6);
    EXPECT_NEAR(s.estimate, rate_injectivity_ball(stretch, 600), 0.01);
    EXPECT_NEAR(s.estimate, 1.0 / 3.0, 0.01);
}

TEST(MeanRate, RejectsTooFewSamples) {
    EXPECT_THROW(mean_rate(MatrixSeq::identity(2, 1), 9999, 0), ValidationError);
}

TEST(MeanRate, IndependentOfThreadCount) {
    auto seq = random_sl2_sequence(3, 8, 0);
    set_max_threads(1);
    auto a = mean_rate(seq, 100000, 42);
    set_max_threads(3);
    auto b = mean_rate(seq, 100000, 42);
    set_max_threads(0);
    EXPECT_EQ(a.hits, b.hits);
}

TEST(MeanRate, MatchesBallRate) {
    for (std::uint64_t idx = 0; idx < 4; ++idx) {
        auto seq = random_sl2_sequence(2, 31, idx);
        auto balls = prefix_rates_ball(seq, 600);
        for (std::size_t k = 1; k <= 2; ++k)
            EXPECT_NEAR(mean_rate(seq.prefix(k), 200000, idx * 10 + k).estimate, balls[k - 1].rate, 0.02);
    }
}

TEST(Property, BothLatticesAgree) {
    for (std::uint64_t idx = 0; idx < 5; ++idx) {
        auto seq = random_sl2_sequence(3, 55, idx);
        auto a = mean_rate(seq, 200000, 1 + idx);
        auto b = mean_rate_alt(seq, 200000, 100 + idx);
        EXPECT_LE(std::abs(a.estimate - b.estimate), 3 * std::hypot(a.std_error, b.std_error));
    }
}

TEST(Property, NonIncreasingAlongPrefixes) {
    auto seq = random_sl2_sequence(6, 66, 0);
    MonteCarloEstimate prev{1.0, 0.0};
    for (std::size_t k = 1; k <= 6; ++k) {
        auto e = mean_rate(seq.prefix(k), 100000, k);
        EXPECT_LE(e.estimate, prev.estimate + 3 * std::hypot(e.std_error, prev.std_error));
        prev = e;
    }
}

TEST(Property, DecayGates) {
    double s10 = 0, s25 = 0;
    for (std::uint64_t j = 0; j < 20; ++j) {
        auto seq = random_sl2_sequence(25, 1, j);
        s10 += mean_rate(seq.prefix(10), 100000, 2 * j).estimate;
        s25 += mean_rate(seq, 100000, 2 * j + 1).estimate;
    }
    EXPECT_LE(s10 / 20, 0.55);
    EXPECT_LE(s25 / 20, 0.35);
}

TEST(Overlap, UnitLatticeHolds) {
    auto r = overlap_inequality_check(MatrixSeq::identity(2, 2), std::vector<double>{0.3, -0.2, 0.1, 0.7}, 20000, 1);
    EXPECT_EQ(r.status, OverlapStatus::Holds);
    EXPECT_EQ(r.intersection, 1.0);
}

TEST(Overlap, ZeroShiftHolds) {
    auto seq = random_sl2_sequence(1, 3, 0);
    auto r = overlap_inequality_check(seq, std::vector<double>{0, 0}, 50000, 2);
    EXPECT_DOUBLE_EQ(r.intersection, r.density);
    if (r.status != OverlapStatus::Skipped) { EXPECT_EQ(r.status, OverlapStatus::Holds); }
}

TEST(Overlap, SkipsLowDensity) {
    MatrixSeq sparse({mat({3, 0, 0, 3}, 2)});
    auto r = overlap_inequality_check(sparse, std::vector<double>{0.5, 0.5}, 20000, 3);
    EXPECT_EQ(r.status, OverlapStatus::Skipped);
}

TEST(Overlap, RandomLatticesHold) {
    Rng rng(8);
    for (std::uint64_t idx = 0; idx < 8; ++idx) {
        auto seq = random_sl2_sequence(1 + idx % 2, 12, idx);
        std::vector<double> v(2 * seq.length());
        for (auto& x : v) x = rng.uniform(-2, 2);
        auto r = overlap_inequality_check(seq, v, 100000, idx);
        EXPECT_NE(r.status, OverlapStatus::Violated) << "margin " << r.margin << " se " << r.margin_se;
    }
}
