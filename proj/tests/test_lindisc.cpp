#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "recdyn/grid.hpp"
#include "recdyn/lindisc.hpp"

using namespace recdyn;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
    Eigen::MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

struct Pgm {
    std::size_t w = 0, h = 0;
    std::vector<unsigned char> px;
};

Pgm read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::string magic;
    int maxval = 0;
    Pgm p;
    is >> magic >> p.w >> p.h >> maxval;
    is.get();
    p.px.resize(p.w * p.h);
    is.read(reinterpret_cast<char*>(p.px.data()), static_cast<std::streamsize>(p.px.size()));
    EXPECT_EQ(magic, "P5");
    EXPECT_EQ(maxval, 255);
    return p;
}

double black_fraction(const Pgm& p) {
    return static_cast<double>(std::count(p.px.begin(), p.px.end(), 0)) / static_cast<double>(p.px.size());
}

std::string tmp(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST(HatApply, IdentityIsIdentity) {
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
    IntVec x{4, -7, 123456789};
    EXPECT_EQ(hat_apply(id, x), x);
}

TEST(HatApply, HalfIsRoundedDown) {
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    Eigen::VectorXd v(1);
    v << 0.5;
    EXPECT_EQ(hat_apply(one, v, IntVec{0}), IntVec{0});
    v << -0.5;
    EXPECT_EQ(hat_apply(one, v, IntVec{0}), IntVec{-1});
}

TEST(HatApply, AgreesWithGridProjection) {
    // On the grid of order N, projecting the point j/N + s/N gives P(j + s) mod N.
    const std::uint64_t N = 16;
    GridSpec g(1, N);
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    for (double s : {-0.5, -0.25, 0.0, 0.49, 0.5, 0.51, 1.5, 2.5}) {
        for (std::int64_t j = 0; j < 16; ++j) {
            Eigen::VectorXd v(1);
            v << s;
            auto h = hat_apply(one, v, IntVec{j})[0];
            std::vector<double> x{(static_cast<double>(j) + s) / N};
            auto expect = static_cast<std::uint64_t>(((h % 16) + 16) % 16);
            EXPECT_EQ(project(g, x), expect) << "j=" << j << " s=" << s;
        }
    }
}

TEST(MatrixSeq, RejectsSingular) {
    EXPECT_THROW(MatrixSeq({mat2(1, 2, 2, 4)}), NumericalError);
}

TEST(MatrixSeq, ConservativeFlag) {
    EXPECT_TRUE(MatrixSeq({mat2(2, 0, 0, 0.5)}).conservative());
    EXPECT_FALSE(MatrixSeq({mat2(2, 0, 0, 1)}).conservative());
}

TEST(MatrixSeq, ReadsCsvWithAndWithoutShifts) {
    auto path = tmp("recdyn_seq.csv");
    {
        std::ofstream os(path);
        os << "# two matrices\n0.5,-1,0.5,1,0.25,0.75\n2,0,0,0.5,0,0\n";
    }
    auto seq = MatrixSeq::from_csv(path);
    EXPECT_EQ(seq.dim(), 2);
    EXPECT_EQ(seq.length(), 2u);
    EXPECT_TRUE(seq.has_shifts());
    EXPECT_DOUBLE_EQ(seq.matrix(0)(0, 1), -1.0);
    EXPECT_DOUBLE_EQ(seq.shift(0)(1), 0.75);
    EXPECT_DOUBLE_EQ(seq.matrix(1)(1, 1), 0.5);
    std::filesystem::remove(path);
    EXPECT_THROW(MatrixSeq::from_csv(tmp("recdyn_missing.csv")), ValidationError);
}

TEST(RandomSl2, DeterminantOneAndReproducible) {
    auto a = random_sl2_sequence(30, 42, 0);
    auto b = random_sl2_sequence(30, 42, 0);
    auto c = random_sl2_sequence(30, 42, 1);
    for (std::size_t i = 0; i < 30; ++i) {
        EXPECT_NEAR(a.matrix(i).determinant(), 1.0, 1e-12);
        EXPECT_EQ(a.matrix(i), b.matrix(i));
        // singular values e^t, e^-t with |t| <= 1/2
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.matrix(i));
        EXPECT_LE(svd.singularValues()(0), std::exp(0.5) + 1e-12);
    }
    EXPECT_NE(a.matrix(0), c.matrix(0));
    EXPECT_TRUE(a.conservative());
}

TEST(ImageSet, IdentityBall) {
    auto ps = image_set(MatrixSeq::identity(2, 1), 5);
    EXPECT_EQ(ps.size(), 121u);
}

TEST(ImageSet, DoublingInDimensionOne) {
    Eigen::MatrixXd two(1, 1);
    two << 2;
    auto ps = image_set(MatrixSeq({two}), 10);
    EXPECT_EQ(ps.size(), 21u);
    std::vector<std::int64_t> expect;
    for (std::int64_t v = -20; v <= 20; v += 2) expect.push_back(v);
    EXPECT_EQ(ps.coords, expect);
    EXPECT_DOUBLE_EQ(static_cast<double>(ps.count_within(20)) / 41.0, 21.0 / 41.0);
}

TEST(ImageSet, OverflowIsNumericalError) {
    EXPECT_THROW(image_set(MatrixSeq({mat2(1e15, 0, 0, 1e-15)}), 5), NumericalError);
}

TEST(ImageSet, NestedPrefixesShrink) {
    auto seq = random_sl2_sequence(8, 3, 0);
    std::size_t prev = SIZE_MAX;
    for (std::size_t k = 1; k <= 8; ++k) {
        auto n = image_set(seq.prefix(k), 60).size();
        EXPECT_LE(n, prev);
        prev = n;
    }
}

TEST(ImageSet, DedupePathsAgree) {
    // Points spread over a box too large for the bitmap take the sorting path.
    std::vector<std::int64_t> spread{5, 1, -3000000000LL, 7, 5, 1, 4000000000LL, -2, 5, 1};
    detail::dedupe_points(spread, 2);
    EXPECT_EQ(spread, (std::vector<std::int64_t>{-3000000000LL, 7, 5, 1, 4000000000LL, -2}));
    std::vector<std::int64_t> compact{5, 1, -3, 7, 5, 1, 4, -2, 5, 1};
    detail::dedupe_points(compact, 2);
    EXPECT_EQ(compact, (std::vector<std::int64_t>{-3, 7, 4, -2, 5, 1}));
}

TEST(RateBall, IdentityIsOne) {
    for (double R : {20.0, 57.0, 300.0}) EXPECT_DOUBLE_EQ(rate_injectivity_ball(MatrixSeq::identity(2, 3), R), 1.0);
}

TEST(RateBall, AffineExample) {
    MatrixSeq f0({mat2(0.5, -1, 0.5, 1)});
    EXPECT_NEAR(rate_injectivity_ball(f0, 500), 0.5, 0.01);
    // A literal lattice shift (1/4, 3/4) is onto; the torus map averages the
    // grid-unit shifts N v mod 1 over N mod 4.
    EXPECT_NEAR(rate_injectivity_ball(f0.with_shifts({vec2(0.25, 0.75)}), 500), 1.0, 1e-12);
    EXPECT_NEAR(rate_injectivity_ball(f0.with_shifts({vec2(0.5, 0.5)}), 500), 0.5, 0.01);
    EXPECT_NEAR(rate_affine_torus(f0.matrix(0), vec2(0.25, 0.75), 4, 500), 0.75, 0.01);
    EXPECT_NEAR(rate_affine_torus(f0.matrix(0), vec2(0, 0), 1, 500), 0.5, 0.01);
    EXPECT_THROW(rate_affine_torus(f0.matrix(0), vec2(0.25, 0.75), 2, 500), ValidationError);
}

TEST(RateBall, DiagonalTwoHalf) {
    // Odd window width: the even abscissae of B_R' are R'/(2R'+1) or (R'+1)/(2R'+1).
    auto r = rate_injectivity_ball_detail(MatrixSeq({mat2(2, 0, 0, 0.5)}), 200);
    EXPECT_NEAR(r.rate, 0.5, 0.5 / (2 * r.output_radius + 1) + 1e-12);
}

TEST(RateBall, ResonanceExample) {
    MatrixSeq seq({mat2(100, 0, 0, 0.01), mat2(0.1, 0, 0, 10)});
    auto r = rate_injectivity_ball_detail(seq, 1500);
    EXPECT_NEAR(r.rate, 0.01, 0.002);
    EXPECT_GE(r.output_radius, kMinOutputRadius);
}

TEST(RateBall, SmallRadiusIsRejected) {
    EXPECT_THROW(rate_injectivity_ball(random_sl2_sequence(3, 1, 0), 12), ValidationError);
    EXPECT_THROW(rate_injectivity_ball(MatrixSeq::identity(2, 1), 0.5), ValidationError);
}

TEST(RateBall, ShrunkenRadiusIsSaturated) {
    // Every point of the image inside B_R' is already reached from B_R: a
    // larger input ball adds nothing inside B_R'.
    auto seq = random_sl2_sequence(4, 8, 2);
    auto small = rate_injectivity_ball_detail(seq, 150);
    auto big = image_set(seq, 400);
    EXPECT_EQ(big.count_within(small.output_radius), small.hits);
}

TEST(RateBall, InputRadiusInvertsShrink) {
    auto seq = random_sl2_sequence(6, 4, 0);
    double rin = detail::input_radius(seq, 6, 50);
    EXPECT_GE(detail::shrunken_radius(seq, 6, rin), 50);
}

TEST(Property, StableInRadius) {
    for (std::uint64_t idx = 0; idx < 5; ++idx) {
        auto seq = random_sl2_sequence(5, 17, idx);
        auto a = prefix_rates_ball(seq, 500);
        auto b = prefix_rates_ball(seq, 1000);
        for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(a[k].rate, b[k].rate, 0.02) << "seq " << idx << " k " << k + 1;
    }
}

TEST(Property, RateNonIncreasingAlongPrefixes) {
    for (std::uint64_t idx = 0; idx < 3; ++idx) {
        auto rates = prefix_rates_ball(random_sl2_sequence(6, 23, idx), 800);
        for (std::size_t k = 1; k < rates.size(); ++k)
            EXPECT_LE(rates[k].rate, rates[k - 1].rate + 0.01) << "seq " << idx << " k " << k + 1;
    }
}

TEST(Property, TranslationNearInvariance) {
    auto seq = random_sl2_sequence(3, 99, 0);
    Rng rng(5);
    auto base = prefix_rates_ball(seq, 700);
    for (int draw = 0; draw < 20; ++draw) {
        std::vector<Eigen::VectorXd> shifts;
        for (int i = 0; i < 3; ++i) shifts.push_back(vec2(rng.uniform(), rng.uniform()));
        auto shifted = prefix_rates_ball(seq.with_shifts(shifts), 700);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(shifted[k].rate, base[k].rate, 0.03) << "draw " << draw;
    }
}

TEST(RenderImage, EmptySetIsWhite) {
    auto path = tmp("recdyn_empty.pgm");
    render_image(PointSet{2, 3, {}}, path);
    auto p = read_pgm(path);
    EXPECT_EQ(p.w, 7u);
    EXPECT_EQ(p.h, 7u);
    EXPECT_EQ(black_fraction(p), 0.0);
    std::filesystem::remove(path);
}

TEST(RenderImage, IdentityIsBlack) {
    auto path = tmp("recdyn_id.pgm");
    render_image(image_set(MatrixSeq::identity(2, 1), 5), path);
    auto p = read_pgm(path);
    EXPECT_EQ(p.w, 11u);
    EXPECT_EQ(p.h, 11u);
    EXPECT_EQ(black_fraction(p), 1.0);
    std::filesystem::remove(path);
}

TEST(RenderImage, OrientationTopRowIsPositiveY) {
    auto path = tmp("recdyn_orient.pgm");
    render_image(PointSet{2, 1, {-1, 1}}, path);
    auto p = read_pgm(path);
    EXPECT_EQ(p.px[0], 0);
    EXPECT_EQ(std::count(p.px.begin(), p.px.end(), 0), 1);
    std::filesystem::remove(path);
}

TEST(RenderImage, RandomSequenceBlackFractionMatchesRate) {
    auto seq = random_sl2_sequence(20, 42, 0);
    auto r = rate_injectivity_ball_detail(seq, 200);
    auto path = tmp("recdyn_k20.pgm");
    render_image(image_set(seq, 200), path, r.output_radius);
    EXPECT_NEAR(black_fraction(read_pgm(path)), r.rate, 0.02);
    std::filesystem::remove(path);
}
