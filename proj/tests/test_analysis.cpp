#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "amyepi/analysis.hpp"

using namespace amyepi;
using namespace amyepi::analysis;

namespace {

// Cells at x_e = e * dx along a line; a smooth pulse of width w travels right at speed c
// starting at t0, optionally followed by a second pulse launched at t1.
CellSeries pulses(int n, double dx, double c, double dt, double t_end, std::vector<double> launch) {
    CellSeries s;
    for (double t = 0.0; t <= t_end + 1e-12; t += dt) {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(n, -67.0);
        for (int e = 0; e < n; ++e)
            for (double t0 : launch) {
                const double front = c * (t - t0);  // position of the leading edge
                const double z = front - e * dx;    // distance behind the front
                if (z >= 0.0 && z < 0.3) v[e] = std::max(v[e], -67.0 + 100.0 * std::sin(M_PI * z / 0.3));
            }
        s.t.push_back(t);
        s.values.push_back(v);
    }
    return s;
}

} // namespace

TEST(Waves, QuiescentRunHasNone) {
    CellSeries s;
    for (int k = 0; k < 50; ++k) {
        s.t.push_back(k * 0.5);
        s.values.push_back(Eigen::VectorXd::Constant(20, -67.0));
    }
    EXPECT_TRUE(detect_waves(s).empty());
    EXPECT_TRUE(activation_maps(s).empty());
}

TEST(Waves, SinglePulseIsOneWave) {
    const auto s = pulses(50, 0.02, 0.05, 0.1, 30.0, {1.0});
    const auto w = detect_waves(s);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_LE(w[0].first, w[0].last);
}

TEST(Waves, SeparatedPulsesAreOrderedAndDisjoint) {
    // the first pulse leaves the line (1 cm at 0.05 cm/ms) before the second starts
    const auto s = pulses(50, 0.02, 0.05, 0.1, 60.0, {1.0, 35.0});
    const auto w = detect_waves(s);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_LT(w[0].last, w[1].first);
    for (std::size_t k = w[0].last + 1; k < w[1].first; ++k) EXPECT_LE(s.values[k].maxCoeff(), 0.0);
    EXPECT_LT(w[0].t_end, w[1].t_start);
}

TEST(Activation, PlaneWaveSlopeIsInverseSpeed) {
    const double c = 0.05, dx = 0.02;
    const auto s = pulses(50, dx, c, 0.1, 30.0, {1.0});
    const auto m = activation_map(s, detect_waves(s).at(0), 0.0);
    EXPECT_EQ(m.origin, 0);
    EXPECT_EQ(m.activated(), 50);
    // least-squares slope of t_hat against distance
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = 50;
    for (int e = 0; e < n; ++e) {
        const double x = e * dx, y = m.t_hat[e];
        sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_NEAR(slope, 1.0 / c, 0.05 / c);
    for (double v : m.t_hat) EXPECT_GE(v, 0.0);
}

TEST(Activation, ElementAboveThresholdFromStartIsZero) {
    CellSeries s;
    for (int k = 0; k < 10; ++k) {
        Eigen::VectorXd v(3);
        v << 10.0, -67.0 + 10.0 * k, -67.0;
        s.t.push_back(k);
        s.values.push_back(v);
    }
    const auto maps = activation_maps(s);
    ASSERT_EQ(maps.size(), 1u);
    EXPECT_EQ(maps[0].t_hat[0], 0.0);
    EXPECT_EQ(maps[0].origin, 0);
    // -67 + 10k crosses 0 at k = 6.7
    EXPECT_NEAR(maps[0].t_hat[1], 6.7, 1e-12);
    EXPECT_FALSE(maps[0].defined(2));
    EXPECT_EQ(maps[0].activated(), 2);
}

TEST(Activation, InvariantUnderOutputCadenceRefinement) {
    const auto coarse = pulses(40, 0.02, 0.05, 0.4, 25.0, {1.0});
    const auto fine = pulses(40, 0.02, 0.05, 0.1, 25.0, {1.0});
    const auto a = activation_maps(coarse), b = activation_maps(fine);
    ASSERT_EQ(a.size(), 1u);
    ASSERT_EQ(b.size(), 1u);
    for (int e = 0; e < 40; ++e) EXPECT_NEAR(a[0].t_hat[e], b[0].t_hat[e], 0.4);
}

TEST(Activation, CsvLayout) {
    const auto s = pulses(4, 0.02, 0.05, 0.1, 5.0, {1.0});
    std::ostringstream out;
    write_activation_csv(out, activation_maps(s));
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "element_id,wave,that_ms");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 4);
}

TEST(Activation, RejectsMalformedSeries) {
    CellSeries s;
    s.t = {0.0, 0.0};
    s.values = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
    EXPECT_THROW(detect_waves(s), std::invalid_argument);
    s.t = {0.0, 1.0};
    s.values[1] = Eigen::VectorXd::Zero(3);
    EXPECT_THROW(detect_waves(s), std::invalid_argument);
}

TEST(Summary, OriginsCalciumAndCsv) {
    RunSeries r;
    r.name = "demo";
    r.u = pulses(10, 0.02, 0.05, 0.1, 10.0, {1.0});
    r.region = {1, 1, 0, 0, 0, 0, 0, 0, 2, 2};
    r.region_names = {"healthy", "onset", "lesion"};
    r.area.assign(10, 1.0);
    r.area[9] = 3.0;
    r.ca_i = r.u;
    r.k_o = r.u;
    for (std::size_t k = 0; k < r.ca_i.frames(); ++k) {
        r.ca_i.values[k] = Eigen::VectorXd::Constant(10, 0.01);
        r.ca_i.values[k][8] = 0.1;
        r.ca_i.values[k][9] = 0.5;
        r.k_o.values[k] = Eigen::VectorXd::Constant(10, 4.0 + 0.01 * k);
    }
    const auto sum = summarize(r, {5.0});
    ASSERT_EQ(sum.waves.size(), 1u);
    EXPECT_EQ(sum.waves[0].origin, 0);
    EXPECT_EQ(sum.waves[0].origin_region, "onset");
    EXPECT_EQ(sum.waves[0].activated, 10);
    EXPECT_GT(sum.waves[0].k_o_peak, 4.0);
    ASSERT_EQ(sum.calcium.size(), 3u);
    const auto& les = sum.calcium[2];
    EXPECT_EQ(les.region, "lesion");
    EXPECT_NEAR(les.mean, (0.1 + 3 * 0.5) / 4, 1e-15);
    EXPECT_EQ(les.max, 0.5);
    EXPECT_NEAR(les.t, 5.0, 1e-9);

    std::ostringstream out;
    write_summary_csv(out, {sum});
    const std::string csv = out.str();
    EXPECT_EQ(csv.rfind("run,kind,index,t_ms,origin_element,region,activated,value\n", 0), 0u);
    EXPECT_NE(csv.find("demo,wave,0,"), std::string::npos);
    EXPECT_NE(csv.find("demo,ca_mean,,5,,lesion,,0.4"), std::string::npos);
}
