#include <gtest/gtest.h>

#include <sstream>

#include "dpp/io.hpp"
#include "dpp/random.hpp"

using namespace dpp;

namespace {

std::string parse_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    return e.what();
  }
  ADD_FAILURE() << "no error";
  return {};
}

}  // namespace

TEST(ModelText, ParsesKeysInAnyOrder) {
  const auto m = parse_model("rho=100 family=Gaussian, alpha=0.05\n");
  EXPECT_EQ(m.family, Family::Gaussian);
  EXPECT_EQ(m.rho, 100.0);
  EXPECT_EQ(m.a(), 0.05);
  EXPECT_EQ(m.dim, 2);
  const auto w = parse_model("# comment\nfamily=whittlematern rho=50 alpha=0.02 nu=1.5 dim=1");
  EXPECT_EQ(w.family, Family::WhittleMatern);
  EXPECT_EQ(*w.nu, 1.5);
  EXPECT_EQ(w.dim, 1);
  EXPECT_EQ(parse_model("family=circular rho=130 delta=0.09").family, Family::Circular);
}

TEST(ModelText, ReportsLineAndColumn) {
  EXPECT_NE(parse_message([] { parse_model("family=gaussian rho=abc alpha=0.05"); }).find("line 1, column 21"),
            std::string::npos);
  EXPECT_NE(parse_message([] { parse_model("family=gaussian\n  rho=100 alfa=0.05"); }).find("line 2, column 11"),
            std::string::npos);
  EXPECT_NE(parse_message([] { parse_model("family=gamma rho=1 alpha=0.1"); }).find("unknown family"),
            std::string::npos);
  EXPECT_NE(parse_message([] { parse_model("family=gaussian rho=100"); }).find("missing alpha"), std::string::npos);
  EXPECT_NE(parse_message([] { parse_model("family=gaussian rho=100 alpha=0.05 nu=1"); }).find("nu"),
            std::string::npos);
  parse_message([] { parse_model("family=gaussian rho=100 alpha=0.05 dim=3"); });
  parse_message([] { parse_model("family=gaussian rho"); });
}

TEST(ModelJson, RoundTripsExactly) {
  for (const auto& m : {KernelModel::gaussian(100, 0.05), KernelModel::cauchy(37.3, 0.0123456789, 0.7),
                        KernelModel::whittle_matern(80, 0.02, 2.5, 1), KernelModel::circular(130, 0.09)}) {
    const auto j = model_to_json(m);
    const auto back = parse_model(j.dump());
    EXPECT_EQ(back.family, m.family);
    EXPECT_EQ(back.rho, m.rho);
    EXPECT_EQ(back.alpha, m.alpha);
    EXPECT_EQ(back.nu, m.nu);
    EXPECT_EQ(back.delta, m.delta);
    EXPECT_EQ(back.dim, m.dim);
  }
  EXPECT_NE(parse_message([] { parse_model("{\n  \"family\": \"gaussian\",\n  \"rho\": }"); }).find("line 3"),
            std::string::npos);
  parse_message([] { parse_model(R"({"family": "gaussian", "rho": "100", "alpha": 0.05})"); });
}

TEST(WindowText, ParsesRectanglesAndIntervals) {
  const auto w = parse_window("0, 2, -1, 1");
  EXPECT_EQ(w.dim, 2);
  EXPECT_EQ(w.volume(), 4.0);
  EXPECT_EQ(parse_window("0,5").dim, 1);
  EXPECT_EQ(window_to_string(w), "0,2,-1,1");
  parse_message([] { parse_window("0,1,2"); });
  parse_message([] { parse_window("1,0,0,1"); });
  parse_message([] { parse_window("0,x,0,1"); });
}

TEST(PatternCsv, RoundTripIsBitExact) {
  RngStream rng(1);
  PointPattern p{Window::rect(0, 3, -1, 1), {}, {}};
  for (int i = 0; i < 200; ++i) {
    p.points.push_back(Vec{3 * rng.uniform(), -1 + 2 * rng.uniform()});
    p.marks.push_back(i % 3);
  }
  std::stringstream s;
  write_pattern_csv(s, p);
  const auto q = read_pattern_csv(s, p.window);
  ASSERT_EQ(q.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(q.points[i], p.points[i]);
    EXPECT_EQ(q.marks[i], p.marks[i]);
  }
  std::stringstream again;
  write_pattern_csv(again, q);
  std::stringstream first;
  write_pattern_csv(first, p);
  EXPECT_EQ(again.str(), first.str());
}

TEST(PatternCsv, ToleratesCrlfAndBlankLines) {
  std::stringstream s("\xEF\xBB\xBFX, Y\r\n0.5,0.25\r\n\r\n0.75,0.5\r\n");
  const auto p = read_pattern_csv(s, Window::unit());
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.points[1], (Vec{0.75, 0.5}));
  std::stringstream d("x\n0.5\n1.5\n");
  EXPECT_EQ(read_pattern_csv(d, Window::interval(0, 2)).size(), 2u);
}

TEST(PatternCsv, Errors) {
  auto read = [](const std::string& text, const Window& w) {
    std::stringstream s(text);
    return read_pattern_csv(s, w);
  };
  EXPECT_NE(parse_message([&] { read("x,y\n0.1,0.2\n0.3,zz\n", Window::unit()); }).find("line 3, column 5"),
            std::string::npos);
  EXPECT_NE(parse_message([&] { read("a,b\n", Window::unit()); }).find("header"), std::string::npos);
  EXPECT_NE(parse_message([&] { read("x,y\n2,0.5\n", Window::unit()); }).find("outside"), std::string::npos);
  parse_message([&] { read("x,y\n0.1\n", Window::unit()); });
  parse_message([&] { read("x,y,mark\n0.1,0.2,1.5\n", Window::unit()); });
  parse_message([&] { read("", Window::unit()); });
  try {
    read_pattern_csv("/nonexistent/dir/p.csv", Window::unit());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Json, FitAndCurveOutput) {
  FitResult f;
  f.model = KernelModel::gaussian(100, 0.03);
  f.window = Window::unit();
  f.warnings = {"w"};
  const auto j = fit_to_json(f);
  EXPECT_EQ(j["method"], "mle_periodic");
  EXPECT_EQ(j["model"]["alpha"], 0.03);
  EXPECT_EQ(j["warnings"].size(), 1u);
  SummaryCurve c{{0.0, 0.1}, {0.0, 1.0 / 3.0}, CurveKind::K, 0.0};
  std::stringstream s;
  write_curve_csv(s, c);
  EXPECT_EQ(s.str(), "r,value\n0,0\n0.1,0.3333333333333333\n");
}
