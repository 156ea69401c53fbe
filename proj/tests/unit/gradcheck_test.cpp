#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "dfl/gradcheck.hpp"

namespace dfl {
namespace {

TEST(Gradcheck, NumericGradientOfQuadratic) {
  const Tensor x = random_tensor(3, 2, 1);
  const Tensor g = numeric_gradient(
      [](const Tensor& t) {
        double s = 0.0;
        for (double v : t.values()) s += v * v * v;
        return s;
      },
      x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g.values()[i], 3 * x.values()[i] * x.values()[i], 1e-8);
}

TEST(Gradcheck, RelativeErrorIsNormWise) {
  const Tensor a = Tensor::from_rows({{3, 4}});
  const Tensor b = Tensor::from_rows({{3, 4.5}});
  EXPECT_NEAR(relative_error(a, b), 0.5 / std::hypot(3.0, 4.5), 1e-15);
  EXPECT_EQ(relative_error(Tensor(2, 2), Tensor(2, 2)), 0.0);
}

TEST(Gradcheck, SuitesCoverEveryModule) {
  std::set<std::string> suites;
  const std::vector<CheckCase> all = gradcheck_cases("all");
  for (const CheckCase& c : all) suites.insert(c.suite);
  EXPECT_EQ(suites, (std::set<std::string>{"tensor_ad", "softkmeans", "decisions"}));
  EXPECT_EQ(all.size(), tensor_ad_cases().size() + softkmeans_cases().size() + decisions_cases().size());
  EXPECT_THROW(gradcheck_cases("nope"), std::invalid_argument);
}

TEST(Gradcheck, AllSuitesPassAndReport) {
  std::vector<CheckResult> results;
  for (const CheckCase& c : gradcheck_cases("all")) results.push_back(run_case(c));
  for (const CheckResult& r : results) {
    EXPECT_TRUE(r.passed) << r.suite << "/" << r.name << " " << r.max_rel_error;
    EXPECT_GE(r.trials, 1);
  }
  std::ostringstream os;
  print_report(results, os);
  const std::string report = os.str();
  for (const CheckResult& r : results) EXPECT_NE(report.find(r.name), std::string::npos);
  EXPECT_NE(report.find("max"), std::string::npos) << report;
}

TEST(Gradcheck, ClusteredPointsShapeAndDeterminism) {
  const Tensor a = clustered_points(12, 4, 3, 0.1, 5);
  EXPECT_EQ(a.rows(), 12u);
  EXPECT_EQ(a.cols(), 4u);
  const Tensor b = clustered_points(12, 4, 3, 0.1, 5);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

}  // namespace
}  // namespace dfl
