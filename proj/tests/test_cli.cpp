#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli_app.hpp"

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nmvm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = nmvm::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return std::string(NMVM_DATA_DIR) + "/" + name; }

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Cli, AlphaGrid) {
  const auto g = nmvm::cli::parse_alpha_grid("0.95:0.99:5");
  ASSERT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g[2], 0.97);
  EXPECT_EQ(nmvm::cli::parse_alpha_grid("0.9,0.95").size(), 2u);
  EXPECT_THROW(nmvm::cli::parse_alpha_grid("0.95,0.9"), nmvm::cli::UsageError);
  EXPECT_ANY_THROW(nmvm::cli::parse_alpha_grid("0:0.9:3"));
  EXPECT_ANY_THROW(nmvm::cli::parse_alpha_grid("0.9:1:3"));
}

TEST(Cli, SweepShape) {
  const auto r = cli({"sweep", "--model", data("mgh4_fitted.json"), "--alpha-grid", "0.95:0.99:41", "--method",
                      "cte,tv,tcm", "--order", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  EXPECT_EQ(ls.front(), "alpha,method,k,component,capital,proportion,total");
  EXPECT_EQ(ls.size(), 1u + 41u * 3u * 4u);
  EXPECT_EQ(ls[1].substr(0, 12), "0.95,cte,1,B");
}

TEST(Cli, SweepIsReproducible) {
  const std::vector<std::string> args{"sweep", "--model", data("mgh4_fitted.json"), "--alpha-grid", "0.95:0.999:12",
                                      "--method", "cte,tv,tcm,combined,euler_rooted", "--pq-grid", "--full-precision"};
  auto a = args, b = args;
  a.insert(a.end(), {"--threads", "1"});
  b.insert(b.end(), {"--threads", "3"});
  const auto x = cli(a), y = cli(b), z = cli(a);
  ASSERT_EQ(x.code, 0) << x.err;
  EXPECT_EQ(x.out, y.out);
  EXPECT_EQ(x.out, z.out);
  EXPECT_NE(x.out.find("combined[p=1.5;q=0.003]"), std::string::npos);
}

TEST(Cli, CombinedDefaultIsCte) {
  const std::vector<std::string> base{"allocate", "--model", data("gig111_3.json"), "--alpha", "0.97"};
  auto a = base, b = base;
  a.insert(a.end(), {"--method", "cte"});
  b.insert(b.end(), {"--method", "combined", "--m1", "1", "--m2", "0", "--m3", "0"});
  const auto la = lines(cli(a).out), lb = lines(cli(b).out);
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 1; i < la.size(); ++i) {
    const auto tail = [](const std::string& s) { return s.substr(s.find(',', s.find(',', s.find(',') + 1) + 1)); };
    EXPECT_EQ(tail(la[i]), tail(lb[i]));
  }
}

TEST(Cli, MomentsOutput) {
  const auto r = cli({"tm", "--model", data("gaussian2.json"), "--alpha", "0.95", "--order", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out).size(), 5u);
  const auto c = cli({"tcm", "--model", data("gaussian2.json"), "--alpha", "0.95", "--order", "2"});
  EXPECT_EQ(lines(c.out)[1].substr(0, 9), "0.95,1,0");
}

TEST(Cli, WeightsReweight) {
  const auto a = cli({"tm", "--model", data("gaussian2.json"), "--alpha", "0.9", "--order", "1", "--full-precision"});
  const auto b = cli({"tm", "--model", data("gaussian2.json"), "--alpha", "0.9", "--order", "1", "--weights", "1,1",
                      "--full-precision"});
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(cli({"tm", "--model", data("gaussian2.json"), "--alpha", "0.9", "--weights", "1"}).code, 1);
}

TEST(Cli, LossesAndStats) {
  const auto r = cli({"losses", "--prices", data("prices_sample.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  EXPECT_EQ(ls.front(), "date,AAA,BBB");
  EXPECT_EQ(ls.size(), 7u);
  const auto s = cli({"stats", "--prices", data("prices_sample.csv")});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(lines(s.out).front(), "label,count,mean,median,min,max,stdev,skewness,kurtosis");
  EXPECT_EQ(lines(s.out)[1].substr(0, 6), "AAA,6,");
}

TEST(Cli, OutFileIsAtomic) {
  const auto path = (std::filesystem::temp_directory_path() / "nmvm_cli_out.csv").string();
  const auto r = cli({"tm", "--model", data("gaussian2.json"), "--alpha", "0.9", "--out", path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "alpha,k,tm");
  std::filesystem::remove(path);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(cli({}).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"tm", "--model", data("absent.json"), "--alpha", "0.9"}).code, 1);
  EXPECT_EQ(cli({"tm", "--model", data("gaussian2.json")}).code, 1);
  EXPECT_EQ(cli({"tm", "--model", data("gaussian2.json"), "--alpha", "1.5"}).code, 1);
  EXPECT_EQ(cli({"tm", "--model", data("gaussian2.json"), "--alpha", "0.9", "--order", "9"}).code, 1);
  EXPECT_EQ(cli({"allocate", "--model", data("gaussian2.json"), "--alpha", "0.9", "--method", "var"}).code, 1);
  EXPECT_EQ(cli({"allocate", "--model", data("gaussian2.json"), "--alpha", "0.9", "--method", "combined", "--m2",
                 "-1"})
                .code,
            1);
  // Negative third tail central moment of a left-skewed aggregate at low α.
  const auto path = (std::filesystem::temp_directory_path() / "nmvm_leftskew.json").string();
  std::ofstream(path) << R"({"dimension": 1, "mixing": {"type": "gig", "lambda": 1, "chi": 1, "psi": 1},
    "mu": [0], "gamma": [-2], "sigma": [1]})";
  const auto tcm = cli({"tcm", "--model", path, "--alpha", "0.05", "--order", "3", "--full-precision"});
  if (tcm.out.find(",3,-") != std::string::npos) {
    const auto r = cli({"allocate", "--model", path, "--alpha", "0.05", "--method", "euler_rooted", "--order", "3"});
    EXPECT_EQ(r.code, 3) << r.err;
  }
  std::filesystem::remove(path);
  EXPECT_EQ(cli({"stats", "--prices", data("gaussian2.json")}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, ValidateAndCorrupt) {
  const std::vector<std::string> base{"validate", "--model", data("gaussian2.json"), "--alpha", "0.95",
                                      "--order", "2", "--samples", "100000"};
  const auto ok = cli(base);
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(lines(ok.out).front(), "quantity,analytic,empirical,se,z");
  auto bad = base;
  bad.insert(bad.end(), {"--corrupt", "tm_2@0.95"});
  const auto r = cli(bad);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("tm_2@0.95"), std::string::npos);
}
