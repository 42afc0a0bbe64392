#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "rankdist/calibration.hpp"
#include "rankdist/io.hpp"
#include "rankdist/scenario.hpp"

using namespace rankdist;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("rankdist_io_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

template <class F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no rankdist::Error thrown";
  return Error(ErrorCode::Io, "none");
}

}  // namespace

TEST(FormatNumber, RoundTripsBitExactly) {
  testgen::Rng rng(31);
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t bits = rng();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    const auto s = io::format_number(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    ASSERT_EQ(std::memcmp(&v, &back, sizeof v), 0) << s;
  }
  EXPECT_EQ(io::format_number(1000000.0), "1000000");
  EXPECT_EQ(io::format_number(0.111), "0.111");
  EXPECT_EQ(io::format_number(0.1 + 0.2), "0.30000000000000004");
}

TEST_F(IoTest, ReadsGroupedShares) {
  const auto p = write("g.csv",
                       "lo_pct,hi_pct,share\n0,0.01,0.111\n0.01,0.1,0.108\n0.1,0.5,0.124\n0.5,1,0.072\n1,10,0.357\n"
                       "10,100,0.228\n");
  const auto g = io::read_grouped_shares(p);
  EXPECT_EQ(g.brackets, standard_brackets());
  EXPECT_EQ(g.shares[0], 0.111);
  EXPECT_EQ(g.shares[5], 0.228);
}

TEST_F(IoTest, ToleratesCrlfAndBlankLines) {
  const auto g = io::read_grouped_shares(write("g.csv", "lo_pct,hi_pct,share\r\n\r\n0,50,0.5\r\n50,100,0.5\r\n"));
  EXPECT_EQ(g.shares.size(), 2u);
}

TEST_F(IoTest, GroupedValidationErrorsNameTheFile) {
  auto e = error_of([&] { io::read_grouped_shares(write("overlap.csv", "lo_pct,hi_pct,share\n0,10,0.5\n5,100,0.5\n")); });
  EXPECT_EQ(e.code(), ErrorCode::BracketGap);
  EXPECT_NE(std::string(e.what()).find("overlap.csv"), std::string::npos);
  e = error_of([&] { io::read_grouped_shares(write("sum.csv", "lo_pct,hi_pct,share\n0,50,0.5\n50,100,0.6\n")); });
  EXPECT_EQ(e.code(), ErrorCode::BadSum);
}

TEST_F(IoTest, ParseErrorsCarryLine) {
  auto e = error_of([&] { io::read_grouped_shares(write("bad.csv", "lo_pct,hi_pct,share\n0,50,0.5\n50,100,abc\n")); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_EQ(e.line(), 3u);
  EXPECT_NE(std::string(e.what()).find("bad.csv:3"), std::string::npos);
  e = error_of([&] { io::read_grouped_shares(write("fields.csv", "lo_pct,hi_pct,share\n0,50\n")); });
  EXPECT_EQ(e.line(), 2u);
  e = error_of([&] { io::read_grouped_shares(write("header.csv", "lo,hi,share\n0,100,1\n")); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_EQ(e.line(), 1u);
  e = error_of([&] { io::read_grouped_shares(write("empty.csv", "")); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  e = error_of([&] { io::read_grouped_shares(dir_ / "missing.csv"); });
  EXPECT_EQ(e.code(), ErrorCode::Io);
  e = error_of([&] { io::read_grouped_shares(write("trail.csv", "lo_pct,hi_pct,share\n0,100,1x\n")); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
}

TEST_F(IoTest, TrendTaxAndVolatilityFiles) {
  const auto trend = io::read_trend(write("t.csv", "lo_pct,hi_pct,growth_per_year\n0,0.01,0.01\n10,100,-0.005\n"));
  EXPECT_EQ(trend.entries, preset_scenario(2).entries);
  const auto tax = io::read_tax(write("x.csv", "lo_pct,hi_pct,tax_rate_per_year\n0,0.5,0.02\n0.5,1,0.01\n"));
  EXPECT_EQ(tax.entries, progressive_tax_default().entries);
  EXPECT_EQ(error_of([&] { io::read_tax(write("neg.csv", "lo_pct,hi_pct,tax_rate_per_year\n0,1,-0.01\n")); }).code(),
            ErrorCode::NegativeInput);
  const auto vol = io::read_volatility_table(write(
      "v.csv", "lo_pct,hi_pct,sigma_low,sigma_high\n0,10,0.283,0.286\n10,20,0.283,0.294\n20,40,0.283,0.316\n"
               "40,60,0.283,0.392\n60,100,0.283,1.662\n"));
  const auto def = default_volatility_table();
  EXPECT_EQ(vol.brackets, def.brackets);
  EXPECT_EQ(vol.sigma_high, def.sigma_high);
}

TEST_F(IoTest, WriteReadWriteIsFixpoint) {
  testgen::Rng rng(6);
  const auto s = testgen::descending_shares(rng, 6, 0.01, 1.0);
  const auto g = make_grouped_shares(standard_brackets(), s);
  io::write_grouped_shares(dir_ / "a.csv", g);
  io::write_grouped_shares(dir_ / "b.csv", io::read_grouped_shares(dir_ / "a.csv"));
  EXPECT_EQ(slurp(dir_ / "a.csv"), slurp(dir_ / "b.csv"));

  io::write_volatility_table(dir_ / "v1.csv", default_volatility_table());
  io::write_volatility_table(dir_ / "v2.csv", io::read_volatility_table(dir_ / "v1.csv"));
  EXPECT_EQ(slurp(dir_ / "v1.csv"), slurp(dir_ / "v2.csv"));

  io::write_trend(dir_ / "t1.csv", preset_scenario(4));
  io::write_trend(dir_ / "t2.csv", io::read_trend(dir_ / "t1.csv"));
  EXPECT_EQ(slurp(dir_ / "t1.csv"), slurp(dir_ / "t2.csv"));

  io::write_tax(dir_ / "x1.csv", progressive_tax_default());
  io::write_tax(dir_ / "x2.csv", io::read_tax(dir_ / "x1.csv"));
  EXPECT_EQ(slurp(dir_ / "x1.csv"), slurp(dir_ / "x2.csv"));

  const auto values = testgen::positive(rng, 500, -1e3, 1e3);
  io::write_rank_series(dir_ / "r1.csv", "alpha", values);
  const auto back = io::read_rank_series(dir_ / "r1.csv", "alpha");
  EXPECT_EQ(back, values);
  io::write_rank_series(dir_ / "r2.csv", "alpha", back);
  EXPECT_EQ(slurp(dir_ / "r1.csv"), slurp(dir_ / "r2.csv"));
}

TEST_F(IoTest, GenericTableFixpoint) {
  testgen::Rng rng(7);
  std::vector<std::vector<double>> rows;
  for (int r = 0; r < 50; ++r) rows.push_back(testgen::positive(rng, 4, -1e-8, 1e8));
  const std::string header[] = {"year", "0-0.01", "0.01-0.1", "10-100"};
  io::write_csv(dir_ / "p1.csv", header, rows);
  const auto t = io::read_csv(dir_ / "p1.csv");
  EXPECT_EQ(t.rows, rows);
  io::write_csv(dir_ / "p2.csv", t.header, t.rows);
  EXPECT_EQ(slurp(dir_ / "p1.csv"), slurp(dir_ / "p2.csv"));
}

TEST_F(IoTest, RankSeriesRejectsGaps) {
  const auto p = write("r.csv", "rank,share\n1,0.5\n3,0.5\n");
  EXPECT_EQ(error_of([&] { io::read_rank_series(p, "share"); }).line(), 3u);
}
