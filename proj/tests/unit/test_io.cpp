#include "ifeatt/error.hpp"
#include "ifeatt/io.hpp"
#include "ifeatt/simulation.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace {

using namespace ifeatt;

template <typename F>
ErrorCode code_of(F&& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "expected an ifeatt::Error";
  return ErrorCode::IoError;
}

CsvTable table(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

CsvSchema with_w() {
  CsvSchema s;
  s.covariates = {"w"};
  return s;
}

TEST(ReadCsv, QuotesBomAndCrlf) {
  const CsvTable t = table("\xEF\xBB\xBFid,\"name, quoted\",y\r\n1,\"a \"\"b\"\"\",2.5\r\n");
  ASSERT_EQ(t.header.size(), 3u);
  EXPECT_EQ(t.header[0], "id");
  EXPECT_EQ(t.header[1], "name, quoted");
  EXPECT_EQ(t.rows[0][1], "a \"b\"");
  EXPECT_EQ(t.rows[0][2], "2.5");
  EXPECT_EQ(t.column("y"), 2);
  EXPECT_EQ(code_of([&] { t.column("nope"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { table("a,b\n1,2,3\n"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { read_csv_file("/nonexistent/file.csv"); }), ErrorCode::IoError);
}

TEST(LoadPanelCsv, WellFormed) {
  const PanelDataset data = load_panel_csv(table(
      "id,period,y,d,w\n"
      "a,2001,1.0,0,0.5\n"
      "a,2002,2.0,0,0.5\n"
      "a,2003,3.5,0,0.5\n"
      "b,2003,4.0,1,1.5\n"
      "b,2001,0.0,1,1.5\n"
      "b,2002,1.0,1,1.5\n"), with_w());
  EXPECT_EQ(data.n(), 2);
  EXPECT_EQ(data.t_total(), 3);
  EXPECT_EQ(data.y(1, 2), 4.0);
  EXPECT_EQ(data.y(1, 0), 0.0);
  EXPECT_EQ(data.z(1, 1), 1.5);
  EXPECT_EQ(data.z(0, 0), 1.0);
  EXPECT_EQ(data.d(1), 1.0);
  EXPECT_EQ(data.covariate_names, (std::vector<std::string>{"const", "w"}));
  EXPECT_EQ(data.period_labels, (std::vector<std::string>{"2001", "2002", "2003"}));
}

TEST(LoadPanelCsv, Unbalanced) {
  std::string message;
  const auto code = code_of(
      [] {
        load_panel_csv(table("id,period,y,d,w\n"
                             "3,1,1,0,0\n3,2,1,0,0\n3,3,1,0,0\n"
                             "7,1,1,1,0\n7,3,1,1,0\n"
                             "8,1,1,1,0\n8,2,1,1,0\n8,3,1,1,0\n"),
                       with_w());
      },
      &message);
  EXPECT_EQ(code, ErrorCode::UnbalancedPanel);
  EXPECT_NE(message.find("{7}"), std::string::npos) << message;
}

TEST(LoadPanelCsv, NonConstantCovariate) {
  std::string message;
  const auto code = code_of(
      [] {
        load_panel_csv(table("id,period,y,d,w\n"
                             "1,1,1,0,0\n1,2,1,0,0\n1,3,1,0,0\n"
                             "2,1,1,1,4\n2,2,1,1,5\n2,3,1,1,4\n"),
                       with_w());
      },
      &message);
  EXPECT_EQ(code, ErrorCode::NonConstantCovariate);
  EXPECT_NE(message.find("'w'"), std::string::npos);
  EXPECT_NE(message.find("unit 2"), std::string::npos);
}

TEST(LoadPanelCsv, BadValues) {
  EXPECT_EQ(code_of([] {
              load_panel_csv(table("id,period,y,d,w\n1,1,1,0,0\n1,2,1,0,0\n1,4,1,0,0\n"), with_w());
            }),
            ErrorCode::BadPeriodLabels);
  EXPECT_EQ(code_of([] {
              load_panel_csv(table("id,period,y,d,w\n1,x,1,0,0\n"), with_w());
            }),
            ErrorCode::BadPeriodLabels);
  EXPECT_EQ(code_of([] {
              load_panel_csv(table("id,period,y,d,w\n1,1,abc,0,0\n1,2,1,0,0\n1,3,1,0,0\n"), with_w());
            }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] {
              load_panel_csv(table("id,period,y,d,w\n1,1,,0,0\n1,2,1,0,0\n1,3,1,0,0\n"), with_w());
            }),
            ErrorCode::NonFiniteInput);
}

TEST(LoadPanelCsv, RoundTrip) {
  sim::SimConfig cfg;
  cfg.n = 50;
  const PanelDataset data = sim::generate_panel(cfg, 0);
  std::ostringstream out;
  write_panel_csv(out, data, with_w());
  std::istringstream in(out.str());
  const PanelDataset back = load_panel_csv(read_csv(in), with_w());
  EXPECT_EQ(back.y, data.y);
  EXPECT_EQ(back.z, data.z);
  EXPECT_EQ(back.d, data.d);
}

TEST(LoadRcCsv, LoadsAndRejectsGaps) {
  const RcDataset rc = load_rc_csv(table("period,y,d,w\n1,1,0,0\n2,2,1,1\n3,3,0,1\n3,4,1,0\n"), with_w());
  EXPECT_EQ(rc.rows(), 4);
  EXPECT_EQ(rc.t_total, 3);
  EXPECT_EQ(rc.t, (std::vector<int>{1, 2, 3, 3}));
  EXPECT_EQ(code_of([] { load_rc_csv(table("period,y,d,w\n1,1,0,0\n3,2,1,1\n4,3,0,1\n"), with_w()); }),
            ErrorCode::EmptyPeriod);
}

TEST(LoadRcCsv, ExplodedPanelMatchesPanelMoments) {
  sim::SimConfig cfg;
  cfg.n = 300;
  const PanelDataset panel = sim::generate_panel(cfg, 1);
  std::ostringstream out;
  write_panel_csv(out, panel, with_w());
  std::istringstream in(out.str());
  const RcDataset rc = load_rc_csv(read_csv(in), with_w());
  const ModelSpec spec = ModelSpec::intercept_in_x(2);
  EXPECT_NEAR(estimate_att_rc(rc, spec).att_at(3),
              att_series(estimate_gamma1(panel, spec), panel).att_at(3), 1e-8);
}

TEST(LoadTvCsv, VaryingCovariates) {
  CsvSchema s;
  s.covariates = {"x"};
  const TvPanelDataset tv = load_tv_csv(table("id,period,y,d,x\n"
                                              "1,1,1,0,0.1\n1,2,2,0,0.2\n1,3,3,0,0.3\n"
                                              "2,1,1,1,1.1\n2,2,2,1,1.2\n2,3,3,1,1.3\n"),
                                        s);
  EXPECT_EQ(tv.k_x(), 1);
  EXPECT_EQ(tv.x_tv[0](1, 2), 1.3);
}

TEST(LoadMultigroup, GroupsByPeriodLabel) {
  CsvSchema s;
  s.covariates = {"w"};
  const MultiGroupDataset mg = load_multigroup_csv(
      table("id,period,y,group,w\n"
            "1,10,1,0,0\n1,11,1,0,0\n1,12,1,0,0\n1,13,1,0,0\n"
            "2,10,1,12,1\n2,11,1,12,1\n2,12,1,12,1\n2,13,1,12,1\n"
            "3,10,1,13,1\n3,11,1,13,1\n3,12,1,13,1\n3,13,1,13,1\n"),
      s);
  EXPECT_EQ(mg.group, (std::vector<int>{0, 3, 4}));
  EXPECT_EQ(mg.t_total(), 4);
}

TEST(ResolveSpec, Names) {
  const ModelSpec spec = resolve_spec({"const", "w", "x"}, {"const", "x"}, {"w"});
  EXPECT_EQ(spec.x_cols, (std::vector<Index>{0, 2}));
  EXPECT_EQ(spec.w_cols, (std::vector<Index>{1}));
  EXPECT_EQ(code_of([] { resolve_spec({"const"}, {"const"}, {"q"}); }), ErrorCode::SpecMismatch);
}

}  // namespace
