#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ra/config.hpp"
#include "ra/csv.hpp"
#include "ra/svg.hpp"

using namespace ra;

TEST_CASE("config: sections, types, comments") {
  const std::string text =
      "# a comment\n"
      "[experiment]\n"
      "seed = 9\n"
      "\n"
      "[dataset]\n"
      "source = digits\n"
      "classes = 0, 1\n"
      "per_class = 50\n"
      "[train]\n"
      "lr0 = 0.25\n"
      "epochs = 3\n";
  auto cfg = config::experiment_from_keyvalues(config::parse_config_text(text));
  CHECK(cfg.seed == 9);
  CHECK(cfg.dataset.source == data::DataSource::kDigits);
  CHECK(cfg.dataset.class_subset == std::vector<int>{0, 1});
  CHECK(cfg.dataset.per_class == 50);
  CHECK(cfg.train.lr0 == 0.25);
  CHECK(cfg.train.epochs == 3);
  // derived sub-seeds come from the master seed
  CHECK(cfg.model.seed == (9 ^ 0x02));
  CHECK(cfg.train.seed == (9 ^ 0x03));
}

TEST_CASE("config: errors carry line numbers") {
  CHECK_THROWS_WITH_AS(config::parse_config_text("[train]\nbroken line\n"),
                       doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_WITH_AS(config::parse_config_text("orphan = 1\n"),
                       doctest::Contains("line 1"), std::runtime_error);
  CHECK_THROWS_WITH_AS(config::parse_config_text("[train\nepochs = 1\n"),
                       doctest::Contains("line 1"), std::runtime_error);
  const std::string dup = "[train]\nepochs = 1\nepochs = 2\n";
  CHECK_THROWS_WITH_AS(config::parse_config_text(dup),
                       doctest::Contains("line 3"), std::runtime_error);
  const std::string bad_type = "[train]\nepochs = soon\n";
  CHECK_THROWS_WITH_AS(
      config::experiment_from_keyvalues(config::parse_config_text(bad_type)),
      doctest::Contains("line 2"), std::runtime_error);
}

TEST_CASE("config: unknown keys are rejected") {
  const std::string text = "[train]\nepochz = 5\n";
  CHECK_THROWS_WITH_AS(
      config::experiment_from_keyvalues(config::parse_config_text(text)),
      doctest::Contains("train.epochz"), std::runtime_error);
}

TEST_CASE("config: resolve text is stable and hashable") {
  config::ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.train.lr0 = 0.1;
  const std::string a = config::resolve_text(cfg);
  const std::string b = config::resolve_text(cfg);
  CHECK(a == b);
  CHECK(config::fnv1a_hash(a) == config::fnv1a_hash(b));
  cfg.train.lr0 = 0.2;
  CHECK(config::fnv1a_hash(config::resolve_text(cfg)) != config::fnv1a_hash(a));
}

TEST_CASE("csv: doubles round-trip exactly through 17 significant digits") {
  const double values[] = {1.0 / 3.0, 2.5e-17, -std::acos(-1.0), 1e300,
                           0.1 + 0.2};
  for (double v : values) {
    const std::string s = csv::format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("csv: layout with comments and header") {
  csv::Table t({"a", "b"});
  t.set_comment("seed = 7\nsource = digits");
  t.begin_row().cell(Index(1)).cell(0.5);
  t.begin_row().cell(Index(2)).cell(std::string("x"));
  const std::string out = t.to_string();
  CHECK(out ==
        "# seed = 7\n# source = digits\na,b\n1,0.5\n2,x\n");
}

TEST_CASE("csv: ragged rows rejected") {
  csv::Table t({"a", "b"});
  t.begin_row().cell(Index(1));
  CHECK_THROWS_AS(t.to_string(), std::logic_error);
}

TEST_CASE("svg heatmap: one rect per cell") {
  Matrix m(2, 2);
  m << 1.0, -1.0, 0.25, 0.0;
  const std::string body = svg::heatmap(m);
  std::size_t rects = 0, pos = 0;
  while ((pos = body.find("<rect", pos)) != std::string::npos) {
    ++rects;
    pos += 5;
  }
  CHECK(rects == 4);
  CHECK(body.find("<svg") != std::string::npos);
  CHECK(body.find("version=\"1.1\"") != std::string::npos);
  CHECK(body.find("</svg>") != std::string::npos);
}

TEST_CASE("svg heatmap: deterministic bytes and NaN rejection") {
  Matrix m(3, 4);
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 4; ++c) m(r, c) = double(r) - double(c) * 0.3;
  CHECK(svg::heatmap(m) == svg::heatmap(m));

  m(1, 2) = std::nan("");
  CHECK_THROWS_AS(svg::heatmap(m), std::invalid_argument);
}

TEST_CASE("svg heatmap grid: panels share normalization and render") {
  std::vector<std::vector<Matrix>> grid(2, std::vector<Matrix>(2, Matrix::Zero(3, 3)));
  grid[0][0].diagonal().setConstant(2.0);
  grid[1][1].diagonal().setConstant(-2.0);
  const std::string body = svg::heatmap_grid(grid, "maps");
  CHECK(body.find("i=1") != std::string::npos);
  CHECK(body.find("j=2") != std::string::npos);
  CHECK(body == svg::heatmap_grid(grid, "maps"));
}

TEST_CASE("svg lines: structure, determinism, error paths") {
  svg::Series s;
  s.label = "curve";
  s.xs = Vector::LinSpaced(5, 0.0, 4.0);
  s.ys = s.xs.array().square();
  const std::string body = svg::line_chart({s}, "squares");
  CHECK(body.find("<polyline") != std::string::npos);
  CHECK(body.find("squares") != std::string::npos);
  CHECK(body == svg::line_chart({s}, "squares"));

  svg::Series bad = s;
  bad.ys(2) = std::nan("");
  CHECK_THROWS_AS(svg::line_chart({bad}, "x"), std::invalid_argument);
  CHECK_THROWS_AS(svg::line_chart({}, "x"), std::invalid_argument);
}

TEST_CASE("svg trajectories: renders one polyline per trajectory") {
  std::vector<Matrix> lines(3, Matrix::Zero(4, 2));
  for (Index i = 0; i < 4; ++i) {
    lines[1](i, 0) = double(i);
    lines[2](i, 1) = double(i) * 0.5;
  }
  const std::string body = svg::trajectories(lines, {0, 1, 0}, "trajectories");
  std::size_t polys = 0, pos = 0;
  while ((pos = body.find("<polyline", pos)) != std::string::npos) {
    ++polys;
    pos += 9;
  }
  CHECK(polys == 3);
}
