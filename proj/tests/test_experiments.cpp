#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "aif/csv.hpp"
#include "aif/error.hpp"
#include "aif/experiments.hpp"
#include "aif/parallel.hpp"
#include "doctest.h"

using namespace aif;
using namespace aif::exp;

TEST_CASE("parallel_for visits each index once and rethrows") {
  for (const int threads : {1, 2, 5}) {
    std::vector<int> hits(37, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i] += 1; });
    for (const int h : hits) CHECK(h == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 4) throw std::runtime_error("cell");
                  }),
                  std::runtime_error);
}

TEST_CASE("csv formatting") {
  CHECK(csv::num(1234567.0) == "1.23457e+06");
  CHECK(csv::num(0.0001234564) == "0.000123456");
  CHECK(csv::num(-0.0) == "0");
  CHECK(csv::num(std::nan("")) == "nan");
  CHECK(csv::num(std::optional<double>{}) == "");
  CHECK(csv::flag(true) == "1");
  CHECK(csv::flag(std::optional<bool>{}) == "");
  csv::Table t({"a", "b"});
  t.add({"1", "2"});
  CHECK_THROWS_AS(t.add({"1"}), DomainError);
  CHECK(t.str() == "a,b\n1,2\n");
}

TEST_CASE("zoom-scaled trains keep the iris size at focus") {
  const optics::OpticalTrain ref;
  for (const double d : {1000.0, 3000.0}) {
    const auto t = scaled_train(ref, d, 5000.0);
    CHECK(t.f_o == doctest::Approx(350.0 * d / 5000.0));
    CHECK(t.d_ref == d);
    CHECK(optics::solve_focus(t, d).power_dpt == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(optics::pixels_across_iris(d, t, 0.0) ==
          doctest::Approx(optics::pixels_across_iris(5000.0, ref, 0.0)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(scaled_train(ref, 500.0, 5000.0), DomainError);
}

TEST_CASE("subject spec places the eye at range_mm at t = 0") {
  const scene::RigGeometry rig;
  SubjectSpec s;
  s.range_mm = 3170.0;
  s.speed_mm_s = 1000.0;
  s.t_start = -500.0;
  s.t_end = 1000.0;
  const auto subj = s.make(rig);
  const Vec3 e0 = scene::eye_position(subj, 0.0);
  CHECK(std::hypot(e0.x, e0.y) == doctest::Approx(3170.0));
  CHECK(std::hypot(scene::eye_position(subj, 100.0).x, 0.0) == doctest::Approx(3070.0));
  const auto at = subject_at(rig, 1, 1, 5000.0);
  CHECK(scene::line_of_sight_distance(scene::eye_position(at, 0.0), rig) == doctest::Approx(5000.0));
}

TEST_CASE("bare-lens scan brackets the analytic DoF and is reproducible") {
  Setup s;
  ScanOptions opt;
  opt.mode = FocusMode::fixed;
  opt.grid_mm = 20.0;
  opt.max_front_mm = opt.max_rear_mm = 200.0;
  const auto a = scan_interval(s, s.train, 5000.0, opt, 11);
  const auto b = scan_interval(s, s.train, 5000.0, opt, 11);
  CHECK(a.near_mm == b.near_mm);
  CHECK(a.far_mm == b.far_mm);
  REQUIRE(a.center_pass);
  const auto dof = optics::depth_of_field(s.train.f_o, 5000.0, s.train.n_stop, s.train.coc);
  CHECK(std::abs(a.near_mm - dof.near_limit) <= opt.grid_mm);
  CHECK(std::abs(a.far_mm - dof.far_limit) <= opt.grid_mm);
  CHECK(a.front_stop.find("sharpness") != std::string::npos);
  for (const auto& p : a.profile)
    if (p.distance_mm >= a.near_mm && p.distance_mm <= a.far_mm) CHECK(p.pass);
  CHECK(a.total() == doctest::Approx(a.far_mm - a.near_mm));
}

TEST_CASE("dof table rows and checks") {
  const Setup s;
  const auto out = run_dof_table(s, {});
  REQUIRE(out.table("dof_table") != nullptr);
  CHECK(out.table("dof_table")->rows() == 9);
  CHECK(out.all_pass());
  CHECK(out.table("missing") == nullptr);
  CHECK_THROWS_AS(run_dof_table(s, {1000.0, 5000.0, 0.0}), DomainError);
}

TEST_CASE("calibration reproduces the frozen optical constants") {
  const Setup s;
  const double coc = optics::coc_for_total_dof(s.train.f_o, 5000.0, s.train.n_stop, 91.0);
  CHECK(coc == doctest::Approx(s.train.coc).epsilon(1e-7));
  optics::OpticalTrain t = s.train;
  const double p = optics::solve_focus(t, 7700.0).power_dpt;
  CHECK(optics::pixels_across_iris(7700.0, t, p) == doctest::Approx(s.gate.px_min).epsilon(1e-8));
}
