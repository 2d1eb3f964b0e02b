#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "test_helpers.hpp"
#include "thermosleep/response_models.hpp"

using namespace thermosleep;
using namespace tsl_test;

namespace {

const CivilDate kNight{2016, 7, 1};

// Joined person-night fixture: one user per admin, exposure fields filled.
struct Fixture {
  std::vector<SleepRecord> records;
  std::vector<Exposure> exposures;
  std::map<std::string, UserInfo> users;
};

Fixture make_fixture(int n_users, int n_nights, Rng& rng,
                     const std::function<double(double, const UserInfo&, const CivilDate&)>& dgp,
                     double tmin_lo = -5.0, double tmin_hi = 30.0) {
  Fixture f;
  for (int u = 0; u < n_users; ++u) {
    UserInfo info;
    info.user_id = "u" + std::to_string(u);
    info.lat = 45.0;
    info.lon = 10.0;
    info.admin1 = "A" + std::to_string(u % 8);
    info.admin2 = info.admin1 + "_0";
    info.categories["age_group"] = (u % 2 == 0) ? "mid" : "old";
    f.users[info.user_id] = info;
  }
  for (int u = 0; u < n_users; ++u) {
    const UserInfo& info = f.users.at("u" + std::to_string(u));
    const double user_eff = rng.normal(0.0, 15.0);
    for (int d = 0; d < n_nights; ++d) {
      const CivilDate night = add_days(kNight, d);
      const double tmin = rng.uniform(tmin_lo, tmin_hi);
      Exposure e;
      e.user_id = info.user_id;
      e.night_date = night;
      e.tmin = tmin;
      e.trange = 8.0 + rng.uniform(0.0, 4.0);
      e.prcp = rng.uniform(0.0, 2.0);
      e.wind = rng.uniform(0.0, 10.0);
      e.cloud = rng.uniform(0.0, 100.0);
      e.rh = rng.uniform(30.0, 95.0);
      e.tmin_normal = 12.0;
      e.trange_normal = 9.0;
      e.prcp_normal = 0.3;
      e.wind_normal = 3.0;
      e.cloud_normal = 50.0;
      e.rh_normal = 65.0;
      e.tmin_anomaly = *e.tmin - *e.tmin_normal;
      e.heat_index_c = heat_index(tmin, *e.rh);
      f.exposures.push_back(e);
      const double duration = 440.0 + user_eff + dgp(tmin, info, night) + rng.normal(0.0, 5.0);
      f.records.push_back(
          make_record(info.user_id, night, 660, static_cast<int>(std::lround(duration))));
    }
  }
  return f;
}

}  // namespace

TEST_CASE("bin_value maps left-closed right-open intervals with open ends") {
  const BinScheme& s = default_schemes().tmin;
  CHECK(s.bin_label(bin_value(7.0, s)) == "[5,10)");
  CHECK(bin_value(7.0, s) == s.reference_bin);
  CHECK(s.bin_label(bin_value(10.0, s)) == "[10,15)");  // boundary goes right
  CHECK(s.bin_label(bin_value(-0.3, s)) == "[-5,0)");
  CHECK(s.bin_label(bin_value(27.0, s)) == "[25,+inf)");  // the >25 top bin
  CHECK(s.bin_label(bin_value(-40.0, s)) == "(-inf,-25)");
  CHECK_THROWS_AS(bin_value(std::nan(""), s), ValidationError);
}

TEST_CASE("default schemes carry the reference categories") {
  const DefaultSchemes& d = default_schemes();
  CHECK(d.tmin.bin_label(d.tmin.reference_bin) == "[5,10)");
  CHECK(d.trange.bin_label(d.trange.reference_bin) == "[5,10)");
  CHECK(d.prcp.bin_label(d.prcp.reference_bin) == "[0,1)");
  CHECK(d.wind.bin_label(d.wind.reference_bin) == "[0,5)");
  CHECK(d.cloud.bin_label(d.cloud.reference_bin) == "[0,20)");
  CHECK(d.rh.bin_label(d.rh.reference_bin) == "[60,80)");
  CHECK(d.anomaly.bin_label(d.anomaly.reference_bin) == "[-0.5,0.5)");
  CHECK(bin_value(0.2, d.anomaly) == d.anomaly.reference_bin);
  CHECK(d.anomaly.bin_label(bin_value(1.4, d.anomaly)) == "[0.5,1.5)");  // centered on +1
  CHECK(d.tmin_extended.bin_label(bin_value(33.0, d.tmin_extended)) == "[30,+inf)");
  CHECK(d.tmin_extended.bin_label(bin_value(-23.0, d.tmin_extended)) == "(-inf,-20)");
}

TEST_CASE("every value lands in exactly one bin") {
  Rng rng(7);
  const DefaultSchemes& d = default_schemes();
  for (const BinScheme* s : {&d.tmin, &d.anomaly, &d.rh}) {
    for (int trial = 0; trial < 500; ++trial) {
      const double x = rng.uniform(-60.0, 60.0);
      const std::size_t b = bin_value(x, *s);
      REQUIRE(b < s->n_bins());
      CHECK(s->bin_lo(b) <= x);
      CHECK(x < s->bin_hi(b));
    }
  }
}

TEST_CASE("seasons and summer months") {
  CHECK(season_of(CivilDate{2016, 7, 10}, 48.0) == Season::Summer);
  CHECK(season_of(CivilDate{2016, 1, 10}, -33.0) == Season::Summer);
  CHECK(season_of(CivilDate{2016, 10, 5}, 10.0) == Season::Fall);
  CHECK(season_of(CivilDate{2016, 10, 5}, -10.0) == Season::Spring);
  CHECK(season_of(CivilDate{2016, 12, 1}, 50.0) == Season::Winter);
  CHECK(summer_month_label(CivilDate{2016, 6, 5}, 40.0) == SummerMonth::First);
  CHECK(summer_month_label(CivilDate{2016, 8, 5}, 40.0) == SummerMonth::Last);
  CHECK(summer_month_label(CivilDate{2016, 2, 5}, -30.0) == SummerMonth::Last);
  CHECK(summer_month_label(CivilDate{2016, 12, 5}, -30.0) == SummerMonth::First);
  CHECK(summer_month_label(CivilDate{2016, 3, 5}, 40.0) == SummerMonth::Excluded);
  CHECK_THROWS_AS(season_of(CivilDate{2016, 1, 1}, 95.0), ValidationError);
}

TEST_CASE("design columns per specification family") {
  Rng rng(11);
  Fixture f = make_fixture(6, 8, rng, [](double t, const UserInfo&, const CivilDate&) {
    return -0.3 * t;
  });
  SECTION("primary linear spec: tmin, tmin normal, controls, control normals") {
    ModelSpec spec;
    spec.treatment = Treatment::TminLinear;
    spec.controls = ControlsForm::Linear;
    const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
    const std::vector<std::string> expected = {
        "tmin",  "tmin_normal", "prcp",        "trange",      "cloud",     "rh",
        "wind",  "prcp_normal", "trange_normal", "cloud_normal", "rh_normal", "wind_normal"};
    CHECK(d.panel.x_names == expected);
    CHECK(d.panel.fe.size() == 3);
    CHECK(d.report.n_rows == f.records.size());
  }
  SECTION("anomaly spec drops the tmin normal, keeps control normals") {
    ModelSpec spec;
    spec.treatment = Treatment::AnomalyLinear;
    const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
    CHECK(d.panel.x_names.front() == "tmin_anomaly");
    for (const std::string& n : d.panel.x_names) CHECK(n != "tmin_normal");
    CHECK(std::count(d.panel.x_names.begin(), d.panel.x_names.end(), "prcp_normal") == 1);
  }
  SECTION("season interaction: four slope columns, no main term") {
    ModelSpec spec;
    spec.interaction = InteractionKind::Season;
    const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
    REQUIRE(d.interaction_columns ==
            std::vector<std::string>{"tmin:winter", "tmin:spring", "tmin:summer", "tmin:fall"});
    CHECK(std::count(d.panel.x_names.begin(), d.panel.x_names.end(), "tmin") == 0);
  }
  SECTION("heat-index spec drops tmin, rh and their normals") {
    ModelSpec spec;
    spec.treatment = Treatment::HeatIndexBinned;
    const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
    for (const std::string& n : d.panel.x_names) {
      CHECK(n != "rh");
      CHECK(n != "rh_normal");
      CHECK(n != "tmin_normal");
      CHECK(n.rfind("tmin", 0) != 0);
    }
    REQUIRE(d.treatment_scheme.has_value());
  }
  SECTION("binned treatment histogram counts every row once") {
    ModelSpec spec;
    spec.treatment = Treatment::TminBinned;
    const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
    std::size_t total = 0;
    for (const std::size_t c : d.treatment_histogram) total += c;
    CHECK(total == d.report.n_rows);
  }
  SECTION("rebuilding the design is identical") {
    ModelSpec spec;
    spec.treatment = Treatment::TminBinned;
    spec.controls = ControlsForm::Binned;
    const DesignResult a = build_design(spec, f.records, f.exposures, f.users);
    const DesignResult b = build_design(spec, f.records, f.exposures, f.users);
    REQUIRE(a.panel.x_names == b.panel.x_names);
    REQUIRE(a.panel.y == b.panel.y);
    for (std::size_t j = 0; j < a.panel.x.size(); ++j) CHECK(a.panel.x[j] == b.panel.x[j]);
  }
  SECTION("incomplete exposures are dropped and counted") {
    Fixture g = f;
    g.exposures[3].tmin.reset();
    g.exposures[10].rh.reset();
    ModelSpec spec;
    const DesignResult d = build_design(spec, g.records, g.exposures, g.users);
    CHECK(d.report.n_missing_dropped == 2);
    CHECK(d.report.n_rows == g.records.size() - 2);
  }
  SECTION("summer-month interaction keeps only first/last summer months") {
    ModelSpec spec;
    spec.interaction = InteractionKind::SummerMonth;
    // July nights at lat 45: all excluded.
    const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
    CHECK(d.report.n_interaction_excluded == f.records.size());
    CHECK(d.report.n_rows == 0);
  }
}

TEST_CASE("short-sleep outcome is a linear probability column") {
  Rng rng(13);
  Fixture f = make_fixture(4, 6, rng, [](double, const UserInfo&, const CivilDate&) {
    return 0.0;
  });
  ModelSpec spec;
  spec.outcome = Outcome::Short7;
  const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
  for (const double v : d.panel.y) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("piecewise-constant DGP recovers bin steps within 3 SE") {
  Rng rng(17);
  // Steps relative to the [5,10) reference: -2 below 0, 0 on [0,10), -4 above 10.
  auto step = [](double t) { return t < 0.0 ? -2.0 : (t < 10.0 ? 0.0 : -4.0); };
  Fixture f = make_fixture(80, 60, rng, [&](double t, const UserInfo&, const CivilDate&) {
    return step(t);
  });
  ModelSpec spec;
  spec.treatment = Treatment::TminBinned;
  spec.controls = ControlsForm::None;
  spec.include_tmin_normal = false;
  spec.fe_dims = {"user", "date"};
  const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
  const FitResult r = fit(d.panel);
  const ResponseCurve curve = response_curve(r, *d.treatment_scheme, d.treatment_histogram,
                                             "minutes");
  for (const CurvePoint& p : curve.points) {
    if (!p.coef || p.reference || p.n_obs == 0) continue;
    const double mid = (p.lo + p.hi) / 2.0;
    const double truth = step(std::isfinite(mid) ? mid : (std::isfinite(p.lo) ? p.lo + 2.5 : p.hi - 2.5));
    CHECK(std::abs(*p.coef - truth) < 3.0 * p.se + 1e-9);
  }
}

TEST_CASE("marginal effects recover per-category slopes and test differences") {
  Rng rng(19);
  Fixture f = make_fixture(120, 50, rng, [](double t, const UserInfo& u, const CivilDate&) {
    return (u.categories.at("age_group") == "mid" ? -0.25 : -0.50) * t;
  });
  ModelSpec spec;
  spec.interaction = InteractionKind::Category;
  spec.interaction_column = "age_group";
  spec.controls = ControlsForm::None;
  spec.include_tmin_normal = false;
  spec.fe_dims = {"user", "date"};
  const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
  const FitResult r = fit(d.panel);
  const MarginsResult m =
      marginal_effects(r, d.interaction_columns, d.interaction_labels, d.interaction_counts);
  REQUIRE(m.effects.size() == 2);
  REQUIRE(m.effects[0].category == "mid");
  CHECK(std::abs(m.effects[0].slope - (-0.25)) < 3.0 * m.effects[0].se);
  CHECK(std::abs(m.effects[1].slope - (-0.50)) < 3.0 * m.effects[1].se);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].p < 0.05);  // groups genuinely differ

  SECTION("category missing from the fit is an error") {
    CHECK_THROWS_AS(marginal_effects(r, {"tmin:ghost"}, {"ghost"}), ValidationError);
  }
}

TEST_CASE("marginal-effect arithmetic on a fixed coefficient table") {
  // Documentation fixture: old vs mid per-degree effects with a clear gap.
  FitResult fit;
  fit.names = {"tmin:old", "tmin:mid"};
  fit.beta.resize(2);
  fit.beta << -0.61, -0.28;
  fit.vcov = Eigen::MatrixXd::Zero(2, 2);
  fit.vcov(0, 0) = 0.05 * 0.05;
  fit.vcov(1, 1) = 0.03 * 0.03;
  const MarginsResult m = marginal_effects(fit, {"tmin:old", "tmin:mid"}, {"old", "mid"});
  CHECK_THAT(m.pairs[0].diff, Catch::Matchers::WithinAbs(-0.33, 1e-12));
  CHECK_THAT(m.pairs[0].se, Catch::Matchers::WithinAbs(std::sqrt(0.0025 + 0.0009), 1e-12));
  CHECK(m.pairs[0].p < 0.01);
}

TEST_CASE("identical groups: difference statistic near zero") {
  Rng rng(23);
  Fixture f = make_fixture(100, 40, rng, [](double t, const UserInfo&, const CivilDate&) {
    return -0.30 * t;  // same slope for both categories
  });
  ModelSpec spec;
  spec.interaction = InteractionKind::Category;
  spec.interaction_column = "age_group";
  spec.controls = ControlsForm::None;
  spec.include_tmin_normal = false;
  spec.fe_dims = {"user", "date"};
  const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
  const FitResult r = fit(d.panel);
  const MarginsResult m = marginal_effects(r, d.interaction_columns, d.interaction_labels);
  CHECK(std::abs(m.pairs[0].z) < 3.5);
}

TEST_CASE("joint Wald test accepts the truth and rejects a shifted truth") {
  Rng rng(29);
  Fixture f = make_fixture(100, 40, rng, [](double t, const UserInfo&, const CivilDate&) {
    return -0.30 * t;
  });
  ModelSpec spec;
  spec.controls = ControlsForm::None;
  spec.include_tmin_normal = false;
  spec.fe_dims = {"user", "date"};
  const DesignResult d = build_design(spec, f.records, f.exposures, f.users);
  const FitResult r = fit(d.panel);
  const WaldResult ok = joint_wald(r, {"tmin"}, {-0.30});
  CHECK(ok.p > 0.01);
  const WaldResult bad = joint_wald(r, {"tmin"}, {-0.10});
  CHECK(bad.p < 1e-6);
}

TEST_CASE("scale extrapolation from a probability curve") {
  ResponseCurve curve;
  curve.outcome_units = "probability";
  curve.scheme = default_schemes().tmin;
  for (std::size_t b = 0; b < curve.scheme.n_bins(); ++b) {
    CurvePoint p;
    p.lo = curve.scheme.bin_lo(b);
    p.hi = curve.scheme.bin_hi(b);
    p.coef = 0.0;
    curve.points.push_back(p);
  }
  const std::size_t bin_15_20 = bin_value(17.5, curve.scheme);
  const std::size_t bin_20_25 = bin_value(22.5, curve.scheme);
  const std::size_t bin_hot = bin_value(27.0, curve.scheme);
  curve.points[bin_15_20].coef = 0.004;
  curve.points[bin_20_25].coef = 0.015;  // difference 0.011
  curve.points[bin_hot].coef = 0.035;    // vs reference: 3.5 percentage points

  CHECK_THAT(scale_extrapolation(curve, bin_15_20, bin_20_25, 100000.0),
             Catch::Matchers::WithinAbs(1100.0, 1e-9));
  CHECK(scale_extrapolation(curve, bin_15_20, bin_15_20, 100000.0) == 0.0);
  CHECK_THAT(scale_extrapolation(curve, curve.scheme.reference_bin, bin_hot, 100000.0),
             Catch::Matchers::WithinAbs(3500.0, 1e-9));
  CHECK_THROWS_AS(scale_extrapolation(curve, 0, 99, 1.0), ValidationError);
}

TEST_CASE("curve csv round trip") {
  ResponseCurve curve;
  curve.outcome_units = "minutes";
  curve.scheme = default_schemes().tmin;
  for (std::size_t b = 0; b < curve.scheme.n_bins(); ++b) {
    CurvePoint p;
    p.lo = curve.scheme.bin_lo(b);
    p.hi = curve.scheme.bin_hi(b);
    p.reference = b == curve.scheme.reference_bin;
    p.coef = p.reference ? 0.0 : -0.5 * static_cast<double>(b);
    p.se = p.reference ? 0.0 : 0.2;
    p.ci_lo = *p.coef - 1.96 * p.se;
    p.ci_hi = *p.coef + 1.96 * p.se;
    p.n_obs = 10 * b + 1;
    curve.points.push_back(p);
  }
  const std::string dir = (std::filesystem::temp_directory_path() / "tsl_curve_csv").string();
  std::filesystem::create_directories(dir);
  write_curve_csv(dir + "/curve.csv", curve);
  const ResponseCurve back = read_curve_csv(dir + "/curve.csv");
  REQUIRE(back.points.size() == curve.points.size());
  for (std::size_t i = 0; i < back.points.size(); ++i) {
    CHECK(back.points[i].lo == curve.points[i].lo);
    CHECK(back.points[i].coef == curve.points[i].coef);
    CHECK(back.points[i].n_obs == curve.points[i].n_obs);
  }
}
