#include <catch2/catch_amalgamated.hpp>

#include "test_helpers.hpp"
#include "thermosleep/sleep_ingest.hpp"

using namespace thermosleep;
using namespace tsl_test;

namespace {
const CivilDate kNight{2016, 7, 1};
const CivilDate kNext{2016, 7, 2};
}  // namespace

TEST_CASE("single uninterrupted bout 23:00-07:00") {
  EpochStream s{"u1", {}};
  add_epochs(s, at(kNight, 22, 0), 60, false);
  add_epochs(s, at(kNight, 23, 0), 480, true);  // through 06:59 next day
  add_epochs(s, at(kNext, 7, 0), 60, false);
  const AggregationResult agg = aggregate_epochs(s);
  REQUIRE(agg.records.size() == 1);
  const SleepRecord& r = agg.records[0];
  CHECK(r.night_date == kNight);
  CHECK(r.onset_min == 660);    // 23:00
  CHECK(r.offset_min == 1140);  // 07:00
  CHECK(r.duration_min == 480);
  CHECK(r.midsleep_min == 900.0);  // 03:00
  CHECK(agg.naps.empty());
}

TEST_CASE("wake gap within bridge_gap_min is merged, sleep minutes exclude it") {
  EpochStream s{"u1", {}};
  add_epochs(s, at(kNight, 23, 0), 180, true);  // 23:00-02:00
  add_epochs(s, at(kNext, 2, 0), 30, false);    // 02:00-02:30 awake
  add_epochs(s, at(kNext, 2, 30), 270, true);   // 02:30-07:00
  const AggregationResult agg = aggregate_epochs(s, {19 * 60, 8 * 60}, 60);
  REQUIRE(agg.records.size() == 1);
  const SleepRecord& r = agg.records[0];
  CHECK(r.onset_min == 660);
  CHECK(r.offset_min == 1140);
  CHECK(r.duration_min == 450);
  CHECK(r.duration_min < r.offset_min - r.onset_min);  // gap bridged, not slept
}

TEST_CASE("gap wider than bridge_gap_min splits the night") {
  EpochStream s{"u1", {}};
  add_epochs(s, at(kNight, 23, 0), 120, true);
  add_epochs(s, at(kNext, 2, 30), 270, true);  // 90 min gap
  const AggregationResult agg = aggregate_epochs(s, {19 * 60, 8 * 60}, 60);
  REQUIRE(agg.records.size() == 1);
  CHECK(agg.records[0].duration_min == 270);  // longer period wins
  REQUIRE(agg.naps.size() == 1);
  CHECK(agg.naps[0].minutes == 120);
}

TEST_CASE("afternoon nap alone produces no nightly record") {
  EpochStream s{"u1", {}};
  add_epochs(s, at(kNight, 13, 0), 90, true);  // 13:00-14:30
  const AggregationResult agg = aggregate_epochs(s);
  CHECK(agg.records.empty());
  REQUIRE(agg.naps.size() == 1);
  CHECK(agg.naps[0].minutes == 90);
  CHECK(agg.naps[0].night_date == kNight);
}

TEST_CASE("post-midnight onset attaches to the previous evening's night") {
  EpochStream s{"u1", {}};
  add_epochs(s, at(kNext, 1, 0), 360, true);  // 01:00-07:00
  const AggregationResult agg = aggregate_epochs(s);
  REQUIRE(agg.records.size() == 1);
  CHECK(agg.records[0].night_date == kNight);
  CHECK(agg.records[0].onset_min == 780);  // 01:00 = 13 h after noon
}

TEST_CASE("non-monotone timestamps are rejected with the epoch index") {
  EpochStream s{"u1", {}};
  add_epochs(s, at(kNight, 23, 0), 10, true);
  s.epochs.push_back(Epoch{LocalTimestamp{at(kNight, 23, 5), 0}, true});
  REQUIRE_THROWS_MATCHES(aggregate_epochs(s), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("epoch index 10")));
}

TEST_CASE("empty stream is rejected") {
  EpochStream s{"u1", {}};
  REQUIRE_THROWS_AS(aggregate_epochs(s), ValidationError);
}

TEST_CASE("aggregation is translation-equivariant by +24h") {
  EpochStream s{"u1", {}};
  add_epochs(s, at(kNight, 22, 40), 20, false);
  add_epochs(s, at(kNight, 23, 0), 200, true);
  add_epochs(s, at(kNext, 2, 20), 20, false);
  add_epochs(s, at(kNext, 2, 40), 250, true);
  EpochStream shifted{"u1", {}};
  for (const Epoch& e : s.epochs)
    shifted.epochs.push_back(Epoch{LocalTimestamp{e.ts.civil_min + 1440, e.ts.utc_offset_min}, e.asleep});
  const auto a = aggregate_epochs(s);
  const auto b = aggregate_epochs(shifted);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(day_difference(b.records[i].night_date, a.records[i].night_date) == 1);
    CHECK(a.records[i].onset_min == b.records[i].onset_min);
    CHECK(a.records[i].duration_min == b.records[i].duration_min);
    CHECK(a.records[i].offset_min == b.records[i].offset_min);
  }
}

TEST_CASE("midsleep bisects onset and offset exactly") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int onset = 430 + static_cast<int>(rng.uniform_index(700));
    const int duration = 200 + static_cast<int>(rng.uniform_index(500));
    const SleepRecord r = make_record("u", kNight, onset, duration);
    CHECK(r.midsleep_min - r.onset_min == r.offset_min - r.midsleep_min);
  }
}

TEST_CASE("short sleep flags use strict thresholds and are monotone") {
  const ShortSleepFlags f414 = short_sleep_flags(414);
  CHECK(f414.lt7);
  CHECK_FALSE(f414.lt6);
  CHECK_FALSE(f414.lt5);
  const ShortSleepFlags f420 = short_sleep_flags(420);  // exactly 7 h
  CHECK_FALSE(f420.lt7);
  const ShortSleepFlags f240 = short_sleep_flags(240);
  CHECK(f240.lt7);
  CHECK(f240.lt6);
  CHECK(f240.lt5);
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const ShortSleepFlags f = short_sleep_flags(1 + static_cast<int>(rng.uniform_index(800)));
    if (f.lt5) CHECK(f.lt6);
    if (f.lt6) CHECK(f.lt7);
  }
  CHECK_THROWS_AS(short_sleep_flags(0), ValidationError);
}

TEST_CASE("24h totals add qualifying naps only") {
  std::vector<SleepRecord> recs = {make_record("u", kNight, 660, 420)};
  SECTION("qualifying nap is added") {
    daily_total_24h(recs, {NapRecord{"u", kNight, 60}});
    CHECK(recs[0].total_24h_min == 480);
  }
  SECTION("a four-hour-plus nap is not") {
    daily_total_24h(recs, {NapRecord{"u", kNight, 250}});
    CHECK(recs[0].total_24h_min == 420);
  }
  SECTION("exactly four hours is not shorter than four hours") {
    daily_total_24h(recs, {NapRecord{"u", kNight, 240}});
    CHECK(recs[0].total_24h_min == 420);
  }
  SECTION("no naps: identity") {
    daily_total_24h(recs, {});
    CHECK(recs[0].total_24h_min == 420);
  }
  SECTION("nap on a different night is ignored") {
    daily_total_24h(recs, {NapRecord{"u", kNext, 60}});
    CHECK(recs[0].total_24h_min == 420);
  }
}

TEST_CASE("record filters: strict duration and timing windows") {
  InclusionConfig cfg;
  cfg.min_nights = 1;
  cfg.min_coverage = 0.01;
  SECTION("3.5 h duration excluded") {
    const auto out = apply_filters({make_record("u", kNight, 660, 210)}, cfg);
    CHECK(out.kept.empty());
    CHECK(out.report.n_excluded_duration == 1);
  }
  SECTION("exactly 4 h excluded, just above kept") {
    CHECK(apply_filters({make_record("u", kNight, 660, 240)}, cfg).kept.empty());
    CHECK(apply_filters({make_record("u", kNight, 660, 241)}, cfg).kept.size() == 1);
  }
  SECTION("exactly 12 h excluded") {
    CHECK(apply_filters({make_record("u", kNight, 500, 720)}, cfg).kept.empty());
  }
  SECTION("onset 08:30 excluded") {
    // 08:30 next morning = 1230 minutes from noon
    const auto out = apply_filters({make_record("u", kNight, 1230, 300)}, cfg);
    CHECK(out.kept.empty());
    CHECK(out.report.n_excluded_onset == 1);
  }
  SECTION("onset exactly 19:00 or 08:00 excluded (open interval)") {
    CHECK(apply_filters({make_record("u", kNight, 420, 400)}, cfg).kept.empty());
    CHECK(apply_filters({make_record("u", kNight, 1200, 300)}, cfg).kept.empty());
  }
  SECTION("offset 15:00 next day excluded, 14:59 kept") {
    CHECK(apply_filters({make_record("u", kNight, 910, 710)}, cfg).kept.empty());   // offset 1620
    CHECK(apply_filters({make_record("u", kNight, 909, 710)}, cfg).kept.size() == 1);
  }
}

TEST_CASE("user-level thresholds: nights and coverage") {
  InclusionConfig cfg;  // 28 nights, 25% coverage
  std::vector<SleepRecord> recs;
  SECTION("30 kept records over a 100-day span keeps the user") {
    // span day 0..99 inclusive = 100 days; 30/100 = 0.30 >= 0.25, 30 >= 28
    for (int i = 0; i < 30; ++i)
      recs.push_back(make_record("u", add_days(kNight, i < 29 ? i : 99), 660, 420));
    const auto out = apply_filters(recs, cfg);
    CHECK(out.users.at("u").included);
    CHECK(out.users.at("u").span_days == 100);
    CHECK(out.kept.size() == 30);
  }
  SECTION("27 records fail the night minimum") {
    for (int i = 0; i < 27; ++i) recs.push_back(make_record("u", add_days(kNight, i), 660, 420));
    const auto out = apply_filters(recs, cfg);
    CHECK_FALSE(out.users.at("u").included);
    CHECK(out.kept.empty());
  }
  SECTION("30 records over 150 days fail coverage") {
    for (int i = 0; i < 30; ++i)
      recs.push_back(make_record("u", add_days(kNight, i < 29 ? i : 149), 660, 420));
    const auto out = apply_filters(recs, cfg);
    CHECK(out.users.at("u").coverage == 0.20);
    CHECK_FALSE(out.users.at("u").included);
  }
}

TEST_CASE("filtering is idempotent") {
  Rng rng(11);
  std::vector<SleepRecord> recs;
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 40; ++i) {
      const int onset = 300 + static_cast<int>(rng.uniform_index(1000));
      const int duration = 100 + static_cast<int>(rng.uniform_index(700));
      recs.push_back(make_record("u" + std::to_string(u), add_days(kNight, i), onset, duration));
    }
  }
  InclusionConfig cfg;
  cfg.min_nights = 10;
  const auto once = apply_filters(recs, cfg);
  const auto twice = apply_filters(once.kept, cfg);
  REQUIRE(once.kept.size() == twice.kept.size());
  for (std::size_t i = 0; i < once.kept.size(); ++i) {
    CHECK(once.kept[i].user_id == twice.kept[i].user_id);
    CHECK(once.kept[i].night_date == twice.kept[i].night_date);
  }
}

TEST_CASE("epoch and record CSV round trip") {
  EpochStream s{"u1", {}};
  add_epochs(s, at(kNight, 23, 0), 480, true, 120);  // +02:00 zone
  const std::string dir = (std::filesystem::temp_directory_path() / "tsl_ingest_csv").string();
  std::filesystem::create_directories(dir);
  write_epochs_csv(dir + "/epochs.csv", {s});
  const auto streams = read_epochs_csv(dir + "/epochs.csv");
  REQUIRE(streams.size() == 1);
  REQUIRE(streams[0].epochs.size() == 480);
  CHECK(streams[0].epochs[0].ts.civil_min == at(kNight, 23, 0));
  CHECK(streams[0].epochs[0].ts.utc_offset_min == 120);

  auto agg = aggregate_epochs(streams[0]);
  daily_total_24h(agg.records, agg.naps);
  write_sleep_records_csv(dir + "/records.csv", agg.records);
  const auto records = read_sleep_records_csv(dir + "/records.csv");
  REQUIRE(records.size() == 1);
  CHECK(records[0].onset_min == 660);
  CHECK(records[0].duration_min == 480);
  CHECK(records[0].total_24h_min == 480);
}
