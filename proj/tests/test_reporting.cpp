#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "pcfgsr/reporting.hpp"

using namespace pcfgsr;
namespace fs = std::filesystem;

namespace {

RunRow row(const std::string& bench, const std::string& method, std::uint64_t seed, double mse, bool rec = false,
           std::size_t c = 3) {
  RunRow r;
  r.benchmark = bench;
  r.method = method;
  r.seed = seed;
  r.test_mse = mse;
  r.recovered = rec;
  r.complexity = c;
  r.r2 = 1.0 - mse;
  return r;
}

// Every way to give `na` of the ranks 1..na+nb to sample a.
template <class F>
void for_each_split(std::size_t na, std::size_t nb, F f) {
  const std::size_t n = na + nb;
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<long>(na), true);
  do {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i) (pick[i] ? a : b).push_back(static_cast<double>(i));
    f(a, b);
  } while (std::prev_permutation(pick.begin(), pick.end()));
}

}  // namespace

TEST_CASE("Mann-Whitney U equals the pairwise count for every split up to size 8") {
  std::size_t cases = 0;
  for (std::size_t na = 1; na <= 8; ++na)
    for (std::size_t nb = 1; nb <= 8; ++nb)
      for_each_split(na, nb, [&](const std::vector<double>& a, const std::vector<double>& b) {
        const auto mw = mann_whitney_u(a, b);
        REQUIRE(mw.u_a == oracle::pairwise_u(a, b));
        REQUIRE(mw.u_b == oracle::pairwise_u(b, a));
        ++cases;
      });
  // sum of C(na + nb, na) over 1 <= na, nb <= 8
  std::size_t expected = 0;
  for (std::size_t na = 1; na <= 8; ++na)
    for (std::size_t nb = 1; nb <= 8; ++nb) {
      double c = 1.0;
      for (std::size_t i = 1; i <= na; ++i) c = c * static_cast<double>(nb + i) / static_cast<double>(i);
      expected += static_cast<std::size_t>(std::llround(c));
    }
  CHECK(cases == expected);
}

TEST_CASE("Mann-Whitney U with ties equals the pairwise count") {
  Rng rng(12);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t na = 1 + rng() % 8, nb = 1 + rng() % 8;
    std::vector<double> a(na), b(nb);
    for (auto& v : a) v = static_cast<double>(rng() % 4);
    for (auto& v : b) v = static_cast<double>(rng() % 4);
    const auto mw = mann_whitney_u(a, b);
    REQUIRE(mw.u_a == oracle::pairwise_u(a, b));
    REQUIRE(mw.u_a + mw.u_b == static_cast<double>(na * nb));
    REQUIRE(mw.p >= 0.0);
    REQUIRE(mw.p <= 1.0);
  }
}

TEST_CASE("Mann-Whitney normal approximation") {
  // n = 3 + 3, U = 0: z = (4.5 - 0.5) / sqrt(9 * 7 / 12)
  const auto mw = mann_whitney_u(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6});
  const double z = 4.0 / std::sqrt(63.0 / 12.0);
  CHECK(mw.z == doctest::Approx(z).epsilon(1e-12));
  CHECK(mw.p == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));

  const auto same = mann_whitney_u(std::vector<double>{2, 2}, std::vector<double>{2, 2, 2});
  CHECK(same.p == 1.0);
  CHECK_THROWS_AS(mann_whitney_u(std::vector<double>{}, std::vector<double>{1}), std::invalid_argument);

  // well separated samples of 10 are significant
  std::vector<double> lo(10), hi(10);
  std::iota(lo.begin(), lo.end(), 0.0);
  std::iota(hi.begin(), hi.end(), 100.0);
  CHECK(mann_whitney_u(lo, hi).p < 0.001);
}

TEST_CASE("run table rejects duplicate triples") {
  RunTable t;
  t.add(row("N1", "a", 1, 0.1));
  t.add(row("N1", "a", 2, 0.1));
  t.add(row("N1", "b", 1, 0.1));
  CHECK_THROWS_AS(t.add(row("N1", "a", 1, 0.3)), std::invalid_argument);
}

TEST_CASE("aggregate: mean, population std, recovery and exclusion") {
  RunTable t;
  t.add(row("N1", "m", 1, 1.0, true));
  t.add(row("N1", "m", 2, 3.0, false));
  t.add(row("N1", "m", 3, 1e11, false));  // above the exclusion threshold
  t.add(row("N1", "m", 4, std::numeric_limits<double>::infinity()));
  auto failed = row("N1", "m", 5, 0.0, true);
  failed.failed = true;
  t.add(failed);

  const auto s = aggregate(t);
  REQUIRE(s.size() == 1);
  CHECK(s[0].runs == 5);
  CHECK(s[0].valid == 2);
  CHECK(s[0].excluded == 3);
  CHECK(s[0].mean_mse == 2.0);
  CHECK(s[0].std_mse == 1.0);
  CHECK(s[0].recovery_percent == 20.0);
  CHECK(s[0].mean_complexity == 3.0);

  const auto sample = aggregate(t, StdKind::Sample);
  CHECK(sample[0].std_mse == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("aggregate is invariant to row order") {
  Rng rng(4);
  std::vector<RunRow> rows;
  for (std::uint64_t s = 0; s < 30; ++s) rows.push_back(row("K1", "m", s, uniform01(rng) * 1e-3 + 1e3 * (s == 7)));
  RunTable a, b;
  for (const auto& r : rows) a.add(r);
  std::shuffle(rows.begin(), rows.end(), rng);
  for (const auto& r : rows) b.add(r);
  CHECK(aggregate(a)[0].mean_mse == aggregate(b)[0].mean_mse);
  CHECK(aggregate(a)[0].std_mse == aggregate(b)[0].std_mse);
}

TEST_CASE("significance labels") {
  RunTable t;
  for (std::uint64_t s = 0; s < 10; ++s) {
    // A clearly best, B equivalent to A on N1 only, C clearly worst
    t.add(row("N1", "A", s, 0.01 * static_cast<double>(s)));
    t.add(row("N1", "B", s, 0.01 * static_cast<double>(s) + 0.001));
    t.add(row("N1", "C", s, 10.0 + static_cast<double>(s)));
    t.add(row("N2", "A", s, 0.01 * static_cast<double>(s)));
    t.add(row("N2", "B", s, 5.0 + static_cast<double>(s)));
    t.add(row("N2", "C", s, 10.0 + static_cast<double>(s)));
    auto k5 = row("K5", "C", s, 0.0);
    k5.excluded_from_stats = true;
    t.add(k5);
    auto k5b = row("K5", "A", s, 1.0);
    k5b.excluded_from_stats = true;
    t.add(k5b);
    t.add(row("N3", "A", s, 1.0));  // single method: skipped
  }
  const auto sig = significance_summary(t, 0.05);
  auto label = [&](const std::string& b, const std::string& m) {
    for (const auto& l : sig.labels)
      if (l.benchmark == b && l.method == m) return l.label;
    return '?';
  };
  CHECK(label("N1", "A") == '~');
  CHECK(label("N1", "B") == '~');
  CHECK(label("N1", "C") == '-');
  CHECK(label("N2", "A") == '+');
  CHECK(label("N2", "B") == '-');
  CHECK(label("K5", "A") == '?');
  CHECK(label("N3", "A") == '?');
  REQUIRE(sig.counts.size() == 3);
  CHECK(sig.counts[0].method == "A");
  CHECK(sig.counts[0].label() == "+1 /~1 /-0");
  CHECK(sig.counts[2].label() == "+0 /~0 /-2");
}

TEST_CASE("report rendering") {
  RunTable t;
  for (std::uint64_t s = 0; s < 4; ++s) {
    t.add(row("N1", "pcfgsr", s, 0.0, true, 5));
    t.add(row("N1", "pcfgsr:no_entropy", s, 0.5 + static_cast<double>(s), false, 7));
  }
  const auto r = build_report(t);
  const auto md = render_report(r, ReportFormat::Markdown);
  CHECK(md.find("| N1") != std::string::npos);
  CHECK(md.find("pcfgsr:no_entropy") != std::string::npos);
  CHECK(md.find("+/~/-") != std::string::npos);
  const auto csv = render_report(r, ReportFormat::Csv);
  CHECK(csv.find("benchmark,method") == 0);
  const auto back = report_from_json(nlohmann::json::parse(render_report(r, ReportFormat::Json)));
  REQUIRE(back.summaries.size() == r.summaries.size());
  CHECK(back.summaries[1].mean_mse == r.summaries[1].mean_mse);
  CHECK(back.significance.counts.size() == r.significance.counts.size());
  CHECK(parse_report_format("markdown") == ReportFormat::Markdown);
  CHECK_THROWS_AS(parse_report_format("xml"), std::invalid_argument);
}

TEST_CASE("loading runs from a result tree") {
  const auto root = fs::temp_directory_path() / "pcfgsr_report_test";
  fs::remove_all(root);
  fs::create_directories(root / "N1/pcfgsr/seed-1");
  fs::create_directories(root / "N1/pcfgsr/seed-2");
  {
    std::ofstream(root / "N1/pcfgsr/seed-1/result.json")
        << R"({"benchmark":"N1","method":"pcfgsr","seed":1,"best_test_mse":0.25,"recovered":false,"complexity":4,"test_r2":0.5})";
    std::ofstream(root / "N1/pcfgsr/seed-1/timing.json") << R"({"wall_seconds":2.5})";
    std::ofstream(root / "N1/pcfgsr/seed-2/failed.json")
        << R"({"benchmark":"N1","method":"pcfgsr","seed":2,"error":"boom"})";
  }
  const auto t = load_run_table(root.string());
  REQUIRE(t.rows().size() == 2);
  CHECK(t.rows()[0].test_mse == 0.25);
  CHECK(t.rows()[0].wall_seconds == 2.5);
  CHECK(t.rows()[1].failed);
  CHECK(t.rows()[1].error == "boom");
  fs::remove_all(root);
  CHECK_THROWS(load_run_table(root.string()));
}
