#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "mvreprobit/data.hpp"
#include "mvreprobit/model.hpp"

using namespace mvreprobit;

namespace {

DatasetMeta meta(std::size_t r = 2, std::size_t p = 1) {
  DatasetMeta m;
  for (std::size_t k = 0; k < r; ++k) m.outcome_labels.push_back("y" + std::to_string(k + 1));
  for (std::size_t k = 0; k < p; ++k) m.covariate_labels.push_back("x" + std::to_string(k + 1));
  return m;
}

RawRow row(const std::string& id, int wave, const std::string& partner = "", std::vector<std::optional<double>> y = {1, 0},
           std::vector<std::optional<double>> x = {1.0}) {
  return RawRow{id, wave, partner, std::move(y), std::move(x), 0};
}

// Breadth-first search over partner links; phantom partners are nodes too.
std::vector<std::set<std::string>> bfs_clusters(const PanelDataset& data) {
  std::map<std::string, std::set<std::string>> adj;
  for (const auto& id : data.individuals()) adj[id];
  for (const auto& r : data.rows()) {
    if (!r.partner_id) continue;
    adj[r.individual_id].insert(*r.partner_id);
    adj[*r.partner_id].insert(r.individual_id);
  }
  const std::set<std::string> observed(data.individuals().begin(), data.individuals().end());
  std::set<std::string> seen;
  std::vector<std::set<std::string>> out;
  for (const auto& id : data.individuals()) {
    if (seen.count(id)) continue;
    std::set<std::string> comp;
    std::queue<std::string> q;
    q.push(id);
    seen.insert(id);
    while (!q.empty()) {
      const auto cur = q.front();
      q.pop();
      if (observed.count(cur)) comp.insert(cur);
      for (const auto& nb : adj[cur]) {
        if (seen.insert(nb).second) q.push(nb);
      }
    }
    out.push_back(comp);
  }
  return out;
}

std::vector<std::set<std::string>> library_clusters(const PanelDataset& data, const CoupleClusterIndex& idx) {
  std::vector<std::set<std::string>> out;
  for (const auto& members : idx.members) {
    auto& s = out.emplace_back();
    for (auto i : members) s.insert(data.individuals()[i]);
  }
  return out;
}

}  // namespace

TEST(Dataset, ThreeRowsTwoIndividuals) {
  const auto d = validate_dataset({row("1", 1), row("2", 1), row("1", 2)}, meta());
  EXPECT_EQ(d.individual_count(), 2u);
  EXPECT_EQ(d.row_count(), 3u);
  EXPECT_EQ(d.waves_per_individual(), (std::vector<std::size_t>{2, 1}));
}

TEST(Dataset, AsymmetricLinkCitesBothRows) {
  try {
    validate_dataset({row("A", 1, "B"), row("B", 1, "C")}, meta());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("asymmetric"), std::string::npos) << msg;
  }
}

TEST(Dataset, PartnerAbsentThatWaveIsAllowed) {
  EXPECT_NO_THROW(validate_dataset({row("A", 1, "B"), row("B", 2)}, meta()));
}

TEST(Dataset, OutcomeOutsideBinaryDomain) {
  try {
    validate_dataset({row("1", 1), row("2", 1, "", {2, 0})}, meta());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(Dataset, DuplicateIndividualWave) {
  EXPECT_THROW(validate_dataset({row("1", 1), row("1", 1)}, meta()), ValidationError);
}

TEST(Dataset, WrongCountsRejected) {
  EXPECT_THROW(validate_dataset({row("1", 1, "", {1})}, meta()), ValidationError);
  EXPECT_THROW(validate_dataset({row("1", 1, "", {1, 0}, {1.0, 2.0})}, meta()), ValidationError);
}

TEST(Dataset, IncompleteRowsDroppedWithDiagnostic) {
  const auto d = validate_dataset({row("1", 1), row("1", 2, "", {std::nullopt, 1}), row("2", 1, "", {1, 1}, {std::nullopt})},
                                  meta());
  EXPECT_EQ(d.row_count(), 1u);
  ASSERT_EQ(d.dropped().size(), 2u);
  EXPECT_NE(d.dropped()[0].find("row 2"), std::string::npos);
  EXPECT_NE(d.dropped()[1].find("row 3"), std::string::npos);
}

TEST(Dataset, CanonicalOrderIsNumericAware) {
  const auto d = validate_dataset({row("10", 1), row("9", 2), row("9", 1)}, meta());
  EXPECT_EQ(d.individuals(), (std::vector<std::string>{"9", "10"}));
  EXPECT_EQ(d.rows()[0].wave, 1);
  EXPECT_EQ(d.rows()[1].wave, 2);
}

TEST(Clusters, RepartneringJoinsOneCluster) {
  const auto d = validate_dataset({row("A", 1, "B"), row("B", 1, "A"), row("A", 2, "B"), row("B", 2, "A"), row("A", 3),
                                   row("A", 4, "C"), row("C", 4, "A")},
                                  meta());
  const auto idx = build_couple_clusters(d);
  ASSERT_EQ(idx.cluster_count(), 1u);
  EXPECT_EQ(idx.members[0].size(), 3u);
  EXPECT_EQ(idx.waves[0], (std::vector<int>{1, 2, 3, 4}));
}

TEST(Clusters, NoLinksGivesSingletons) {
  const auto d = validate_dataset({row("1", 1), row("2", 1), row("3", 2)}, meta());
  const auto idx = build_couple_clusters(d);
  EXPECT_EQ(idx.cluster_count(), 3u);
  for (const auto& m : idx.members) EXPECT_EQ(m.size(), 1u);
}

TEST(Clusters, TransitiveClosureMatchesBfs) {
  const auto d = validate_dataset({row("A", 1, "B"), row("B", 1, "A"), row("B", 5, "C"), row("C", 5, "B")}, meta());
  const auto idx = build_couple_clusters(d);
  EXPECT_EQ(idx.cluster_count(), 1u);
  EXPECT_EQ(library_clusters(d, idx), bfs_clusters(d));
}

TEST(Clusters, PhantomPartnerStillConnects) {
  // Z is never observed but both A and C name Z at different waves.
  const auto d = validate_dataset({row("A", 1, "Z"), row("C", 2, "Z"), row("D", 1)}, meta());
  const auto idx = build_couple_clusters(d);
  EXPECT_EQ(idx.cluster_count(), 2u);
  EXPECT_EQ(idx.cluster_of_id(d, "A"), idx.cluster_of_id(d, "C"));
  EXPECT_EQ(library_clusters(d, idx), bfs_clusters(d));
}

TEST(Clusters, RandomGraphsMatchBfsAndIgnoreRowOrder) {
  std::mt19937_64 gen(17);
  for (int rep = 0; rep < 40; ++rep) {
    // Random partnerships between 30 people over 4 waves, symmetric by construction.
    std::vector<RawRow> raw;
    for (int t = 1; t <= 4; ++t) {
      std::vector<int> ids(30);
      std::iota(ids.begin(), ids.end(), 1);
      std::shuffle(ids.begin(), ids.end(), gen);
      for (std::size_t k = 0; k + 1 < ids.size(); k += 2) {
        const auto a = std::to_string(ids[k]);
        const auto b = std::to_string(ids[k + 1]);
        if (gen() % 5 == 0) {
          raw.push_back(row(a, t, b));
          raw.push_back(row(b, t, a));
        } else {
          raw.push_back(row(a, t));
          if (gen() % 2) raw.push_back(row(b, t));
        }
      }
    }
    const auto d = validate_dataset(raw, meta());
    const auto idx = build_couple_clusters(d);
    EXPECT_EQ(library_clusters(d, idx), bfs_clusters(d));

    std::size_t members = 0;
    for (const auto& m : idx.members) members += m.size();
    EXPECT_EQ(members, d.individual_count());

    std::shuffle(raw.begin(), raw.end(), gen);
    const auto d2 = validate_dataset(raw, meta());
    const auto idx2 = build_couple_clusters(d2);
    EXPECT_EQ(idx2.cluster_of, idx.cluster_of);
    EXPECT_EQ(idx2.members, idx.members);
    EXPECT_EQ(build_couple_clusters(d2).waves, idx2.waves);
  }
}

TEST(Design, RowCountsPerUnit) {
  const auto d = validate_dataset({row("A", 1, "B"), row("B", 1, "A"), row("A", 2), row("C", 1)}, meta());
  const auto idx = build_couple_clusters(d);
  const auto design = Design::build(d, idx);
  EXPECT_EQ(design.unit_row_counts(Level::individual_u), (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(design.unit_row_counts(Level::couple_v), (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(design.unit_row_counts(Level::couple_w), (std::vector<std::size_t>{2, 1, 1}));
  std::size_t rows = 0;
  for (auto c : design.unit_row_counts(Level::couple_v)) rows += c;
  EXPECT_EQ(rows, d.row_count());
  EXPECT_EQ(design.lower(0, 0), 0.0);
  EXPECT_EQ(design.upper(1, 0), 0.0);
}

TEST(Csv, RoundTrip) {
  const std::string text =
      "individual_id,wave,partner_id,y_give,y_get,x_age,x_female\n"
      "1,1,2,1,0,0.5,1\n"
      "2,1,1,0,0,-0.25,0\n"
      "1,2,,1,1,0.75,1\n";
  std::istringstream in(text);
  const auto d = read_dataset_csv(in);
  EXPECT_EQ(d.meta().outcome_labels, (std::vector<std::string>{"y_give", "y_get"}));
  EXPECT_EQ(d.meta().covariate_labels, (std::vector<std::string>{"x_age", "x_female"}));
  EXPECT_EQ(d.covariate_index("age"), 0u);
  EXPECT_EQ(d.covariate_index("x_female"), 1u);
  std::ostringstream out;
  write_dataset_csv(out, d);
  std::istringstream again(out.str());
  const auto d2 = read_dataset_csv(again);
  ASSERT_EQ(d2.row_count(), d.row_count());
  for (std::size_t i = 0; i < d.row_count(); ++i) {
    EXPECT_EQ(d2.rows()[i].covariates, d.rows()[i].covariates);
    EXPECT_EQ(d2.rows()[i].outcomes, d.rows()[i].outcomes);
    EXPECT_EQ(d2.rows()[i].partner_id, d.rows()[i].partner_id);
  }
}

TEST(Csv, MalformedInputs) {
  std::istringstream bad_header("id,wave\n");
  EXPECT_THROW(read_dataset_csv(bad_header), ValidationError);
  std::istringstream bad_number("individual_id,wave,partner_id,y1,x1\n1,1,,1,abc\n");
  EXPECT_THROW(read_dataset_csv(bad_number), ValidationError);
  std::istringstream short_row("individual_id,wave,partner_id,y1,x1\n1,1,,1\n");
  EXPECT_THROW(read_dataset_csv(short_row), ValidationError);
}
