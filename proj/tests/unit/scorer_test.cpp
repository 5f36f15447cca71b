#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include "logic_orm/fixtures.hpp"
#include "logic_orm/scorer.hpp"
#include "support/stub_server.hpp"
#include "test_support.hpp"

using namespace logic_orm;

namespace {

struct ScoreServer : testing_support::StubServer {
  explicit ScoreServer(Handler handler) : testing_support::StubServer("/score", std::move(handler)) {}
};

Problem problem() { return synth_corpus(1, 1, 2).problems[0]; }

}  // namespace

TEST(Featurize, NormalizedAndNamespaced) {
  const auto x = featurize("Premises: a b", "the cat");
  double norm = 0.0;
  for (const auto& [i, v] : x) {
    EXPECT_LT(i, kFeatureDim);
    norm += v * v;
  }
  EXPECT_NEAR(norm, 1.0, 1e-12);
  // Same token in input and candidate lands in different buckets.
  const auto a = featurize("zzz", "");
  const auto b = featurize("", "zzz");
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_NE(a[0].first, b[0].first);
  EXPECT_EQ(featurize("x y", "z"), featurize("X, y!", "Z"));
}

TEST(OracleScorerTest, ScoresByGold) {
  const Problem p = problem();
  EXPECT_EQ(score(OracleScorer{}, p, "text", p.gold), 1.0);
  EXPECT_EQ(score(OracleScorer{}, p, "text", fixtures::other_label(p.gold, 0.1)), 0.0);
  EXPECT_EQ(score(OracleScorer{}, p, "text", std::nullopt), 0.0);
  EXPECT_ERROR_KIND(score(OracleScorer{}, p, "", p.gold), ErrorKind::PreconditionViolated);
}

TEST(RandomScorerTest, DeterministicAndUniformish) {
  const Problem p = problem();
  EXPECT_EQ(score(RandomScorer{3}, p, "abc", std::nullopt), score(RandomScorer{3}, p, "abc", std::nullopt));
  EXPECT_NE(score(RandomScorer{3}, p, "abc", std::nullopt), score(RandomScorer{4}, p, "abc", std::nullopt));
  double sum = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const double s = random_score(7, "p", "candidate " + std::to_string(i));
    ASSERT_GE(s, 0.0);
    ASSERT_LT(s, 1.0);
    sum += s;
  }
  // sd of the mean is sqrt(1/12/4000) = 0.0046.
  EXPECT_NEAR(sum / n, 0.5, 0.02);
}

TEST(SurrogateScorerTest, LearnsPlantedMarker) {
  const auto train = fixtures::make_planted_examples(1000, 11);
  const auto model = train_surrogate(train, 5, 0.5, 1);
  const auto held_out = fixtures::make_planted_examples(400, 99);
  int right = 0;
  for (const auto& ex : held_out) {
    const double p = model.predict(ex.input_text, ex.response_text);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    right += (p > 0.5) == (ex.outcome == '+');
  }
  EXPECT_GE(right, 380);
}

TEST(SurrogateScorerTest, SameSeedSameWeights) {
  const auto train = fixtures::make_planted_examples(200, 3);
  const auto a = train_surrogate(train, 2, 0.5, 42);
  const auto b = train_surrogate(train, 2, 0.5, 42);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
}

TEST(SurrogateScorerTest, SingleClassOrEmptyData) {
  EXPECT_ERROR_KIND(train_surrogate({}, 1, 0.5, 0), ErrorKind::SingleClassData);
  auto only_pos = fixtures::make_planted_examples(10, 1);
  std::erase_if(only_pos, [](const TrainingExample& ex) { return ex.outcome == '-'; });
  EXPECT_ERROR_KIND(train_surrogate(only_pos, 1, 0.5, 0), ErrorKind::SingleClassData);
}

TEST(SurrogateScorerTest, SaveLoadRoundTrip) {
  testing_support::TempDir dir;
  const auto model = train_surrogate(fixtures::make_planted_examples(100, 5), 1, 0.5, 2);
  save_surrogate(model, dir / "m.json");
  const auto loaded = load_surrogate(dir / "m.json");
  EXPECT_EQ(loaded->weights, model.weights);
  EXPECT_EQ(loaded->bias, model.bias);
  const Problem p = problem();
  EXPECT_EQ(score(SurrogateScorer{loaded}, p, "some text", std::nullopt),
            model.predict(render_context(p), "some text"));
}

TEST(SurrogateScorerTest, MissingModel) {
  EXPECT_ERROR_KIND(score(SurrogateScorer{}, problem(), "x", std::nullopt), ErrorKind::ModelNotLoaded);
}

TEST(RemoteScorerTest, ThreeItemsThreeScores) {
  std::atomic<int> calls{0};
  ScoreServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const json body = json::parse(req.body);
    json scores = json::array();
    for (const auto& item : body.at("items")) {
      scores.push_back(item.at("candidate").get<std::string>().size() / 10.0);
    }
    res.set_content(json{{"scores", scores}}.dump(), "application/json");
  });
  const auto out = score_batch_remote(server.url(), {{"c", "a"}, {"c", "abcde"}, {"c", "abcdefghij"}});
  EXPECT_EQ(out, (std::vector<double>{0.1, 0.5, 1.0}));
  EXPECT_EQ(calls.load(), 1);
}

TEST(RemoteScorerTest, LengthMismatchIsProtocolViolation) {
  ScoreServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"scores":[0.1,0.2]})", "application/json");
  });
  EXPECT_ERROR_KIND(score_batch_remote(server.url(), {{"c", "a"}, {"c", "b"}, {"c", "d"}}),
                    ErrorKind::ProtocolViolation);
}

TEST(RemoteScorerTest, EmptyInputMakesNoCall) {
  std::atomic<int> calls{0};
  ScoreServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.set_content(R"({"scores":[]})", "application/json");
  });
  EXPECT_TRUE(score_batch_remote(server.url(), {}).empty());
  EXPECT_EQ(calls.load(), 0);
}

TEST(RemoteScorerTest, StatusAndPayloadErrors) {
  ScoreServer not_loaded([&](const httplib::Request&, httplib::Response& res) {
    res.status = 409;
    res.set_content(R"({"error":"model not loaded"})", "application/json");
  });
  EXPECT_ERROR_KIND(score_batch_remote(not_loaded.url(), {{"c", "a"}}), ErrorKind::ProtocolViolation);

  ScoreServer broken([&](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  EXPECT_ERROR_KIND(score_batch_remote(broken.url(), {{"c", "a"}}), ErrorKind::RemoteUnavailable);

  ScoreServer out_of_range([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"scores":[1.5]})", "application/json");
  });
  EXPECT_ERROR_KIND(score_batch_remote(out_of_range.url(), {{"c", "a"}}), ErrorKind::ProtocolViolation);

  ScoreServer text_score([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"scores":["0.5"]})", "application/json");
  });
  EXPECT_ERROR_KIND(score_batch_remote(text_score.url(), {{"c", "a"}}), ErrorKind::ProtocolViolation);
}

TEST(RemoteScorerTest, ConnectionRefused) {
  std::string url;
  {
    ScoreServer gone([](const httplib::Request&, httplib::Response&) {});
    url = gone.url();
  }
  EXPECT_ERROR_KIND(score_batch_remote(url, {{"c", "a"}}, 2), ErrorKind::RemoteUnavailable);
}

TEST(ScoreCandidates, RemoteBatchesAndSkipsEmpty) {
  std::atomic<int> calls{0};
  std::atomic<int> items{0};
  ScoreServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const json body = json::parse(req.body);
    items += static_cast<int>(body.at("items").size());
    json scores = json::array();
    for (std::size_t i = 0; i < body.at("items").size(); ++i) scores.push_back(0.5);
    res.set_content(json{{"scores", scores}}.dump(), "application/json");
  });
  const Problem p = problem();
  std::vector<Trajectory> cands(4);
  for (auto& t : cands) t.text = "text";
  cands[2].text.clear();
  const auto s = score_candidates(RemoteScorer{server.url(), 5}, p, cands);
  EXPECT_EQ(s, (std::vector<double>{0.5, 0.5, 0.0, 0.5}));
  EXPECT_EQ(calls.load(), 1);
  EXPECT_EQ(items.load(), 3);
}
