#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <json.hpp>
#include <random>

#include "critter/net/chat.hpp"
#include "critter/planner/evaluation.hpp"
#include "critter/planner/planner.hpp"
#include "critter/util/error.hpp"
#include "local_server.hpp"

namespace cp = critter::planner;

namespace {

std::vector<cp::QARecord> listing_records() { return cp::load_qa_dataset(CRITTER_DATA_DIR "/qa/listing.json"); }

// Answers each instruction with the matching record's ground-truth output.
std::shared_ptr<critter::net::ChatBackend> echo_backend(const std::vector<cp::QARecord>& records) {
  return std::make_shared<critter::net::FunctionChatBackend>([records](const auto& messages) {
    for (const auto& r : records) {
      if (r.instruction == messages.back().content) return r.output;
    }
    throw critter::TransportError("unknown instruction");
  });
}

}  // namespace

TEST(PlannerGrammar, ParsesListingOutputs) {
  EXPECT_EQ(cp::parse_planner_output("The animal is {Fox}, and motion is {Walk Out}."),
            std::make_pair(std::string("Fox"), std::string("Walk Out")));
  EXPECT_EQ(cp::parse_planner_output("The animal is {Rabbit}, and motion is {Hop}."),
            std::make_pair(std::string("Rabbit"), std::string("Hop")));
  EXPECT_EQ(cp::parse_planner_output("ANIMAL IS { Sand Mouse }, MOTION IS {walk  left }"),
            std::make_pair(std::string("Sand Mouse"), std::string("walk  left")));
}

TEST(PlannerGrammar, RejectsMalformedReplies) {
  EXPECT_THROW(cp::parse_planner_output("no braces here"), critter::ParseError);
  EXPECT_THROW(cp::parse_planner_output("The animal is {Fox}."), critter::ParseError);
  EXPECT_THROW(cp::parse_planner_output("The animal is {Fox, and motion is Hop"), critter::ParseError);
  EXPECT_THROW(cp::parse_planner_output("The animal is {}, and motion is {Hop}."), critter::ParseError);
}

TEST(PlannerGrammar, FormatParseClosureOnRandomPairs) {
  const auto tax = cp::Taxonomy::builtin();
  std::mt19937 gen(7);
  for (int i = 0; i < 1000; ++i) {
    const auto& a = tax.animals()[gen() % tax.animals().size()];
    const auto& m = tax.motions()[gen() % tax.motions().size()];
    ASSERT_EQ(cp::parse_planner_output(cp::format_planner_output(a, m)), std::make_pair(a, m));
  }
}

TEST(PlannerPrompts, TemplateSubstitution) {
  const auto [qm, qa] = cp::build_prompts("Monkey", "Attack");
  EXPECT_EQ(qm, "a Monkey performs Attack");
  EXPECT_NE(cp::build_prompts("Fox", "Walk Out").second.find("Fox"), std::string::npos);
  EXPECT_THROW(cp::build_prompts("Fox", ""), critter::InvalidArgument);
  cp::PromptTemplates t{"{motion} by {animal}, {animal}", "{animal}"};
  EXPECT_EQ(cp::build_prompts("Cat", "Hop", t).first, "Hop by Cat, Cat");
}

TEST(Taxonomy, BuiltinShape) {
  const auto tax = cp::Taxonomy::builtin();
  EXPECT_EQ(tax.animals().size(), 65u);
  for (const char* m : {"Attack", "Walk Quick", "Low Bite", "Walk Out", "Hop", "Run Forward", "Idle"}) {
    EXPECT_EQ(tax.canonical_motion(m), m);
  }
  EXPECT_EQ(tax.canonical_animal("polar  BEAR"), "Polar Bear");
  EXPECT_EQ(tax.canonical_animal("Unicorn"), "");
}

TEST(Taxonomy, ValidatesInvariants) {
  EXPECT_THROW(cp::Taxonomy({"Cat", "cat"}, {"Walk"}), critter::InvalidArgument);
  EXPECT_THROW(cp::Taxonomy({"Cat"}, {}), critter::InvalidArgument);
  EXPECT_THROW(cp::Taxonomy({"Cat"}, {"Walk"}, {{"kitty", "Dog"}}), critter::InvalidArgument);
  EXPECT_THROW(cp::Taxonomy({""}, {"Walk"}), critter::InvalidArgument);
}

TEST(Taxonomy, JsonRoundTrip) {
  const auto tax = cp::Taxonomy::builtin();
  const auto back = cp::Taxonomy::from_json(tax.to_json());
  EXPECT_EQ(back.animals(), tax.animals());
  EXPECT_EQ(back.motions(), tax.motions());
  EXPECT_EQ(back.aliases(), tax.aliases());
  EXPECT_EQ(back.fallback_animal(), tax.fallback_animal());
}

TEST(Matcher, LongestAliasWins) {
  const cp::Taxonomy tax({"Bear", "Polar Bear"}, {"Walk"});
  const auto r = cp::match_taxonomy("the polar bear shuffles", tax);
  ASSERT_FALSE(r.animals.empty());
  EXPECT_EQ(r.animals.front().category, "Polar Bear");
  EXPECT_TRUE(r.motions.empty());
}

TEST(Matcher, EarliestThenNameBreaksTies) {
  const cp::Taxonomy tax({"Cat", "Dog", "Ant"}, {"Walk"});
  EXPECT_EQ(cp::match_taxonomy("dog chases cat", tax).animals.front().category, "Dog");
  const cp::Taxonomy tied({"Bee", "Ant"}, {"Walk"}, {{"bug", "Bee"}, {"bugs", "Ant"}});
  EXPECT_EQ(cp::match_taxonomy("a bee", tied).animals.front().category, "Bee");
}

TEST(Matcher, NoCategoryGivesEmptyCandidates) {
  const auto r = cp::match_taxonomy("the weather is lovely", cp::Taxonomy::builtin());
  EXPECT_TRUE(r.animals.empty());
  EXPECT_TRUE(r.motions.empty());
}

TEST(Matcher, ListingQueries) {
  const cp::Planner planner(cp::Taxonomy::builtin());
  const std::vector<std::pair<std::string, std::pair<std::string, std::string>>> expected = {
      {"I saw an animal attacking something. A closer look makes it clear that a monkey is attacking",
       {"Monkey", "Attack"}},
      {"A chicken walked quickly from my line of sight", {"Chicken", "Walk Quick"}},
      {"A fox walked out of the woods.", {"Fox", "Walk Out"}},
      {"The rabbit hopped across the meadow, its fluffy tail bouncing in the sunlight.", {"Rabbit", "Hop"}},
  };
  for (const auto& [q, am] : expected) {
    const auto d = planner.plan(q);
    EXPECT_EQ(d.animal, am.first) << q;
    EXPECT_EQ(d.motion, am.second) << q;
    EXPECT_EQ(d.source, cp::DecisionSource::kMatcher);
  }
}

TEST(Matcher, DeterministicDecisions) {
  const cp::Planner planner(cp::Taxonomy::builtin());
  const auto a = planner.plan("A wolf runs forward");
  const auto b = planner.plan("A wolf runs forward");
  EXPECT_EQ(a.animal, b.animal);
  EXPECT_EQ(a.motion, b.motion);
  EXPECT_EQ(a.motion_prompt, b.motion_prompt);
  EXPECT_EQ(a.avatar_prompt, b.avatar_prompt);
  EXPECT_EQ(a.animal, "Wolf");
  EXPECT_EQ(a.motion, "Run Forward");
}

TEST(Planner, ErrorsOnEmptyOrUnrecognized) {
  const cp::Planner planner(cp::Taxonomy::builtin());
  EXPECT_THROW(planner.plan("   "), critter::InvalidArgument);
  try {
    planner.plan("the weather is lovely");
    FAIL();
  } catch (const critter::Error& e) {
    EXPECT_NE(std::string(e.what()).find("no category recognized"), std::string::npos);
  }
}

TEST(Planner, LlmReplyUsedWhenValid) {
  auto backend = std::make_shared<critter::net::FunctionChatBackend>([](const auto& messages) {
    EXPECT_EQ(messages.size(), 2u);
    EXPECT_EQ(messages[0].role, "system");
    return std::string("Sure. The animal is {monkey}, and motion is {attack}.");
  });
  const cp::Planner planner(cp::Taxonomy::builtin(), {}, backend);
  const auto d = planner.plan("something");
  EXPECT_EQ(d.source, cp::DecisionSource::kLlm);
  EXPECT_EQ(d.animal, "Monkey");
  EXPECT_EQ(d.motion, "Attack");
  ASSERT_TRUE(d.raw_backend_text.has_value());
}

TEST(Planner, FallsBackOnBadReplies) {
  for (const std::string reply : {"I cannot help", "The animal is {Unicorn}, and motion is {Hop}."}) {
    auto backend = std::make_shared<critter::net::FunctionChatBackend>([reply](const auto&) { return reply; });
    const cp::Planner planner(cp::Taxonomy::builtin(), {}, backend);
    const auto d = planner.plan("A fox walked out of the woods.");
    EXPECT_EQ(d.source, cp::DecisionSource::kMatcher);
    EXPECT_EQ(d.animal, "Fox");
    EXPECT_TRUE(d.fallback_reason.has_value());
  }
  auto failing = std::make_shared<critter::net::FunctionChatBackend>(
      [](const auto&) -> std::string { throw critter::TransportError("down"); });
  const cp::Planner planner(cp::Taxonomy::builtin(), {}, failing);
  EXPECT_EQ(planner.plan("a rabbit hops").motion, "Hop");
  EXPECT_THROW(planner.plan("nothing to see"), critter::Error);
}

TEST(Evaluation, RoundingMatchesTableRows) {
  EXPECT_EQ(cp::mean_hundredths(9707, 7167), 8437);
  EXPECT_EQ(cp::mean_hundredths(6930, 1919), 4424);
  EXPECT_EQ(cp::mean_hundredths(1, 0), 0);
  EXPECT_EQ(cp::mean_hundredths(3, 0), 2);
  EXPECT_EQ(cp::percent_hundredths(1, 3), 3333);
  EXPECT_EQ(cp::percent_hundredths(2, 3), 6667);
  // 1/20000 and 3/20000 sit exactly halfway between hundredths.
  EXPECT_EQ(cp::percent_hundredths(1, 16), 625);
  EXPECT_EQ(cp::percent_hundredths(1, 20000), 0);
  EXPECT_EQ(cp::percent_hundredths(3, 20000), 2);
}

TEST(Evaluation, EchoBackendScoresPerfect) {
  const auto records = listing_records();
  const cp::Planner planner(cp::Taxonomy::builtin(), {}, echo_backend(records));
  const auto report = cp::evaluate_planner(records, planner, 3);
  EXPECT_EQ(report.animal_acc, 100.0);
  EXPECT_EQ(report.motion_acc, 100.0);
  EXPECT_EQ(report.overall_acc, 100.0);
  EXPECT_EQ(report.evaluated, 5u);
}

TEST(Evaluation, InvalidGroundTruthExcluded) {
  auto records = listing_records();
  records.push_back({"a cat", "", "garbage", {}});
  const cp::Planner planner(cp::Taxonomy::builtin(), {}, echo_backend(records));
  const auto report = cp::evaluate_planner(records, planner);
  EXPECT_EQ(report.evaluated, 5u);
  EXPECT_FALSE(report.verdicts.back().valid);
  EXPECT_FALSE(report.verdicts.back().error.empty());
}

TEST(Evaluation, PermutationInvariant) {
  const auto base = listing_records();
  std::vector<cp::QARecord> records;
  std::mt19937 gen(3);
  const auto tax = cp::Taxonomy::builtin();
  for (int i = 0; i < 60; ++i) {
    cp::QARecord r = base[gen() % base.size()];
    if (i % 4 == 0) r.output = cp::format_planner_output(tax.animals()[gen() % 65], "Idle");
    records.push_back(r);
  }
  const cp::Planner planner(tax);
  const auto ref = cp::evaluate_planner(records, planner, 4);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(records.begin(), records.end(), gen);
    const auto r = cp::evaluate_planner(records, planner, 1 + k);
    EXPECT_EQ(r.animal_acc, ref.animal_acc);
    EXPECT_EQ(r.motion_acc, ref.motion_acc);
    EXPECT_EQ(r.overall_acc, ref.overall_acc);
  }
}

TEST(Evaluation, DatasetJsonRoundTrip) {
  const auto records = listing_records();
  const auto back = cp::parse_qa_dataset(cp::write_qa_dataset(records));
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].instruction, records[i].instruction);
    EXPECT_EQ(back[i].output, records[i].output);
  }
  EXPECT_THROW(cp::parse_qa_dataset("{\"a\": 1}"), critter::ParseError);
}

TEST(ChatProtocol, RequestAndResponseShape) {
  const auto body = nlohmann::json::parse(critter::net::encode_chat_request("m", {{"user", "hi"}}, 0.5));
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["temperature"], 0.5);
  EXPECT_EQ(critter::net::decode_chat_response(R"({"choices":[{"message":{"content":"ok"}}]})"), "ok");
  EXPECT_THROW(critter::net::decode_chat_response("{}"), critter::ParseError);
}

TEST(ChatProtocol, HttpBackendAgainstLocalServer) {
  critter::fixtures::LocalServer srv;
  std::atomic<int> calls{0};
  std::string seen_auth;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    seen_auth = req.get_header_value("Authorization");
    const auto body = nlohmann::json::parse(req.body);
    const std::string user = body["messages"].back()["content"];
    const std::string reply = user.find("fox") != std::string::npos
                                  ? "The animal is {Fox}, and motion is {Walk Out}."
                                  : "The animal is {Rabbit}, and motion is {Hop}.";
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", reply}}}}}}}.dump(), "application/json");
  });
  srv.server().Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  srv.start();

  critter::net::ServiceEndpoint ep{srv.url("/v1/chat/completions"), "planner", "secret", 5};
  const cp::Planner planner(cp::Taxonomy::builtin(), {}, std::make_shared<critter::net::HttpChatBackend>(ep));
  const auto d = planner.plan("A fox walked out of the woods.");
  EXPECT_EQ(d.source, cp::DecisionSource::kLlm);
  EXPECT_EQ(d.motion, "Walk Out");
  EXPECT_EQ(seen_auth, "Bearer secret");

  critter::net::ServiceEndpoint broken{srv.url("/broken"), "planner", "", 5};
  const cp::Planner fallback(cp::Taxonomy::builtin(), {}, std::make_shared<critter::net::HttpChatBackend>(broken));
  const auto f = fallback.plan("The rabbit hopped");
  EXPECT_EQ(f.source, cp::DecisionSource::kMatcher);
  EXPECT_EQ(f.motion, "Hop");
  EXPECT_EQ(calls.load(), 1);
}
