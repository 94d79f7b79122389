#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include "biasprobe/error.hpp"
#include "biasprobe/modelio.hpp"
#include "biasprobe/text.hpp"
#include "biasprobe/toylm.hpp"

using namespace biasprobe;
using Pairs = std::vector<std::pair<std::string, std::string>>;
using modelio::DecodeConfig;
using nlohmann::json;

namespace {

std::string tests_dir() { return std::string(BIASPROBE_TESTS_DIR); }

const lexicon::AttributeLexicon& two_pairs() {
  static const lexicon::AttributeLexicon l({{"she", "he"}, {"herself", "himself"}});
  return l;
}

// Minimal OpenAI-style completion server.
class MockServer {
 public:
  std::atomic<int> fail_first{0};
  std::atomic<int> hits{0};
  std::atomic<bool> drop_logprobs{false};
  std::mutex mu;
  std::vector<json> bodies;
  std::vector<std::string> auth;

  MockServer() {
    svr_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      auto body = json::parse(req.body);
      {
        std::lock_guard lock(mu);
        bodies.push_back(body);
        auth.push_back(req.get_header_value("Authorization"));
      }
      if (fail_first > 0) {
        --fail_first;
        res.status = 503;
        return;
      }
      if (body["model"] == "bad") {
        res.status = 400;
        res.set_content("bad model", "text/plain");
        return;
      }
      json choice;
      if (body["echo"].get<bool>()) {
        const std::string prompt = body["prompt"];
        const auto cut = prompt.rfind(' ');
        const std::string head = prompt.substr(0, cut), word = prompt.substr(cut + 1);
        json toks = {head}, lps = {nullptr}, offs = {0};
        if (word == "herself") {
          toks.push_back(" her");
          toks.push_back("self");
          lps.push_back(std::log(0.2));
          lps.push_back(std::log(0.5));
          offs.push_back(head.size());
          offs.push_back(head.size() + 4);
        } else {
          toks.push_back(" " + word);
          lps.push_back(std::log(word == "she" ? 0.3 : word == "he" ? 0.1 : 0.01));
          offs.push_back(head.size());
        }
        choice = {{"text", prompt}, {"logprobs", {{"tokens", toks}, {"token_logprobs", lps}, {"text_offset", offs}}}};
      } else {
        choice = {{"text", " she is nice."},
                  {"logprobs", {{"tokens", {" she", " is", " nice."}}, {"token_logprobs", {-0.1, -0.2, -0.3}}}}};
      }
      if (drop_logprobs) choice.erase("logprobs");
      res.set_content(json{{"choices", {choice}}}.dump(), "application/json");
    });
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }
  ~MockServer() {
    svr_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server svr_;
  int port_ = 0;
  std::thread thread_;
};

modelio::RetryPolicy fast() { return {3, std::chrono::milliseconds(1)}; }

}  // namespace

TEST_SUITE("modelio") {
  TEST_CASE("decode config validation") {
    CHECK_NOTHROW(DecodeConfig{}.validate());
    CHECK_THROWS_AS((DecodeConfig{-0.1, 1, 0, 50, 0}.validate()), Error);
    CHECK_THROWS_AS((DecodeConfig{1, 0.0, 0, 50, 0}.validate()), Error);
    CHECK_THROWS_AS((DecodeConfig{1, 1.5, 0, 50, 0}.validate()), Error);
    CHECK_THROWS_AS((DecodeConfig{1, 1, 0, -1, 0}.validate()), Error);
    CHECK(DecodeConfig{}.greedy());
  }

  TEST_CASE("toy backend generation is seeded and validated") {
    toylm::ToyLM m(toylm::Vocabulary({"my", "friend", "is", "dancing", ",", "and", "she", "he", "her", "##self", "him", "."}), {});
    modelio::ToyBackend b(std::make_shared<const toylm::ToyLM>(m), "t");
    DecodeConfig d{0.7, 1, 0, 20, 99};
    auto r1 = b.generate("My friend is dancing, and", d);
    auto r2 = b.generate("My friend is dancing, and", d);
    CHECK(r1.continuation == r2.continuation);
    CHECK(r1.tokens == r2.tokens);
    CHECK(r1.backend_id == "toy:t");
    CHECK(r1.reproducible);
    CHECK_THROWS_AS(b.generate("", d), Error);
    std::string joined;
    for (const auto& t : r1.tokens) joined += t.text;
    CHECK(joined == r1.continuation);
  }

  TEST_CASE("toy backend scoring: uniform model and multi-token words") {
    toylm::Vocabulary v({"my", "friend", "she", "he", "her", "##self", "him", "a", "b"});
    REQUIRE(v.size() == 11);
    auto uniform = std::make_shared<const toylm::ToyLM>(toylm::ToyLM::zeros(v, {}));
    modelio::ToyBackend ub(uniform);
    auto d = ub.score_attribute_words("my friend", lexicon::AttributeLexicon(Pairs{{"she", "he"}}));
    CHECK(d.pf[0] == doctest::Approx(1.0 / 11));
    CHECK(d.pm[0] == doctest::Approx(1.0 / 11));

    toylm::Vocabulary ten({"my", "friend", "she", "he", "a", "b", "c", "d"});
    REQUIRE(ten.size() == 10);
    modelio::ToyBackend tb(std::make_shared<const toylm::ToyLM>(toylm::ToyLM::zeros(ten, {})));
    auto d10 = tb.score_attribute_words("my friend", lexicon::AttributeLexicon(Pairs{{"she", "he"}}));
    CHECK(d10.pf[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d10.pm[0] == doctest::Approx(0.1).epsilon(1e-12));

    auto m = std::make_shared<const toylm::ToyLM>(v, toylm::ToyConfig{});
    modelio::ToyBackend b(m);
    auto ctx = v.encode("my friend");
    auto p1 = m->next_token_probs(ctx)[static_cast<std::size_t>(v.find("her"))];
    ctx.push_back(v.find("her"));
    auto p2 = m->next_token_probs(ctx)[static_cast<std::size_t>(v.find("##self"))];
    auto ds = b.score_attribute_words("my friend", lexicon::AttributeLexicon(Pairs{{"herself", "him"}}));
    CHECK(ds.pf[0] == doctest::Approx(p1 * p2).epsilon(1e-12));

    try {
      b.score_attribute_words("my friend", lexicon::AttributeLexicon(Pairs{{"queen", "king"}}));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Backend);
      CHECK(std::string(e.what()).find("queen") != std::string::npos);
      CHECK(std::string(e.what()).find("king") != std::string::npos);
    }
  }

  TEST_CASE("replay backend on the case-study fixture") {
    auto b = modelio::ReplayBackend::load(tests_dir() + "/data/case_study_replay.jsonl");
    CHECK(b.size() == 8);
    auto lex = lexicon::AttributeLexicon::default_lexicon();
    auto d = b.score_attribute_words("My friend is applying eye shadow, and", lex);
    auto she = lex.find("she")->pair_index - 1, his = lex.find("his")->pair_index - 1;
    CHECK(d.pf[static_cast<std::size_t>(she)] == doctest::Approx(0.24).epsilon(1e-12));
    CHECK(d.pm[static_cast<std::size_t>(she)] == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(d.pm[static_cast<std::size_t>(his)] == 0);
    auto r = b.generate("My friend is dancing, and", {});
    CHECK(r.continuation == " I am dancing with her.");
    CHECK(b.generate("My friend is dancing, and", {}).continuation == r.continuation);
    CHECK_THROWS_AS(b.generate("unknown prompt", {}), Error);
    CHECK_THROWS_AS(modelio::ReplayBackend("{\"prompt_hash\":\"00\",\"prompt\":\"x\",\"continuation\":\"\"}"), Error);
  }

  TEST_CASE("replay entries round trip") {
    modelio::ReplayBackend::Entry e{"p", " a b", {{" a", -1}, {" b", -2}}, {{"she", -1.5}}};
    auto line = modelio::ReplayBackend::entry_to_json("p", e).dump();
    modelio::ReplayBackend b(line);
    CHECK(b.generate("p", {}).tokens == e.tokens);
  }

  TEST_CASE("run jsonl round trip") {
    modelio::RunEntry e;
    e.record = {"id1", "My friend, and", " she left.", {{" she", -0.5}, {" left.", -1.25}}, DecodeConfig{0.7, 0.9, 10, 20, 5}, "toy:x", true};
    e.distribution = {"id1", {0.25, 0.5}, {0.125, 0}};
    auto text = modelio::write_run_jsonl({e, e});
    auto back = modelio::read_run_jsonl(text);
    REQUIRE(back.size() == 2);
    CHECK(back[1].record.continuation == e.record.continuation);
    CHECK(back[1].record.tokens == e.record.tokens);
    CHECK(back[1].record.decode == e.record.decode);
    CHECK(back[1].distribution.pf == e.distribution.pf);
    CHECK(modelio::write_run_jsonl(back) == text);
    CHECK(modelio::read_run_jsonl("").empty());
    CHECK_THROWS_AS(modelio::read_run_jsonl("{\"probe_id\":1}\n"), Error);
  }

  TEST_CASE("http backend wire format, scoring and auth") {
    MockServer server;
    modelio::HttpBackend b(server.url(), "m1", std::string("sekret"), fast());
    auto req = b.generation_request("hi", DecodeConfig{0.5, 0.9, 0, 7, 3});
    for (const char* k : {"model", "prompt", "max_tokens", "temperature", "top_p", "logprobs", "echo", "seed"}) CHECK(req.contains(k));
    CHECK(req["max_tokens"] == 7);

    auto r = b.generate("My friend, and", DecodeConfig{});
    CHECK(r.continuation == " she is nice.");
    CHECK(r.tokens.size() == 3);
    CHECK(r.tokens[1].logprob == -0.2);
    CHECK(r.reproducible);
    CHECK_FALSE(b.generate("My friend, and", DecodeConfig{0.7, 1, 0, 50, 1}).reproducible);

    auto d = b.score_attribute_words("My friend, and", two_pairs());
    CHECK(d.pf[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(d.pm[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d.pf[1] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d.pm[1] == doctest::Approx(0.01).epsilon(1e-12));
    std::lock_guard lock(server.mu);
    for (const auto& a : server.auth) CHECK(a == "Bearer sekret");
    CHECK(server.bodies.back()["echo"] == true);
    CHECK(server.bodies.back()["max_tokens"] == 0);
  }

  TEST_CASE("http backend retries transient failures") {
    MockServer server;
    server.fail_first = 2;
    modelio::HttpBackend b(server.url(), "m", std::nullopt, fast());
    CHECK(b.generate("x", {}).continuation == " she is nice.");
    CHECK(server.hits == 3);
    server.fail_first = 5;
    server.hits = 0;
    CHECK_THROWS_AS(b.generate("x", {}), Error);
    CHECK(server.hits == 3);
    server.fail_first = 0;
    server.hits = 0;
    modelio::HttpBackend bad(server.url(), "bad", std::nullopt, fast());
    CHECK_THROWS_AS(bad.generate("x", {}), Error);
    CHECK(server.hits == 1);
    std::lock_guard lock(server.mu);
    CHECK(server.auth.back().empty());
  }

  TEST_CASE("http backend refuses responses without logprobs") {
    MockServer server;
    server.drop_logprobs = true;
    modelio::HttpBackend b(server.url(), "m", std::nullopt, fast());
    CHECK_THROWS_AS(b.generate("x", {}), Error);
    try {
      b.score_attribute_words("x", two_pairs());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Backend);
    }
  }

  TEST_CASE("http backend connection failures and bad URLs") {
    CHECK_THROWS_AS(modelio::HttpBackend("https://example.com", "m"), Error);
    CHECK_THROWS_AS(modelio::HttpBackend("localhost:80", "m"), Error);
    modelio::HttpBackend dead("http://127.0.0.1:1", "m", std::nullopt, {2, std::chrono::milliseconds(1)});
    try {
      dead.generate("x", {});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Backend);
    }
  }

  TEST_CASE("backend factory") {
    modelio::BackendDescriptor d{modelio::BackendKind::Replay, tests_dir() + "/data/case_study_replay.jsonl", "", std::nullopt};
    CHECK(modelio::make_backend(d)->id() == "replay:case_study_replay");
    d.kind = modelio::BackendKind::Http;
    d.endpoint_or_path = "http://127.0.0.1:1";
    CHECK_THROWS_AS(modelio::make_backend(d), Error);
    CHECK(modelio::parse_backend_kind("toy") == modelio::BackendKind::Toy);
    CHECK_THROWS_AS(modelio::parse_backend_kind("grpc"), Error);
  }
}
