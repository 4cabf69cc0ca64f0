#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ddx/error.hpp"
#include "ddx/llm_channel.hpp"

namespace ddx {
namespace {

// Local chat-completion stand-in that answers from a script.
class MockServer {
 public:
  explicit MockServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  LlmChannelConfig config() const {
    LlmChannelConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat";
    c.api_key = "test-key";
    c.timeout = std::chrono::milliseconds(2000);
    c.backoff = std::chrono::milliseconds(1);
    return c;
  }

  std::atomic<int> requests{0};
  std::string last_auth;
  std::string last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

void reply(httplib::Response& res, const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
  res.set_content(j.dump(), "application/json");
}

TEST(LlmChannel, ParsesYesNo) {
  EXPECT_TRUE(parse_yes_no("yes"));
  EXPECT_TRUE(parse_yes_no("  Yes, I do."));
  EXPECT_TRUE(parse_yes_no("YES"));
  EXPECT_FALSE(parse_yes_no("no"));
  EXPECT_FALSE(parse_yes_no("maybe"));
  EXPECT_FALSE(parse_yes_no(""));
}

TEST(LlmChannel, RoundTripThroughServer) {
  MockServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string system = body["messages"][0]["content"];
    if (system.find("Rephrase") != std::string::npos) reply(res, "  Do you get breathless?  ");
    else if (system.find("truthful answer to the question is yes") != std::string::npos) reply(res, "Yes, often.");
    else if (system.find("truthful answer") != std::string::npos) reply(res, "Not really.");
    else {
      const std::string user = body["messages"][1]["content"];
      reply(res, user.find("Yes, often.") != std::string::npos ? "yes" : "no");
    }
  });
  LlmChannel channel(server.config());
  EXPECT_EQ(channel.render_question("Do you have dyspnea?"), "Do you get breathless?");
  EXPECT_EQ(server.last_auth, "Bearer test-key");
  EXPECT_NE(server.last_body.find("\"model\":\"default\""), std::string::npos);
  EXPECT_TRUE(channel.deliver_answer("q", true));
  EXPECT_FALSE(channel.deliver_answer("q", false));
  EXPECT_EQ(server.requests, 5);
}

TEST(LlmChannel, RetriesThenFails) {
  std::atomic<int> calls{0};
  MockServer flaky([&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    reply(res, "ok");
  });
  LlmChannel channel(flaky.config());
  EXPECT_EQ(channel.complete("s", "u"), "ok");
  EXPECT_EQ(flaky.requests, 3);

  MockServer broken([](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  LlmChannel failing(broken.config());
  try {
    failing.complete("s", "u");
    FAIL() << "malformed replies accepted";
  } catch (const ChannelError& e) {
    EXPECT_NE(std::string(e.what()).find("3 attempts"), std::string::npos);
  }
  EXPECT_EQ(broken.requests, 3);
}

TEST(LlmChannel, ConfigFromEnvironment) {
  ::unsetenv("DDX_LLM_ENDPOINT");
  EXPECT_THROW(llm_config_from_environment(), ConfigError);
  ::setenv("DDX_LLM_ENDPOINT", "http://localhost:1/x", 1);
  ::setenv("DDX_LLM_KEY", "k", 1);
  auto c = llm_config_from_environment();
  EXPECT_EQ(c.endpoint, "http://localhost:1/x");
  EXPECT_EQ(c.api_key, "k");
  ::unsetenv("DDX_LLM_ENDPOINT");
  ::unsetenv("DDX_LLM_KEY");
  LlmChannelConfig bad;
  bad.endpoint = "localhost";
  EXPECT_THROW(LlmChannel{bad}, ConfigError);
}

}  // namespace
}  // namespace ddx
