#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include "ddx/channel.hpp"

namespace ddx {

struct LlmChannelConfig {
  std::string endpoint;  // full URL of a chat-completion route
  std::string api_key;
  std::string model = "default";
  std::chrono::milliseconds timeout{30000};
  int attempts = 3;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
};

// Endpoint and key from DDX_LLM_ENDPOINT / DDX_LLM_KEY. Throws ConfigError when
// the endpoint is unset.
LlmChannelConfig llm_config_from_environment();

// Every hop is one chat-completion request: the doctor's question is rephrased
// for the patient, the patient's truth is voiced as an utterance, and the
// utterance is read back as yes or no.
class LlmChannel final : public SemanticChannel {
 public:
  explicit LlmChannel(LlmChannelConfig config);
  std::string render_question(std::string_view planner_question) override;
  bool deliver_answer(std::string_view question, bool truth) override;

  // Sends one system + user exchange and returns the assistant's content.
  std::string complete(std::string_view system, std::string_view user);

 private:
  LlmChannelConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

// "yes" / "no" at the start of a reply, case-insensitive. Anything else reads
// as no.
bool parse_yes_no(std::string_view reply);

}  // namespace ddx
