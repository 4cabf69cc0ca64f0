#include "ddx/llm_channel.hpp"

#include <cctype>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ddx/error.hpp"
#include "ddx/io.hpp"

namespace ddx {

LlmChannelConfig llm_config_from_environment() {
  LlmChannelConfig config;
  const char* endpoint = std::getenv("DDX_LLM_ENDPOINT");
  if (endpoint == nullptr || *endpoint == '\0') {
    throw ConfigError("DDX_LLM_ENDPOINT is not set");
  }
  config.endpoint = endpoint;
  if (const char* key = std::getenv("DDX_LLM_KEY")) config.api_key = key;
  return config;
}

LlmChannel::LlmChannel(LlmChannelConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("LLM endpoint must be a full URL, got '" + config_.endpoint + "'");
  }
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  origin_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  if (config_.attempts < 1) throw ConfigError("LLM channel needs at least one attempt");
}

std::string LlmChannel::complete(std::string_view system, std::string_view user) {
  nlohmann::json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::json::array(
      {{{"role", "system"}, {"content", system}}, {{"role", "user"}, {"content", user}}});
  const std::string payload = body.dump();

  std::string last_error;
  auto delay = config_.backoff;
  for (int attempt = 0; attempt < config_.attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);
    auto response = client.Post(path_, payload, "application/json");
    if (!response) {
      last_error = httplib::to_string(response.error());
      continue;
    }
    if (response->status != 200) {
      last_error = "HTTP status " + std::to_string(response->status);
      continue;
    }
    try {
      const auto reply = nlohmann::json::parse(response->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed reply: ") + e.what();
    }
  }
  throw ChannelError("LLM request to " + config_.endpoint + " failed after " +
                     std::to_string(config_.attempts) + " attempts: " + last_error);
}

std::string LlmChannel::render_question(std::string_view planner_question) {
  return std::string(trim(complete(
      "You are a doctor talking to a patient. Rephrase the question below in plain, friendly "
      "language. Reply with the question only.",
      planner_question)));
}

bool LlmChannel::deliver_answer(std::string_view question, bool truth) {
  const std::string utterance = complete(
      std::string("You are a patient answering your doctor. The truthful answer to the question "
                  "is ") +
          (truth ? "yes" : "no") + ". Answer in one short natural sentence.",
      question);
  const std::string parsed = complete(
      "Decide whether the patient's reply means yes or no. Reply with exactly one word: yes or "
      "no.",
      "Question: " + std::string(question) + "\nReply: " + utterance);
  return parse_yes_no(parsed);
}

bool parse_yes_no(std::string_view reply) {
  reply = trim(reply);
  std::string head;
  for (char c : reply.substr(0, 3)) head += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return head == "yes";
}

}  // namespace ddx
