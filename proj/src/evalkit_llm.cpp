#include <chrono>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <thread>

#include "cvemap/errors.hpp"
#include "cvemap/evalkit.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cvemap {

using nlohmann::json;

namespace {

class HttpLlmClient : public LlmClient {
public:
  HttpLlmClient(const std::string& endpoint, const std::string& model,
                const std::string& credential_env, int pause_ms)
      : model_(model), pause_ms_(pause_ms) {
    static const std::regex url_re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint, m, url_re))
      throw ValidationError("unsupported endpoint (expected http://host[:port][/path]): " +
                            endpoint);
    host_ = m[1].str();
    port_ = m[2].matched ? std::stoi(m[2].str()) : 80;
    path_ = m[3].matched && !m[3].str().empty() ? m[3].str() : "/";
    const char* key = std::getenv(credential_env.c_str());
    if (key == nullptr || *key == '\0')
      throw ValidationError("credential environment variable " +
                            credential_env + " is not set");
    credential_ = key;
  }

  std::string complete(const std::string& prompt) override {
    std::lock_guard<std::mutex> lock(mu_);
    if (pause_ms_ > 0 && !first_)
      std::this_thread::sleep_for(std::chrono::milliseconds(pause_ms_));
    first_ = false;

    httplib::Client client(host_, port_);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers = {
        {"Authorization", "Bearer " + credential_}};
    const json body = {
        {"model", model_},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res)
      throw TransportError("cannot reach " + host_ + ":" +
                           std::to_string(port_));
    if (res->status != 200)
      throw TransportError("completion request failed with status " +
                           std::to_string(res->status));
    try {
      const json j = json::parse(res->body);
      if (j.contains("choices") && j.at("choices").is_array() &&
          !j.at("choices").empty()) {
        const json& first = j.at("choices").front();
        if (first.contains("message"))
          return first.at("message").at("content").get<std::string>();
        if (first.contains("text"))
          return first.at("text").get<std::string>();
      }
      if (j.contains("response")) return j.at("response").get<std::string>();
      throw TransportError("completion response has no recognizable payload");
    } catch (const json::exception& e) {
      throw TransportError(std::string("bad completion response: ") + e.what());
    }
  }

  std::string name() const override { return "http:" + model_; }

private:
  std::string host_, path_, model_, credential_;
  int port_ = 80;
  int pause_ms_ = 0;
  bool first_ = true;
  std::mutex mu_;
};

}  // namespace

std::unique_ptr<LlmClient> make_http_llm_client(const std::string& endpoint,
                                                const std::string& model,
                                                const std::string& credential_env,
                                                int pause_ms) {
  return std::make_unique<HttpLlmClient>(endpoint, model, credential_env,
                                         pause_ms);
}

}  // namespace cvemap
