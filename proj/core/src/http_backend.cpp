#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "asmvlm/http_backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <regex>
#include <thread>

#include "asmvlm/error.hpp"
#include "httplib.h"
#include "json_util.hpp"

namespace asmvlm {

using detail::Json;

namespace {

std::string normalize_label(std::string_view s) {
  const auto junk = [](char c) { return std::isspace(static_cast<unsigned char>(c)) || std::string_view(".,;:*\"'`").find(c) != std::string_view::npos; };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct RawPoint {
  double x;
  double y;
  std::string label;
};

const std::regex& point_tag() {
  static const std::regex re(
      R"re(<point\b([^>]*)>([^<]*)</point>)re", std::regex::icase);
  return re;
}

const std::regex& plain_point() {
  static const std::regex re(R"re(\(\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\)\s*(.*))re");
  return re;
}

std::optional<std::string> attribute(const std::string& attrs, const std::string& name) {
  const std::regex re("\\b" + name + "\\s*=\\s*\"([^\"]*)\"", std::regex::icase);
  std::smatch m;
  if (std::regex_search(attrs, m, re)) return m[1].str();
  return std::nullopt;
}

std::optional<double> to_number(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s->c_str(), &end);
  if (end == s->c_str() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<RawPoint> points_in_line(const std::string& line) {
  std::vector<RawPoint> out;
  for (auto it = std::sregex_iterator(line.begin(), line.end(), point_tag()); it != std::sregex_iterator(); ++it) {
    const std::string attrs = (*it)[1].str();
    const auto x = to_number(attribute(attrs, "x"));
    const auto y = to_number(attribute(attrs, "y"));
    if (!x || !y) continue;
    std::string label = (*it)[2].str();
    if (normalize_label(label).empty()) label = attribute(attrs, "alt").value_or("");
    out.push_back({*x, *y, label});
  }
  if (!out.empty()) return out;
  std::smatch m;
  if (std::regex_search(line, m, plain_point())) out.push_back({std::stod(m[1].str()), std::stod(m[2].str()), m[3].str()});
  return out;
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint split_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "base_url needs a scheme: " + url);
  const std::size_t path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

}  // namespace

AnnotationSet parse_point_reply(std::string_view reply, const std::vector<std::string>& labels, int width_px,
                                int height_px) {
  std::map<std::string, std::string> by_key;
  for (const auto& l : labels) by_key.emplace(normalize_label(l), l);

  AnnotationSet out;
  bool matched_any = false;
  std::size_t start = 0;
  while (start < reply.size()) {
    std::size_t end = reply.find('\n', start);
    if (end == std::string_view::npos) end = reply.size();
    const std::string line(reply.substr(start, end - start));
    start = end + 1;
    for (const auto& p : points_in_line(line)) {
      matched_any = true;
      auto it = by_key.find(normalize_label(p.label));
      if (it == by_key.end()) continue;
      const int x = static_cast<int>(std::floor(p.x));
      const int y = static_cast<int>(std::floor(p.y));
      if (x < 0 || y < 0 || x >= width_px || y >= height_px) continue;
      out.push_back({0, {x, y}, it->second});
    }
  }
  if (!matched_any && normalize_label(reply).rfind("none", 0) != 0) {
    throw Error(ErrorCode::MalformedPoints, "no point found in reply");
  }
  return out;
}

std::string build_chat_request(const std::string& model_name, const MultiModalPrompt& prompt) {
  Json content = Json::array();
  for (const auto& part : prompt.parts) {
    if (const auto* t = std::get_if<TextPart>(&part)) {
      content.push_back({{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImagePart>(part);
      content.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:image/png;base64," + base64_encode(encode_png(img.image))}}}});
    }
  }
  Json body{{"model", model_name}, {"messages", Json::array({{{"role", "user"}, {"content", content}}})}};
  return body.dump();
}

std::string extract_chat_content(std::string_view response_body) {
  const Json doc = Json::parse(response_body.begin(), response_body.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() ||
      doc["choices"].empty()) {
    throw Error(ErrorCode::BackendUnavailable, "malformed chat response");
  }
  const Json& message = doc["choices"][0].value("message", Json::object());
  const Json content = message.value("content", Json());
  std::string text;
  if (content.is_string()) {
    text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text") text += part.value("text", "");
    }
  } else if (!content.is_null()) {
    throw Error(ErrorCode::BackendUnavailable, "unexpected message content type");
  }
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
    throw Error(ErrorCode::EmptyReply, "model returned no text");
  }
  return text;
}

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
  config_.validate();
  split_url(config_.base_url);
  if (!config_.api_key_env_var.empty() && std::getenv(config_.api_key_env_var.c_str()) == nullptr) {
    throw Error(ErrorCode::ConfigError, "environment variable " + config_.api_key_env_var + " is not set");
  }
}

std::string HttpBackend::chat(const MultiModalPrompt& prompt) const {
  const Endpoint endpoint = split_url(config_.base_url);
  const std::string body = build_chat_request(config_.model_name, prompt);
  httplib::Headers headers;
  if (!config_.api_key_env_var.empty()) {
    if (const char* key = std::getenv(config_.api_key_env_var.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  httplib::Client client(endpoint.scheme_host_port);
  const auto timeout = std::chrono::milliseconds(static_cast<long>(config_.timeout_s * 1000.0));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(config_.backoff_initial_ms) << (attempt - 1)));
    }
    auto res = client.Post(endpoint.path_prefix + "/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw Error(ErrorCode::BackendUnavailable, "HTTP " + std::to_string(res->status));
    return extract_chat_content(res->body);
  }
  throw Error(ErrorCode::BackendUnavailable,
              last_error + " after " + std::to_string(config_.max_retries + 1) + " attempt(s)");
}

TripletAnnotations HttpBackend::recognize(const RecognitionRequest& request) const {
  request.validate();
  const std::vector<std::string> labels = request.all_labels();

  // Markers follow label order: object labels from 1, location labels from 101.
  // Extra instances of one label take the next free id of its range.
  std::map<std::string, int> base_id;
  for (std::size_t i = 0; i < request.object_labels.size(); ++i) base_id.emplace(request.object_labels[i], 1 + static_cast<int>(i));
  for (std::size_t i = 0; i < request.location_labels.size(); ++i) {
    base_id.emplace(request.location_labels[i], kLocationMarkerMin + static_cast<int>(i));
  }
  std::map<std::pair<std::string, int>, int> extra_ids;  // (label, instance) -> id
  int next_object = static_cast<int>(request.object_labels.size()) + 1;
  int next_location = kLocationMarkerMin + static_cast<int>(request.location_labels.size());

  const auto annotate = [&](ImageRole role, const RasterImage& image) {
    MultiModalPrompt prompt;
    prompt.parts.emplace_back(TextPart{request.recognition_prompt});
    prompt.parts.emplace_back(ImagePart{role, image});
    AnnotationSet points = parse_point_reply(chat(prompt), labels, image.width(), image.height());
    std::map<std::string, int> seen;
    AnnotationSet out;
    for (auto& p : points) {
      const int instance = seen[p.label]++;
      const int base = base_id.at(p.label);
      if (instance == 0) {
        p.marker_id = base;
      } else {
        auto [it, inserted] = extra_ids.emplace(std::make_pair(p.label, instance), 0);
        if (inserted) it->second = is_object_marker(base) ? next_object++ : next_location++;
        p.marker_id = it->second;
      }
      const bool fits = is_object_marker(base) ? is_object_marker(p.marker_id) : is_location_marker(p.marker_id);
      if (fits) out.push_back(std::move(p));
    }
    return out;
  };
  TripletAnnotations result;
  result.object = annotate(ImageRole::Object, request.triplet.object_img);
  result.current = annotate(ImageRole::Current, request.triplet.current_img);
  result.goal = annotate(ImageRole::Goal, request.triplet.goal_img);
  return result;
}

std::string HttpBackend::decide(const ReasoningRequest& request) const {
  request.validate();
  return chat(request.prompt);
}

}  // namespace asmvlm
