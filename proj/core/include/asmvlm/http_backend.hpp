#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "asmvlm/backend.hpp"

namespace asmvlm {

/// Parses pointing replies, one point per line. Accepts
/// `<point x="134" y="76">red gear</point>` (or an alt= attribute) and
/// `(134, 76) red gear`; the first form found on a line wins. Points whose
/// label is not in `labels` or that fall outside the image are dropped.
/// Throws MalformedPoints if nothing parses and the reply is not "none".
AnnotationSet parse_point_reply(std::string_view reply, const std::vector<std::string>& labels, int width_px,
                                int height_px);

/// Request body for POST {base_url}/chat/completions.
std::string build_chat_request(const std::string& model_name, const MultiModalPrompt& prompt);

/// First choice's message content. Throws EmptyReply / BackendUnavailable.
std::string extract_chat_content(std::string_view response_body);

// OpenAI-compatible multimodal chat client. Recognition issues one pointing
// call per image; reasoning sends the interleaved prompt as a single message.
class HttpBackend final : public RecognitionBackend, public ReasoningBackend {
 public:
  explicit HttpBackend(HttpConfig config);

  std::string name() const override { return "http"; }
  TripletAnnotations recognize(const RecognitionRequest& request) const override;
  std::string decide(const ReasoningRequest& request) const override;

  /// Posts a chat request with retry on transport errors, timeouts, 429 and 5xx.
  std::string chat(const MultiModalPrompt& prompt) const;

 private:
  HttpConfig config_;
};

}  // namespace asmvlm
