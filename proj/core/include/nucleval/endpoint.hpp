#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nucleval/manifest.hpp"
#include "nucleval/prompting.hpp"

namespace nucleval {

inline constexpr std::chrono::milliseconds kDefaultEndpointTimeout{120'000};

struct PromptRequest {
  std::string image_id;
  std::optional<std::filesystem::path> image_path;
  int width = 0;
  int height = 0;
  PromptSet prompts;
};

struct CandidateResponse {
  std::string image_id;
  std::vector<CandidateMask> candidates;
};

// One JSON object per line:
//   {"image_id":..,"image_path":..,"size":[H,W],"kind":"points"|"boxes","items":[..]}
std::string encode_request(const PromptRequest& request);
PromptRequest decode_request(const std::string& line);

/// Parses and validates one response line against the request it answers:
/// matching image_id, prompt_index in range and unique, RLE size equal to the
/// image, score in [0, 1]. Throws EndpointError.
CandidateResponse decode_response(const std::string& line, const PromptRequest& request);

/// A segmenter child process spoken to over newline-delimited JSON on its
/// stdin/stdout. The command runs under /bin/sh -c; stderr is inherited.
class SegmenterProcess {
 public:
  SegmenterProcess(const std::string& command,
                   std::chrono::milliseconds timeout = kDefaultEndpointTimeout);
  ~SegmenterProcess();

  SegmenterProcess(const SegmenterProcess&) = delete;
  SegmenterProcess& operator=(const SegmenterProcess&) = delete;

  // Sends one request and waits for its response line. Any failure (crash,
  // timeout, malformed or out-of-order reply) throws EndpointError and leaves
  // the process unusable.
  CandidateResponse query(const PromptRequest& request);

  // Closes the child's stdin and reaps it. Returns the exit status as
  // reported by waitpid, or -1 if it had to be killed.
  int close();

 private:
  std::string read_line();
  void write_all(const std::string& data);
  void fail(const std::string& message);

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  bool broken_ = false;
};

/// Feeds `requests` to a fresh endpoint process in order and returns one
/// response per request.
std::vector<CandidateResponse> run_segmenter(const std::string& command,
                                             std::span<const PromptRequest> requests,
                                             std::chrono::milliseconds timeout = kDefaultEndpointTimeout);

/// Reference endpoint answering each prompt with its ground-truth instance at
/// score 1.0: a point selects the instance under its pixel, a box selects the
/// instance whose tight box equals it. Prompts that hit nothing get no
/// candidate. Malformed lines get {"error":..} and the loop continues.
void serve_identity_endpoint(std::istream& in, std::ostream& out, const DatasetManifest& manifest);

}  // namespace nucleval
