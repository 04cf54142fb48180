#include "nucleval/endpoint.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>
#include <tuple>

#include "json_codec.hpp"
#include "nucleval/error.hpp"
#include "nucleval/label_io.hpp"

extern char** environ;

namespace nucleval {
namespace {

using json_codec::json;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::string truncate(const std::string& s, std::size_t n = 200) {
  return s.size() <= n ? s : s.substr(0, n) + "...";
}

}  // namespace

std::string encode_request(const PromptRequest& request) {
  auto j = json_codec::prompts_to_json(request.image_id, request.prompts);
  j["size"] = {request.height, request.width};
  if (request.image_path) j["image_path"] = request.image_path->string();
  return j.dump();
}

PromptRequest decode_request(const std::string& line) {
  const auto j = json_codec::parse(line, "request");
  PromptRequest request;
  request.image_id = json_codec::required<std::string>(j, "image_id", "request");
  const auto size = json_codec::required<std::vector<int>>(j, "size", "request");
  if (size.size() != 2) throw DataError("request: size must be [H, W]");
  request.height = size[0];
  request.width = size[1];
  if (j.contains("image_path") && j.at("image_path").is_string()) {
    request.image_path = j.at("image_path").get<std::string>();
  }
  request.prompts = json_codec::prompts_from_json(j);
  return request;
}

CandidateResponse decode_response(const std::string& line, const PromptRequest& request) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error&) {
    throw EndpointError("malformed endpoint response: " + truncate(line));
  }
  if (!j.is_object()) throw EndpointError("endpoint response is not an object: " + truncate(line));
  if (j.contains("error")) {
    throw EndpointError("endpoint reported an error for '" + request.image_id +
                        "': " + truncate(j.at("error").dump()));
  }
  if (!j.contains("image_id") || !j.at("image_id").is_string()) {
    throw EndpointError("endpoint response lacks image_id");
  }
  CandidateResponse response;
  response.image_id = j.at("image_id").get<std::string>();
  if (response.image_id != request.image_id) {
    throw EndpointError("endpoint response order violated: expected '" + request.image_id +
                        "', got '" + response.image_id + "'");
  }
  if (!j.contains("candidates") || !j.at("candidates").is_array()) {
    throw EndpointError("endpoint response lacks a candidates array");
  }
  const auto n_prompts = request.prompts.size();
  std::set<std::size_t> seen;
  for (const auto& c : j.at("candidates")) {
    try {
      const auto index = json_codec::required<std::int64_t>(c, "prompt_index", "candidate");
      if (index < 0 || static_cast<std::size_t>(index) >= n_prompts) {
        throw EndpointError("candidate prompt_index " + std::to_string(index) +
                            " out of range for " + std::to_string(n_prompts) + " prompts");
      }
      if (!seen.insert(static_cast<std::size_t>(index)).second) {
        throw EndpointError("duplicate candidate for prompt_index " + std::to_string(index));
      }
      const auto score = json_codec::required<double>(c, "score", "candidate");
      if (!(score >= 0.0 && score <= 1.0)) {
        throw EndpointError("candidate score " + std::to_string(score) + " outside [0, 1]");
      }
      if (!c.contains("rle")) throw EndpointError("candidate lacks rle");
      auto rle = json_codec::rle_from_json(c.at("rle"));
      if (rle.height != request.height || rle.width != request.width) {
        throw EndpointError("candidate rle size " + std::to_string(rle.height) + "x" +
                            std::to_string(rle.width) + " does not match image " +
                            std::to_string(request.height) + "x" + std::to_string(request.width));
      }
      response.candidates.push_back({static_cast<std::size_t>(index), std::move(rle), score});
    } catch (const DataError& e) {
      throw EndpointError(std::string("invalid candidate: ") + e.what());
    }
  }
  return response;
}

SegmenterProcess::SegmenterProcess(const std::string& command, std::chrono::milliseconds timeout)
    : command_(command), timeout_(timeout) {
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw EndpointError("pipe: " + std::string(std::strerror(errno)));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw EndpointError("pipe: " + std::string(std::strerror(errno)));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  std::string shell = "/bin/sh";
  std::string flag = "-c";
  std::string cmd = command_;
  char* argv[] = {shell.data(), flag.data(), cmd.data(), nullptr};
  const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    pid_ = -1;
    throw EndpointError("cannot spawn endpoint '" + command_ + "': " + std::strerror(rc));
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SegmenterProcess::~SegmenterProcess() { close(); }

void SegmenterProcess::fail(const std::string& message) {
  broken_ = true;
  throw EndpointError(message);
}

void SegmenterProcess::write_all(const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("endpoint '" + command_ + "' closed its input (" + std::strerror(errno) + ")");
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string SegmenterProcess::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      fail("endpoint '" + command_ + "' timed out after " + std::to_string(timeout_.count()) + " ms");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      fail(std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[65536];
    const auto n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) fail("endpoint '" + command_ + "' exited before answering");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

CandidateResponse SegmenterProcess::query(const PromptRequest& request) {
  if (broken_ || pid_ < 0) throw EndpointError("endpoint '" + command_ + "' is no longer usable");
  write_all(encode_request(request) + "\n");
  const auto line = read_line();
  try {
    return decode_response(line, request);
  } catch (const EndpointError&) {
    broken_ = true;
    throw;
  }
}

int SegmenterProcess::close() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
  if (pid_ < 0) return 0;

  int status = 0;
  const auto deadline =
      std::chrono::steady_clock::now() + (broken_ ? std::chrono::milliseconds(0)
                                                  : std::chrono::milliseconds(5000));
  for (;;) {
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      pid_ = -1;
      return status;
    }
    if (r < 0 && errno != EINTR) {
      pid_ = -1;
      return -1;
    }
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ::kill(pid_, SIGKILL);
  while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
  }
  pid_ = -1;
  return -1;
}

std::vector<CandidateResponse> run_segmenter(const std::string& command,
                                             std::span<const PromptRequest> requests,
                                             std::chrono::milliseconds timeout) {
  SegmenterProcess process(command, timeout);
  std::vector<CandidateResponse> responses;
  responses.reserve(requests.size());
  for (const auto& request : requests) responses.push_back(process.query(request));
  process.close();
  return responses;
}

void serve_identity_endpoint(std::istream& in, std::ostream& out, const DatasetManifest& manifest) {
  std::map<std::string, InstanceMap> cache;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json reply;
    try {
      const auto request = decode_request(line);
      const Sample* sample = manifest.find(request.image_id);
      if (sample == nullptr) throw DataError("unknown image_id '" + request.image_id + "'");
      auto it = cache.find(request.image_id);
      if (it == cache.end()) {
        it = cache.emplace(request.image_id, read_label_png(sample->gt_path)).first;
      }
      const InstanceMap& gt = it->second;
      if (gt.width() != request.width || gt.height() != request.height) {
        throw DataError("request size does not match gt for '" + request.image_id + "'");
      }

      auto box_key = [](const BoundingBox& b) { return std::tuple{b.x0, b.y0, b.x1, b.y1}; };
      std::map<std::tuple<int, int, int, int>, InstanceId> by_box;
      if (request.prompts.kind == PromptKind::kBoxes) {
        for (const auto& s : instance_stats(gt)) by_box.emplace(box_key(s.bbox), s.id);
      }

      std::vector<CandidateMask> candidates;
      for (std::size_t i = 0; i < request.prompts.size(); ++i) {
        InstanceId id = 0;
        if (request.prompts.kind == PromptKind::kPoints) {
          const auto [row, col] = pixel_of(request.prompts.points[i], gt.width(), gt.height());
          id = gt.at(row, col);
        } else if (auto hit = by_box.find(box_key(request.prompts.boxes[i])); hit != by_box.end()) {
          id = hit->second;
        }
        if (id == 0) continue;
        candidates.push_back({i, rle_encode(instance_mask(gt, id)), 1.0});
      }
      reply = json_codec::candidates_to_json(request.image_id, candidates);
    } catch (const std::exception& e) {
      reply = json{{"error", e.what()}};
    }
    out << reply.dump() << '\n' << std::flush;
  }
}

}  // namespace nucleval
