// Copyright 2026 The advsqli Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Remote detector adapter. Sends the adapted payload to a protected
// endpoint and reads the block signal off the HTTP status code (optionally
// a block-page body substring). Requests are rate limited per host; 429
// triggers exponential backoff.

#pragma once

#include <chrono>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include <httplib.h>

#include "advsqli/detectors.hpp"

namespace advsqli {

struct EndpointConfig {
  std::string base_url;                  // e.g. http://host:port/vuln
  std::string param = "id";
  std::set<int> blocked_statuses = {403, 406};
  std::string block_body_substring;      // optional alternative signal
  double rate_limit_per_sec = 10.0;
  int timeout_seconds = 10;
  int transport_retries = 3;
  int too_many_requests_retries = 5;
};

class HttpDetector : public Detector {
 public:
  explicit HttpDetector(EndpointConfig config) : config_(std::move(config)) {
    std::string url = config_.base_url;
    auto scheme_end = url.find("://");
    std::string rest =
        scheme_end == std::string::npos ? url : url.substr(scheme_end + 3);
    auto path_start = rest.find('/');
    host_ = path_start == std::string::npos ? rest : rest.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : rest.substr(path_start);
    origin_ = scheme_end == std::string::npos
                  ? "http://" + host_
                  : url.substr(0, scheme_end + 3) + host_;
  }

  bool with_probability() const override { return false; }
  std::string name() const override { return "http:" + origin_; }
  int attempts_logged() const { return attempts_; }

 protected:
  Verdict do_detect(const std::string& wire, RequestMethod method) override {
    int backoff_ms = 100;
    int transport_failures = 0;
    int too_many = 0;
    while (true) {
      rate_limit();
      httplib::Client client(origin_);
      client.set_connection_timeout(config_.timeout_seconds, 0);
      client.set_read_timeout(config_.timeout_seconds, 0);
      httplib::Result res = send(client, wire, method);
      ++attempts_;
      if (!res) {
        if (++transport_failures > config_.transport_retries)
          throw DetectorUnavailable("transport failure contacting " +
                                    origin_);
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
        continue;
      }
      if (res->status == 429) {
        if (++too_many > config_.too_many_requests_retries)
          throw DetectorUnavailable("persistent 429 from " + origin_);
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
        continue;
      }
      Verdict v;
      v.raw_status = res->status;
      bool blocked = config_.blocked_statuses.count(res->status) > 0;
      if (!blocked && !config_.block_body_substring.empty() &&
          res->body.find(config_.block_body_substring) != std::string::npos)
        blocked = true;
      v.label = blocked ? VerdictLabel::kBlocked : VerdictLabel::kPassed;
      return v;
    }
  }

 private:
  httplib::Result send(httplib::Client& client, const std::string& wire,
                       RequestMethod method) {
    switch (method) {
      case RequestMethod::kGet:
        return client.Get(path_ + "?" + config_.param + "=" + wire);
      case RequestMethod::kGetJson: {
        std::string json = "{\"value\":\"" + wire + "\"}";
        return client.Get(path_ + "?" + config_.param + "=" +
                          codec::url_encode(json));
      }
      case RequestMethod::kPost:
        return client.Post(path_, config_.param + "=" + wire,
                           "application/x-www-form-urlencoded");
      case RequestMethod::kPostJson:
        return client.Post(path_,
                           "{\"" + config_.param + "\":\"" + wire + "\"}",
                           "application/json");
    }
    return client.Get(path_);
  }

  void rate_limit() {
    if (config_.rate_limit_per_sec <= 0) return;
    const auto interval = std::chrono::microseconds(
        static_cast<long>(1e6 / config_.rate_limit_per_sec));
    std::unique_lock<std::mutex> lock(mutex_);
    auto now = std::chrono::steady_clock::now();
    if (now < next_slot_) {
      auto wait = next_slot_ - now;
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
      now = std::chrono::steady_clock::now();
    }
    next_slot_ = std::max(next_slot_ + interval, now);
  }

  EndpointConfig config_;
  std::string host_;
  std::string path_;
  std::string origin_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::atomic<int> attempts_{0};
};

}  // namespace advsqli
