// Copyright 2026 The featscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"
#include "expect_error.hpp"
#include "featscope/binary_io.hpp"
#include "featscope/response_log.hpp"
#include "temp_dir.hpp"

using namespace featscope;
using nlohmann::json;

TEST_CASE("append stamps consecutive sequence numbers and applies in order") {
  ResponseLog log;
  std::vector<std::uint64_t> seen;
  for (int i = 0; i < 3; ++i) {
    log.append({{"type", "x"}, {"i", i}}, [&](const json& e) { seen.push_back(e["seq"].get<std::uint64_t>()); });
  }
  CHECK(seen == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(log.last_seq() == 3);
  CHECK(log.events()[2]["i"] == 2);
}

TEST_CASE("events persist one JSON object per line") {
  testing::TempDir dir;
  {
    ResponseLog log(dir / "sub" / "events.log");
    log.append({{"type", "a"}});
    log.append({{"type", "b"}});
  }
  const auto events = ResponseLog::read(dir / "sub" / "events.log");
  REQUIRE(events.size() == 2);
  CHECK(events[1]["type"] == "b");
  CHECK(events[1]["seq"] == 2);
}

TEST_CASE("a torn final line is ignored on read and dropped on reopen") {
  testing::TempDir dir;
  const auto path = dir / "events.log";
  io::write_file(path, "{\"type\":\"a\",\"seq\":1}\n{\"type\":\"b\",\"se");
  CHECK(ResponseLog::read(path).size() == 1);
  {
    ResponseLog log(path);
    log.adopt(ResponseLog::read(path));
    log.append({{"type", "c"}});
  }
  const auto events = ResponseLog::read(path);
  REQUIRE(events.size() == 2);
  CHECK(events[1]["type"] == "c");
  CHECK(events[1]["seq"] == 2);
}

TEST_CASE("corruption before the tail is a data error") {
  CHECK_ERROR_CODE(ResponseLog::parse("{\"seq\":1}\nnot json\n{\"seq\":2}\n"), ErrorCode::kData);
  CHECK_ERROR_CODE(ResponseLog::parse("garbage\n"), ErrorCode::kData);
}

TEST_CASE("adopt refuses sequence gaps") {
  ResponseLog log;
  CHECK_ERROR_CODE(log.adopt({json{{"seq", 1}}, json{{"seq", 3}}}), ErrorCode::kData);
}
