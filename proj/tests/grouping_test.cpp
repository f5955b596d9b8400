#include <gtest/gtest.h>

#include <filesystem>

#include "logsieve/grouping.hpp"

namespace {

using namespace logsieve;

ParsedLog plog(int64_t no, int tid, std::vector<std::string> params = {},
               std::optional<int64_t> ts = std::nullopt, std::optional<int> label = std::nullopt) {
  ParsedLog p;
  p.line_no = no;
  p.template_id = tid;
  p.parameters = std::move(params);
  p.timestamp = ts;
  p.label_flag = label;
  return p;
}

WindowSpec session_spec() {
  WindowSpec s;
  s.mode = WindowMode::session;
  s.identifier_pattern = R"(blk_-?[0-9]+)";
  return s;
}

TEST(Session, PartitionsByIdentifier) {
  std::vector<ParsedLog> logs = {
      plog(1, 10, {"blk_1"}), plog(2, 11, {"blk_2"}), plog(3, 12, {"blk_1"}),
      plog(4, 13, {"blk_1"}), plog(5, 14, {"blk_2"}),
  };
  auto g = group_session(logs, session_spec(), {});
  ASSERT_EQ(g.sequences.size(), 2u);
  EXPECT_EQ(g.sequences[0].seq_id, "blk_1");
  EXPECT_EQ(g.sequences[0].event_ids, (std::vector<int>{10, 12, 13}));
  EXPECT_EQ(g.sequences[1].seq_id, "blk_2");
  EXPECT_EQ(g.sequences[1].event_ids, (std::vector<int>{11, 14}));
  // partition: every accepted log appears exactly once
  size_t total = 0;
  for (const auto& s : g.sequences) total += s.event_ids.size();
  EXPECT_EQ(total, logs.size());
  EXPECT_TRUE(g.rejected_line_nos.empty());
}

TEST(Session, LabelMapLookup) {
  std::vector<ParsedLog> logs = {plog(1, 10, {"blk_A1"}), plog(2, 11, {"blk_B2"})};
  std::unordered_map<std::string, int> labels = {{"blk_A1", 1}};
  WindowSpec spec = session_spec();
  spec.identifier_pattern = R"(blk_[A-Z0-9]+)";
  auto g = group_session(logs, spec, labels);
  ASSERT_EQ(g.sequences.size(), 2u);
  EXPECT_EQ(g.sequences[0].label, 1);
  EXPECT_EQ(g.sequences[1].label, 0);
}

TEST(Session, IdentifierlessLinesAreReportedNotDropped) {
  std::vector<ParsedLog> logs = {plog(1, 10, {"blk_1"}), plog(2, 11, {"nothing"})};
  auto g = group_session(logs, session_spec(), {});
  ASSERT_EQ(g.rejected_line_nos.size(), 1u);
  EXPECT_EQ(g.rejected_line_nos[0], 2);
}

TEST(Session, FallsBackToRawContent) {
  std::vector<ParsedLog> logs = {plog(1, 10), plog(2, 11)};
  std::vector<std::string> contents = {"writing blk_77 done", "reading blk_77 start"};
  auto g = group_session(logs, session_spec(), {}, &contents);
  ASSERT_EQ(g.sequences.size(), 1u);
  EXPECT_EQ(g.sequences[0].seq_id, "blk_77");
  EXPECT_EQ(g.sequences[0].event_ids.size(), 2u);
}

TEST(Sliding, WindowStartsMatchStepRule) {
  // one log per second over a 600 s span
  std::vector<ParsedLog> logs;
  for (int64_t t = 0; t < 600; ++t) logs.push_back(plog(t + 1, 1, {}, t));
  WindowSpec spec;
  spec.mode = WindowMode::sliding;
  spec.window_seconds = 300;
  spec.step_seconds = 60;
  auto seqs = group_sliding(logs, spec);
  ASSERT_EQ(seqs.size(), 6u);
  for (size_t i = 0; i < seqs.size(); ++i)
    EXPECT_EQ(seqs[i].seq_id, std::to_string(60 * i));
  // every log is a member of at least one window
  size_t members = 0;
  for (const auto& s : seqs) members += s.event_ids.size();
  EXPECT_GE(members, logs.size());
}

TEST(Sliding, ThunderbirdStyleShortWindows) {
  std::vector<ParsedLog> logs;
  for (int64_t t = 0; t < 180; t += 5) logs.push_back(plog(t, 2, {}, t));
  WindowSpec spec;
  spec.mode = WindowMode::sliding;
  spec.window_seconds = 60;
  spec.step_seconds = 30;
  auto seqs = group_sliding(logs, spec);
  ASSERT_EQ(seqs.size(), 5u);  // starts 0,30,60,90,120
  for (const auto& s : seqs) EXPECT_EQ(s.event_ids.size(), 12u);
}

TEST(Sliding, AllNormalLinesGiveLabelZero) {
  std::vector<ParsedLog> logs;
  for (int64_t t = 0; t < 100; ++t) logs.push_back(plog(t, 1, {}, t, 0));
  WindowSpec spec;
  spec.mode = WindowMode::sliding;
  spec.window_seconds = 50;
  spec.step_seconds = 25;
  for (const auto& s : group_sliding(logs, spec)) EXPECT_EQ(s.label, 0);
}

TEST(Sliding, AbnormalLineMarksItsWindows) {
  std::vector<ParsedLog> logs;
  for (int64_t t = 0; t < 100; ++t)
    logs.push_back(plog(t, 1, {}, t, t == 70 ? 1 : 0));
  WindowSpec spec;
  spec.mode = WindowMode::sliding;
  spec.window_seconds = 50;
  spec.step_seconds = 25;
  auto seqs = group_sliding(logs, spec);
  for (const auto& s : seqs) {
    const int64_t start = std::stoll(s.seq_id);
    const bool contains70 = start <= 70 && 70 < start + 50;
    EXPECT_EQ(s.label, contains70 ? 1 : 0) << "window " << start;
  }
}

TEST(Sliding, MissingTimestampNamesLine) {
  std::vector<ParsedLog> logs = {plog(1, 1, {}, 0), plog(2, 1)};
  WindowSpec spec;
  spec.mode = WindowMode::sliding;
  spec.window_seconds = 10;
  spec.step_seconds = 5;
  try {
    group_sliding(logs, spec);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Fixed, StepEqualsWindow) {
  std::vector<ParsedLog> logs;
  for (int64_t t = 0; t < 100; ++t) logs.push_back(plog(t, 1, {}, t));
  WindowSpec spec;
  spec.mode = WindowMode::fixed;
  spec.window_seconds = 25;
  auto seqs = group_sliding(logs, spec);
  ASSERT_EQ(seqs.size(), 4u);
  size_t members = 0;
  for (const auto& s : seqs) members += s.event_ids.size();
  EXPECT_EQ(members, logs.size());  // fixed windows partition
}

std::vector<EventSequence> make_seqs(int normals, int abnormals) {
  std::vector<EventSequence> seqs;
  for (int i = 0; i < normals + abnormals; ++i) {
    EventSequence s;
    s.seq_id = "s" + std::to_string(i);
    s.event_ids = {1, 2};
    s.first_timestamp = i;
    s.label = i < normals ? 0 : 1;
    seqs.push_back(s);
  }
  return seqs;
}

TEST(Split, ArithmeticMatchesRule) {
  auto split = chronological_split(make_seqs(6000, 100), 5000, 0.1);
  EXPECT_EQ(split.train.size(), 4500u);
  EXPECT_EQ(split.val.size(), 500u);
  EXPECT_EQ(split.test.size(), 1100u);
  EXPECT_FALSE(split.no_abnormal_warning);
}

TEST(Split, OrderIsNondecreasing) {
  auto seqs = make_seqs(300, 30);
  // interleave timestamps so sorting matters
  for (size_t i = 0; i < seqs.size(); ++i) seqs[i].first_timestamp = (i * 37) % 331;
  auto split = chronological_split(seqs, 200, 0.1);
  for (const auto* part : {&split.train, &split.val, &split.test})
    for (size_t i = 1; i < part->size(); ++i)
      EXPECT_LE((*part)[i - 1].first_timestamp, (*part)[i].first_timestamp);
  // no abnormal sequence in train or val
  for (const auto& s : split.train) EXPECT_EQ(s.label, 0);
  for (const auto& s : split.val) EXPECT_EQ(s.label, 0);
}

TEST(Split, TooFewNormalsIsAnError) {
  EXPECT_THROW(chronological_split(make_seqs(10, 5), 100, 0.1), std::runtime_error);
}

TEST(Split, NoAbnormalWarns) {
  auto split = chronological_split(make_seqs(100, 0), 50, 0.1);
  EXPECT_TRUE(split.no_abnormal_warning);
  EXPECT_EQ(split.test.size(), 50u);
}

TEST(SequenceFile, RoundTrip) {
  auto seqs = make_seqs(5, 2);
  const auto dir = std::filesystem::temp_directory_path() / "logsieve_group_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "seqs.tsv").string();
  write_sequence_file(path, seqs);
  auto loaded = read_sequence_file(path);
  ASSERT_EQ(loaded.size(), seqs.size());
  for (size_t i = 0; i < seqs.size(); ++i) {
    EXPECT_EQ(loaded[i].seq_id, seqs[i].seq_id);
    EXPECT_EQ(loaded[i].label, seqs[i].label);
    EXPECT_EQ(loaded[i].event_ids, seqs[i].event_ids);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
