#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "logsieve/config.hpp"

namespace {

using logsieve::KeyValueConfig;

TEST(Config, ParsesKeyValueLines) {
  const auto dir = std::filesystem::temp_directory_path() / "logsieve_config_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "c.conf").string();
  {
    std::ofstream out(path);
    out << "# a comment\n";
    out << "epochs = 12\n";
    out << "mask_ratio = 0.5  # inline comment\n";
    out << "generator = mlm\n";
    out << "verbose = true\n";
    out << "\n";
  }
  auto c = KeyValueConfig::from_file(path);
  EXPECT_EQ(c.get_int("epochs", 0), 12);
  EXPECT_DOUBLE_EQ(c.get_double("mask_ratio", 0), 0.5);
  EXPECT_EQ(c.get_string("generator", ""), "mlm");
  EXPECT_TRUE(c.get_bool("verbose", false));
  EXPECT_EQ(c.get_int("missing", 7), 7);
  std::filesystem::remove_all(dir);
}

TEST(Config, MalformedLineIsAnError) {
  const auto dir = std::filesystem::temp_directory_path() / "logsieve_config_test2";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "bad.conf").string();
  {
    std::ofstream out(path);
    out << "this line has no equals sign\n";
  }
  EXPECT_THROW(KeyValueConfig::from_file(path), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(Config, SetOverrides) {
  KeyValueConfig c;
  c.set("k", "1");
  c.set("k", "2");
  EXPECT_EQ(c.get_int("k", 0), 2);
  EXPECT_TRUE(c.to_json().contains("k"));
}

}  // namespace
