#include <gtest/gtest.h>

#include <filesystem>
#include <regex>

#include "acone/manifest.hpp"

namespace {

namespace fs = std::filesystem;
using namespace acone;

fs::path scratch(const char* name) {
  const fs::path dir = fs::temp_directory_path() / ("acone_manifest_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  return dir;
}

TEST(BlobHash, MatchesGit) {
  EXPECT_EQ(git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(BlobHash, BinaryContent) {
  const std::string with_nul(std::string("a\0b", 3));
  EXPECT_NE(git_blob_hash(with_nul), git_blob_hash("ab"));
  EXPECT_EQ(git_blob_hash(with_nul).size(), 40u);
}

TEST(AtomicWrite, CreatesParentsAndReplaces) {
  const fs::path p = scratch("write") / "a" / "b.txt";
  write_atomically(p, "first");
  EXPECT_EQ(read_file(p), "first");
  write_atomically(p, "second");
  EXPECT_EQ(read_file(p), "second");
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
  EXPECT_EQ(file_hash(p), git_blob_hash("second"));
}

TEST(Timestamp, Iso8601Utc) {
  EXPECT_EQ(utc_timestamp(std::chrono::system_clock::time_point{}), "1970-01-01T00:00:00Z");
  EXPECT_TRUE(std::regex_match(utc_timestamp(), std::regex(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\dZ)")));
}

TEST(Manifest, Fields) {
  const fs::path dir = scratch("fields");
  write_atomically(dir / "in.txt", "hello\n");
  RunManifest m;
  m.command = "train";
  m.argv = {"acone", "train"};
  m.config["d"] = 32;
  m.seed = 7;
  m.add_input(dir / "in.txt");
  m.outputs = {"out/last.ckpt"};
  m.started = m.finished = "2000-01-01T00:00:00Z";
  write_manifest(dir / "manifest.json", m);
  const auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(j.at("command"), "train");
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_EQ(j.at("config").at("d"), 32);
  ASSERT_EQ(j.at("inputs").size(), 1u);
  EXPECT_EQ(j.at("inputs")[0].at("sha1"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(j.at("outputs")[0], "out/last.ckpt");
  EXPECT_EQ(j.at("finished"), "2000-01-01T00:00:00Z");
}

TEST(Manifest, MissingInputThrows) {
  RunManifest m;
  EXPECT_THROW(m.add_input(scratch("missing") / "none"), std::runtime_error);
}

}  // namespace
