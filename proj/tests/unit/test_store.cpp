#include <gtest/gtest.h>

#include <thread>

#include "oracles.hpp"
#include "spire/error.hpp"
#include "spire/store.hpp"
#include "support.hpp"

using namespace spire;
using spire::test::TempDir;

namespace {

Bytes tiny_elf() { return test::load_fixture("single").bytes; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::Internal;
}

}  // namespace

TEST(Sha256, KnownVectors) {
  // FIPS 180-2 test vectors.
  EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex(ByteView(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Sha256, MatchesSystemTool) {
  auto bytes = tiny_elf();
  TempDir dir;
  test::write_bytes(dir / "f", bytes);
  auto r = test::run_command("sha256sum " + test::shell_quote((dir / "f").string()) + " 2>/dev/null");
  if (r.exit_code != 0)
    GTEST_SKIP() << "sha256sum not available";
  EXPECT_EQ(r.out.substr(0, 64), sha256_hex(bytes));
}

TEST(RequireElf64, MagicAndClass) {
  auto bytes = tiny_elf();
  EXPECT_NO_THROW(require_elf64(bytes));
  const Bytes pe{'M', 'Z', 0x90, 0x00, 0x03, 0, 0, 0};
  EXPECT_EQ(code_of([&] { require_elf64(pe); }), ErrorCode::NotElf64);
  Bytes elf32 = bytes;
  elf32[4] = 1;
  EXPECT_EQ(code_of([&] { require_elf64(elf32); }), ErrorCode::NotElf64);
  Bytes big = bytes;
  big[5] = 2;
  EXPECT_EQ(code_of([&] { require_elf64(big); }), ErrorCode::NotElf64);
  EXPECT_EQ(code_of([&] { require_elf64(Bytes{}); }), ErrorCode::NotElf64);
}

TEST(BinaryStore, IngestIsContentAddressed) {
  TempDir dir;
  BinaryStore store(dir.path());
  auto bytes = tiny_elf();
  auto a = store.ingest(bytes, "one");
  EXPECT_EQ(a.id, sha256_hex(bytes));
  EXPECT_EQ(a.format, BinaryFormat::Elf64);
  EXPECT_EQ(a.size_bytes, bytes.size());
  EXPECT_EQ(a.file_name, "one");
  EXPECT_EQ(a.ingest_time.size(), 20u);  // 2026-01-01T00:00:00Z
  EXPECT_EQ(a.ingest_time.back(), 'Z');

  auto b = store.ingest(bytes, "two");
  EXPECT_EQ(a, b);  // first record wins
  std::size_t objects = 0;
  for ([[maybe_unused]] auto& e : std::filesystem::directory_iterator(dir / "objects"))
    ++objects;
  EXPECT_EQ(objects, 1u);
  EXPECT_EQ(*store.bytes(a.id), bytes);
  EXPECT_EQ(store.list().size(), 1u);
}

TEST(BinaryStore, RejectsNonElf) {
  TempDir dir;
  BinaryStore store(dir.path());
  const Bytes pe{'M', 'Z', 0, 0};
  EXPECT_EQ(code_of([&] { store.ingest(pe, "x.exe"); }), ErrorCode::NotElf64);
  EXPECT_TRUE(store.list().empty());
}

TEST(BinaryStore, UnknownAndInvalidIds) {
  TempDir dir;
  BinaryStore store(dir.path());
  EXPECT_FALSE(store.find(std::string(64, 'a')));
  EXPECT_EQ(code_of([&] { store.get(std::string(64, 'a')); }), ErrorCode::UnknownBinary);
  EXPECT_EQ(code_of([&] { store.get("../../etc/passwd"); }), ErrorCode::UnknownBinary);
  EXPECT_TRUE(BinaryStore::is_valid_id(std::string(64, '0')));
  EXPECT_FALSE(BinaryStore::is_valid_id(std::string(63, '0')));
  EXPECT_FALSE(BinaryStore::is_valid_id(std::string(64, 'A')));
}

TEST(BinaryStore, SurvivesReopen) {
  TempDir dir;
  auto bytes = tiny_elf();
  BinaryArtifact first;
  {
    BinaryStore store(dir.path());
    first = store.ingest(bytes, "a.out");
  }
  BinaryStore again(dir.path());
  EXPECT_EQ(again.get(first.id), first);
}

TEST(BinaryStore, ConcurrentIngestOfSameBytes) {
  TempDir dir;
  BinaryStore store(dir.path());
  auto bytes = tiny_elf();
  std::vector<BinaryArtifact> seen(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < seen.size(); ++i)
    threads.emplace_back([&, i] { seen[i] = store.ingest(bytes, "t" + std::to_string(i)); });
  for (auto& t : threads)
    t.join();
  for (const auto& a : seen)
    EXPECT_EQ(a, seen.front());
}

TEST(BinaryStore, ProductsAreWriteOnce) {
  TempDir dir;
  BinaryStore store(dir.path());
  auto id = store.ingest(tiny_elf(), "x").id;
  EXPECT_TRUE(store.write_product_once(id, "p.json", "{}"));
  EXPECT_FALSE(store.write_product_once(id, "p.json", "[]"));
  EXPECT_EQ(store.read_product(id, "p.json"), "{}");
  EXPECT_FALSE(store.read_product(id, "missing.json"));
}

TEST(BinaryStore, UnwritableRootIsStoreUnavailable) {
  // A regular file in the path cannot be turned into a directory, even as root.
  TempDir dir;
  test::write_bytes(dir / "blocker", Bytes{1});
  BinaryStore store(dir / "blocker/store");
  EXPECT_EQ(code_of([&] { store.ingest(tiny_elf(), "x"); }), ErrorCode::StoreUnavailable);
}

TEST(WriteFileAtomic, CreatesParentsAndReplaces) {
  TempDir dir;
  auto p = dir / "a/b/c.txt";
  write_file_atomic(p, "one");
  EXPECT_EQ(read_file(p), "one");
  write_file_atomic(p, "two");
  EXPECT_EQ(read_file(p), "two");
  EXPECT_FALSE(read_file(dir / "nope"));
}

TEST(ReadBinaryFile, MissingIsIo) {
  EXPECT_EQ(code_of([] { read_binary_file("/nonexistent/spire/file"); }), ErrorCode::Io);
}
