#include <doctest.h>

#include <random>
#include <thread>

#include "../common/edit_mock.hpp"
#include "../common/scenes.hpp"
#include "svgsmith/session.hpp"
#include "svgsmith/util.hpp"
#include "test_support.hpp"

using namespace svgsmith;
using session::EditOps;
using testing::edit_reply;

namespace {

// Paths with full-precision coordinates and colors, standing in for an
// already optimized document.
svg::Document optimized_doc(int n, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  svg::Document doc;
  doc.canvas = {64, 64};
  for (int i = 1; i <= n; ++i) {
    auto p = testing::random_closed_path(rng, 64, svg::path_id(i), 4);
    p.semantic_label = i <= n / 2 ? "body" : "head";
    doc.paths.push_back(p);
  }
  return doc;
}

optim::OptimizationConfig quick_cfg() {
  optim::OptimizationConfig cfg;
  cfg.iters_per_stage = 15;
  cfg.render = {1, 1.0, {1, 1, 1}, 64, 0, 16};
  return cfg;
}

std::string path_text(const svg::Path& p) {
  svg::Document d;
  d.canvas = {64, 64};
  d.paths.push_back(p);
  d.paths.back().id = "x";
  return svg::serialize(d);
}

const std::string kEmptySummary = "1. Element Modification: []\n2. Element Removal: []\n3. Element Addition: \"\", []";

}  // namespace

TEST_CASE("operation summary parsing") {
  auto ops = session::parse_operation_summary(
      "```svg\n<svg/>\n```\nOperation Summary:\n1. Element Modification: [path_2, path_5]\n"
      "2. Element Removal: [path_3]\n3. Element Addition: path_4, [path_9, path_10]\n");
  REQUIRE(ops);
  CHECK(ops->modified == std::vector<std::string>{"path_2", "path_5"});
  CHECK(ops->removed == std::vector<std::string>{"path_3"});
  CHECK(ops->added.start_path_id == "path_4");
  CHECK(ops->added.ids == std::vector<std::string>{"path_9", "path_10"});

  ops = session::parse_operation_summary(
      "**Element Modification**: []\n**Element Removal**: None\n**Element Addition**: \"\", [\"path_7\"]");
  REQUIRE(ops);
  CHECK(ops->modified.empty());
  CHECK(ops->removed.empty());
  CHECK(ops->added.start_path_id.empty());
  CHECK(ops->added.ids == std::vector<std::string>{"path_7"});

  ops = session::parse_operation_summary("Element Addition: '', ['path_1']");
  REQUIRE(ops);
  CHECK(ops->added.ids == std::vector<std::string>{"path_1"});
  CHECK(ops->added.start_path_id.empty());
  CHECK_FALSE(session::parse_operation_summary("no summary here"));
}

TEST_CASE("script diff") {
  const auto pre = optimized_doc(4);
  auto post = pre;
  post.paths.erase(post.paths.begin() + 1);
  post.paths[1].fill.r = 0.123;
  svg::Path extra = pre.paths[0];
  extra.id = "path_9";
  post.paths.insert(post.paths.begin() + 2, extra);
  const EditOps ops = session::diff_documents(pre, post);
  CHECK(ops.removed == std::vector<std::string>{"path_2"});
  CHECK(ops.modified == std::vector<std::string>{"path_3"});
  CHECK(ops.added.ids == std::vector<std::string>{"path_9"});
  CHECK(ops.added.start_path_id == "path_3");
  CHECK(session::diff_documents(pre, pre).empty());
}

TEST_CASE("removal renumbers and restores frozen geometry") {
  const auto s = session::new_session("s1", "five shapes", optimized_doc(5));
  llm::ScriptedTransport t([](const llm::Conversation& c) {
    return edit_reply(c, testing::drop_id("path_3"),
                      "1. Element Modification: []\n2. Element Removal: [path_3]\n3. Element Addition: \"\", []");
  });
  const auto r = session::apply_edit(s, t, "remove the middle shape");
  CHECK(r.ops.removed == std::vector<std::string>{"path_3"});
  CHECK(r.ops.modified.empty());
  CHECK(r.warnings.empty());
  REQUIRE(r.doc.paths.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.doc.paths[i].id == svg::path_id(i + 1));
  CHECK(r.renamed.at("path_4") == "path_3");
  // Bit-exact restoration, colors included (the script only carries hex).
  svg::Path expect = s.current.paths[3];
  expect.id = "path_3";
  CHECK(r.doc.paths[2] == expect);

  const auto req = t.requests().front();
  CHECK(req.back().text.find("remove the middle shape") != std::string::npos);
  CHECK(req.back().text.find("Element Removal") != std::string::npos);

  const auto opt = session::selective_optimize(r, nullptr, quick_cfg(), shape::FourierDecoder());
  CHECK_FALSE(opt.optimized);
  CHECK(opt.doc == r.doc);
}

TEST_CASE("addition at the head") {
  const auto s = session::new_session("s2", "p", optimized_doc(5));
  llm::ScriptedTransport t([](const llm::Conversation& c) {
    return edit_reply(c, testing::insert_after("", R"(<circle id="path_6" cx="20" cy="20" r="6" fill="#ff0000"/>)"),
                      "1. Element Modification: []\n2. Element Removal: []\n3. Element Addition: \"\", [path_6]");
  });
  const auto r = session::apply_edit(s, t, "add a red dot");
  CHECK(r.warnings.empty());
  CHECK(r.ops.added.start_path_id.empty());
  CHECK(r.ops.added.ids == std::vector<std::string>{"path_1"});
  REQUIRE(r.doc.paths.size() == 6);
  CHECK(r.doc.paths[0].fill == Rgba{1, 0, 0, 1});
  CHECK(r.renamed.at("path_1") == "path_2");
  CHECK(r.renamed.at("path_5") == "path_6");
}

TEST_CASE("summary disagreeing with the script") {
  const auto s = session::new_session("s3", "p", optimized_doc(5));
  llm::ScriptedTransport t([](const llm::Conversation& c) {
    return edit_reply(c, testing::identity_edit(),
                      "1. Element Modification: [path_2]\n2. Element Removal: []\n3. Element Addition: \"\", []");
  });
  const auto r = session::apply_edit(s, t, "make it nicer");
  CHECK(r.ops.empty());
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("path_2") != std::string::npos);
  CHECK(r.doc == s.current);

  const auto opt = session::selective_optimize(r, nullptr, quick_cfg(), shape::FourierDecoder());
  CHECK(opt.doc == s.current);

  llm::ScriptedTransport quiet([](const llm::Conversation& c) {
    std::string reply = edit_reply(c, testing::identity_edit(), "");
    return reply.substr(0, reply.find("Operation Summary"));
  });
  const auto q = session::apply_edit(s, quiet, "nothing");
  CHECK(q.ops.empty());
  CHECK(q.warnings.size() == 1);
}

TEST_CASE("edit reply re-ask") {
  const auto s = session::new_session("s4", "p", optimized_doc(3));
  int calls = 0;
  llm::ScriptedTransport t([&](const llm::Conversation& c) {
    return ++calls == 1 ? std::string("I changed it.") : edit_reply(c, testing::drop_id("path_1"), kEmptySummary);
  });
  const auto r = session::apply_edit(s, t, "drop the first");
  CHECK(calls == 2);
  CHECK(r.ops.removed == std::vector<std::string>{"path_1"});
  CHECK(r.warnings.size() == 1);  // the summary claims nothing was removed

  llm::ScriptedTransport bad(std::vector<std::string>{"no code", "still no code"});
  CHECK_THROWS_AS(session::apply_edit(s, bad, "x"), FormatError);
  llm::ScriptedTransport dup([](const llm::Conversation& c) {
    return edit_reply(c, testing::insert_after("path_1", R"(<circle id="path_2" cx="5" cy="5" r="3" fill="#000000"/>)"),
                      kEmptySummary);
  });
  CHECK_THROWS_AS(session::apply_edit(s, dup, "x"), FormatError);
  CHECK_THROWS_AS(session::apply_edit(s, bad, "  "), ArgumentError);
}

TEST_CASE("selective optimization preserves untouched paths") {
  auto s = session::new_session("s5", "p", optimized_doc(10));
  llm::ScriptedTransport t([](const llm::Conversation& c) {
    return edit_reply(c, testing::replace_id("path_4", R"(<circle id="path_4" cx="30" cy="34" r="9" fill="#2040c0"/>)"),
                      "1. Element Modification: [path_4]\n2. Element Removal: []\n3. Element Addition: \"\", []");
  });
  const auto r = session::apply_edit(s, t, "turn shape four into a blue disk");
  CHECK(r.ops.modified == std::vector<std::string>{"path_4"});
  svg::Document want = r.doc;
  want.paths[3].transform = Affine::translate(2, -1) * want.paths[3].transform;
  const auto target = raster::render(want, quick_cfg().render);
  const auto opt = session::selective_optimize(r, &target, quick_cfg(), shape::FourierDecoder());
  CHECK(opt.optimized);
  CHECK(opt.failed.empty());
  REQUIRE(opt.doc.paths.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    if (i == 3) continue;
    CHECK(path_text(opt.doc.paths[i]) == path_text(s.current.paths[i]));
    CHECK(opt.doc.paths[i] == s.current.paths[i]);
  }
  CHECK(opt.doc.paths[3].cubic_count() == 20);
  CHECK_FALSE(opt.point_trace.empty());
  CHECK_THROWS_AS(session::selective_optimize(r, nullptr, quick_cfg(), shape::FourierDecoder()), ArgumentError);

  session::commit(s, "turn shape four into a blue disk", r, opt, "abc");
  REQUIRE(s.history.size() == 1);
  CHECK(s.current == opt.doc);
  CHECK(s.history[0].ops == r.ops);
  CHECK(s.history[0].target_hash == "abc");
}

TEST_CASE("a failing path keeps its template geometry") {
  const auto s = session::new_session("s6", "p", optimized_doc(4));
  llm::ScriptedTransport t([](const llm::Conversation& c) {
    return edit_reply(c,
                      [](std::vector<std::string> lines) {
                        lines = testing::replace_id("path_1", R"(<rect id="path_1" x="5" y="5" width="12" height="9" fill="#00aa00"/>)")(lines);
                        return testing::replace_id("path_2", R"(<circle id="path_2" cx="40" cy="40" r="8" fill="#aa0000"/>)")(lines);
                      },
                      "1. Element Modification: [path_1, path_2]\n2. Element Removal: []\n3. Element Addition: \"\", []");
  });
  auto r = session::apply_edit(s, t, "two changes");
  REQUIRE(r.ops.modified.size() == 2);
  // Corrupt one edited path the way a diverging run would.
  auto pts = r.doc.paths[1].control_points();
  pts[2].x = std::nan("");
  r.doc.paths[1].set_control_points(pts);
  const auto target = raster::render(s.current, quick_cfg().render);
  const auto opt = session::selective_optimize(r, &target, quick_cfg(), shape::FourierDecoder());
  CHECK(opt.failed == std::vector<std::string>{"path_2"});
  REQUIRE(opt.warnings.size() == 1);
  CHECK(opt.warnings[0].find("path_2") != std::string::npos);
  CHECK(opt.doc.paths[1].commands.size() == r.doc.paths[1].commands.size());
  CHECK(opt.doc.paths[0].cubic_count() == 20);  // the other edit still ran
  CHECK(opt.doc.paths[2] == s.current.paths[2]);
}

TEST_CASE("save and load") {
  auto s = session::new_session("abc123", "a scene", optimized_doc(4));
  llm::ScriptedTransport t([](const llm::Conversation& c) {
    return edit_reply(c, testing::drop_id("path_2"),
                      "1. Element Modification: []\n2. Element Removal: [path_2]\n3. Element Addition: \"\", []");
  });
  session::run_edit(s, t, "drop two", nullptr, quick_cfg(), shape::FourierDecoder());
  REQUIRE(s.history.size() == 1);
  CHECK(s.history[0].target_hash.empty());
  s.history[0].warnings.push_back("kept for the round trip");

  const std::string bytes = session::save_session(s);
  CHECK(session::load_session(bytes) == s);
  CHECK_THROWS_AS(session::load_session(bytes.substr(0, bytes.size() / 2)), FormatError);
  CHECK_THROWS_AS(session::load_session("{}"), FormatError);
  std::string v2 = bytes;
  v2.replace(v2.find("\"version\": 1"), 12, "\"version\": 2");
  CHECK_THROWS_AS(session::load_session(v2), VersionError);

  // Unlabeled paths following labeled ones keep their empty label.
  auto mixed = s;
  mixed.current.paths[1].semantic_label.clear();
  mixed.current.paths[2].fill = {0, 0, 0, 0};
  mixed.current.paths[2].stroke = {{0.1, 0.2, 0.3, 0.5}, 1.25};
  CHECK(session::load_session(session::save_session(mixed)) == mixed);
}

TEST_CASE("golden v1 session") {
  const auto s = session::load_session(test::read_text("session_v1.json"));
  CHECK(s.session_id == "golden01");
  CHECK(s.prompt == "a red square");
  REQUIRE(s.current.paths.size() == 1);
  CHECK(s.current.paths[0].semantic_label == "square");
  CHECK(s.current.paths[0].fill.r == 0.9);
  CHECK(s.current.paths[0].fill.g == 0.1);
  CHECK(s.current.paths[0].control_points()[1] == Vec2{20.5, 10});
  REQUIRE(s.history.size() == 1);
  CHECK(s.history[0].instruction == "remove the circle");
  CHECK(s.history[0].ops.removed == std::vector<std::string>{"path_2"});
  CHECK(s.history[0].pre_doc.paths.size() == 2);
  CHECK(s.history[0].target_hash.empty());
  CHECK(s.initial == s.history[0].pre_doc);
}

TEST_CASE("session store") {
  const auto root = std::filesystem::temp_directory_path() / "svgsmith_store_test";
  std::filesystem::remove_all(root);
  session::SessionStore store(root);
  auto s = session::new_session(session::new_session_id(), "p", optimized_doc(2));
  CHECK(s.session_id.size() == 16);
  store.save(s);
  CHECK(store.exists(s.session_id));
  CHECK(std::filesystem::exists(root / s.session_id / "session.json"));
  CHECK(store.load(s.session_id) == s);
  CHECK(store.list() == std::vector<std::string>{s.session_id});
  const std::vector<std::uint8_t> png = raster::encode_png(raster::RasterImage(4, 4));
  const std::string name = store.put_asset(s.session_id, png);
  CHECK(name == util::sha256_hex(png) + ".png");
  CHECK(std::filesystem::exists(root / s.session_id / "assets" / name));
  CHECK(store.asset(s.session_id, name) == std::string(png.begin(), png.end()));
  CHECK(store.put_asset(s.session_id, "a,b\n", "csv") == util::sha256_hex("a,b\n") + ".csv");
  CHECK_THROWS_AS(store.load("missing"), IoError);
  CHECK_THROWS_AS(store.load("../etc"), ArgumentError);
  CHECK_THROWS_AS(store.asset(s.session_id, "nothex"), ArgumentError);
  CHECK_THROWS_AS(store.asset(s.session_id, std::string(64, 'a') + ".png"), IoError);
  store.remove(s.session_id);
  CHECK_FALSE(store.exists(s.session_id));
}

TEST_CASE("one writer per session") {
  session::EditLocks locks;
  auto a = locks.try_acquire("x");
  CHECK(a.owns());
  CHECK(locks.busy("x"));
  CHECK_FALSE(locks.try_acquire("x"));
  CHECK(locks.try_acquire("y"));
  // Released from another thread, as a finished background job would.
  std::thread th([lease = std::move(a)]() mutable { lease.release(); });
  th.join();
  CHECK_FALSE(locks.busy("x"));
  CHECK(locks.try_acquire("x"));
}
