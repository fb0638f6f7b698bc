#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "dualfact/annotation.hpp"
#include "dualfact/rng.hpp"
#include "httplib.h"
#include "json.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dualfact;
using nlohmann::json;

namespace {

Dataset predicted_fixture() {
  auto ds = load_dataset(testutil::data("fixtures/youcook3_10.jsonl"));
  for (auto& c : ds.clauses)
    for (auto layer : {Layer::Conceptual, Layer::Contextual}) {
      auto& b = c.bundle(layer);
      b.predicted = b.positive;
      b.predicted->push_back(b.negative.front());
    }
  return ds;
}

FrameManifest some_frames(const Dataset& ds, std::size_t clips) {
  FrameManifest m;
  for (std::size_t i = 0; i < clips && i < ds.clauses.size(); ++i) {
    const auto& id = ds.clauses[i].clause_id;
    m.clips[id] = {id + "_f0.jpg", id + "_f1.jpg"};
  }
  return m;
}

// Synthetic tasks, alternating caption and video mode.
std::vector<JudgmentTask> synthetic_tasks(std::size_t n) {
  std::vector<JudgmentTask> tasks;
  for (std::size_t i = 0; i < n; ++i) {
    JudgmentTask t;
    t.index = i + 1;
    t.task_id = "t" + std::to_string(1000 + i + 1);
    t.clause_id = "c" + std::to_string(i);
    t.video_id = "v" + std::to_string(i % 3);
    t.layer = i % 4 < 2 ? Layer::Conceptual : Layer::Contextual;
    t.mode = i % 2 == 0 ? JudgmentMode::Caption : JudgmentMode::Video;
    t.fact_text = t.layer == Layer::Conceptual ? "Tool is knife." : "cut with knife";
    t.fact = parse_fact(t.fact_text, t.layer);
    if (t.mode == JudgmentMode::Caption) t.caption = "cut the onion with a knife";
    else t.frames = {"f" + std::to_string(i) + ".jpg"};
    tasks.push_back(std::move(t));
  }
  return tasks;
}

StoreOptions fixed_clock(std::size_t quota = 2) {
  StoreOptions o;
  o.quota = quota;
  o.clock = [] { return std::int64_t{1700000000000}; };
  return o;
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const RequestError& e) {
    return e.status();
  }
  return 0;
}

}  // namespace

TEST_CASE("build_tasks draws per stratum and is seed-deterministic") {
  auto ds = predicted_fixture();
  auto frames = some_frames(ds, 4);
  TaskSpec spec;
  spec.counts[{JudgmentMode::Caption, Layer::Conceptual}] = 12;
  spec.counts[{JudgmentMode::Caption, Layer::Contextual}] = 8;
  spec.counts[{JudgmentMode::Video, Layer::Conceptual}] = 6;
  auto a = build_tasks(ds, spec, 42, frames);
  auto b = build_tasks(ds, spec, 42, frames);
  auto c = build_tasks(ds, spec, 43, frames);
  REQUIRE(a.size() == 26);
  std::vector<std::string> ta, tb, tc;
  for (auto& t : a) ta.push_back(task_json(t));
  for (auto& t : b) tb.push_back(task_json(t));
  for (auto& t : c) tc.push_back(task_json(t));
  CHECK(ta == tb);
  CHECK(ta != tc);

  std::map<std::string, int> per;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& t = a[i];
    CHECK(t.index == i + 1);
    ++per[stratum_name(t.mode, t.layer)];
    CHECK(seen.insert({stratum_name(t.mode, t.layer), t.clause_id + "|" + t.fact_text}).second);
    if (t.mode == JudgmentMode::Video) {
      CHECK(frames.clips.count(t.clause_id));
      CHECK(t.caption.empty());
    } else {
      CHECK(t.caption == ds.find(t.clause_id)->via_caption);
    }
  }
  CHECK(a.front().task_id == "t0001");
  CHECK(per["caption/conceptual"] == 12);
  CHECK(per["caption/contextual"] == 8);
  CHECK(per["video/conceptual"] == 6);
}

TEST_CASE("build_tasks reports achievable counts on shortage") {
  auto ds = predicted_fixture();
  auto frames = some_frames(ds, 1);  // clip 1: 4 positives + 1 negative conceptual
  TaskSpec spec;
  spec.counts[{JudgmentMode::Video, Layer::Conceptual}] = 9;
  spec.counts[{JudgmentMode::Caption, Layer::Conceptual}] = 5;
  try {
    build_tasks(ds, spec, 1, frames);
    FAIL("expected shortage");
  } catch (const TaskShortage& e) {
    CHECK(e.available().size() == 1);
    CHECK(e.available().at("video/conceptual") == 5);
  }
}

TEST_CASE("tasks survive a save/load round trip") {
  auto ds = predicted_fixture();
  TaskSpec spec;
  spec.counts[{JudgmentMode::Caption, Layer::Contextual}] = 5;
  spec.counts[{JudgmentMode::Video, Layer::Contextual}] = 3;
  auto tasks = build_tasks(ds, spec, 9, some_frames(ds, 3));
  auto dir = testutil::scratch_dir("tasks_roundtrip");
  save_tasks(tasks, dir / "tasks.json");
  auto back = load_tasks(dir / "tasks.json");
  REQUIRE(back.size() == tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    CHECK(task_json(back[i]) == task_json(tasks[i]));
    CHECK(back[i].fact == tasks[i].fact);
  }
  CHECK(task_set_hash(back) == task_set_hash(tasks));
}

TEST_CASE("store hands out tasks in order and enforces the quota") {
  auto dir = testutil::scratch_dir("store_quota");
  AnnotationStore store(synthetic_tasks(3), dir / "journal.jsonl", fixed_clock(2));
  auto a = store.open_session("alice");
  auto b = store.open_session("bob");
  auto c = store.open_session("carol");
  CHECK(store.open_session("alice") == "alice");
  auto anon = store.open_session();
  CHECK(store.known(anon));

  CHECK(store.next_task(a)->task_id == "t1001");
  store.submit("t1001", a, "Correct");
  CHECK(store.next_task(a)->task_id == "t1002");
  CHECK(store.next_task(b)->task_id == "t1001");
  store.submit("t1001", b, "Hallucination");
  // t1001 now has two annotators, so carol skips it.
  CHECK(store.next_task(c)->task_id == "t1002");
  store.submit("t1002", a, "Saliency");
  store.submit("t1003", a, "Correct");
  CHECK_FALSE(store.next_task(a).has_value());

  auto p = store.progress();
  CHECK(p.tasks == 3);
  CHECK(p.complete_tasks == 1);
  CHECK(p.judgments == 4);
}

TEST_CASE("submit rejects bad requests with the right status") {
  auto dir = testutil::scratch_dir("store_errors");
  AnnotationStore store(synthetic_tasks(2), dir / "journal.jsonl", fixed_clock());
  auto a = store.open_session("alice");
  CHECK(status_of([&] { store.submit("t1001", "mallory", "Correct"); }) == 401);
  CHECK(status_of([&] { store.next_task("mallory"); }) == 401);
  CHECK(status_of([&] { store.submit("t9999", a, "Correct"); }) == 404);
  CHECK(status_of([&] { store.submit("t1001", a, "Saliency"); }) == 422);  // caption mode
  CHECK(status_of([&] { store.submit("t1001", a, "correct"); }) == 422);
  CHECK(status_of([&] { store.submit("t1002", a, "Saliency"); }) == 0);    // video mode
  CHECK(status_of([&] { store.open_session("has space"); }) == 400);
  CHECK(store.history().size() == 1);
}

TEST_CASE("a resubmission supersedes for export but stays in history") {
  auto dir = testutil::scratch_dir("store_supersede");
  AnnotationStore store(synthetic_tasks(2), dir / "journal.jsonl", fixed_clock());
  store.open_session("alice");
  store.submit("t1001", "alice", "Correct");
  store.submit("t1001", "alice", "Hallucination");
  auto r = store.export_results();
  CHECK(r.effective == 1);
  CHECK(r.rows[0].correct == 0);
  CHECK(r.rows[0].hallucination == 1);
  CHECK(store.history().size() == 2);
}

TEST_CASE("reopening replays the journal; torn tails are cut, corrupt middles are not") {
  auto dir = testutil::scratch_dir("store_replay");
  auto journal = dir / "journal.jsonl";
  auto tasks = synthetic_tasks(4);
  std::string before;
  {
    AnnotationStore store(tasks, journal, fixed_clock());
    store.open_session("alice");
    store.open_session("bob");
    store.submit("t1001", "alice", "Correct");
    store.submit("t1002", "bob", "Saliency");
    before = export_json(store.export_results());
  }
  {
    std::ofstream out(journal, std::ios::app);
    out << R"({"type":"judgment","seq":9,"task_)";
  }
  {
    AnnotationStore store(tasks, journal, fixed_clock());
    CHECK(store.recovered_torn_tail());
    CHECK(export_json(store.export_results()) == before);
    CHECK(store.history().size() == 2);
    store.submit("t1003", "alice", "Correct");
    CHECK(store.history().back().seq == 3);
  }
  {
    AnnotationStore store(tasks, journal, fixed_clock());
    CHECK_FALSE(store.recovered_torn_tail());
    CHECK(store.history().size() == 3);
  }

  // A different task set refuses the journal.
  CHECK_THROWS_AS(AnnotationStore(synthetic_tasks(5), journal, fixed_clock()), PreconditionError);

  std::ifstream in(journal);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  in.close();
  lines.insert(lines.begin() + 2, "{not json");
  {
    std::ofstream out(journal, std::ios::trunc);
    for (auto& l : lines) out << l << "\n";
  }
  CHECK_THROWS_AS(AnnotationStore(tasks, journal, fixed_clock()), FormatError);
}

TEST_CASE("compact keeps every record") {
  auto dir = testutil::scratch_dir("store_compact");
  auto journal = dir / "journal.jsonl";
  auto tasks = synthetic_tasks(4);
  AnnotationStore store(tasks, journal, fixed_clock());
  store.open_session("alice");
  store.open_session("idle");
  store.submit("t1001", "alice", "Correct");
  store.submit("t1001", "alice", "Hallucination");
  store.compact();
  store.submit("t1002", "alice", "Correct");
  AnnotationStore reopened(tasks, journal, fixed_clock());
  CHECK(reopened.history().size() == 3);
  CHECK(reopened.known("idle"));
  CHECK(export_json(reopened.export_results()) == export_json(store.export_results()));
}

TEST_CASE("every acknowledged judgment survives SIGKILL") {
  auto dir = testutil::scratch_dir("store_kill");
  auto journal = dir / "journal.jsonl";
  auto tasks = synthetic_tasks(400);
  { AnnotationStore init(tasks, journal, fixed_clock(0)); init.open_session("k"); }

  int fds[2];
  REQUIRE(::pipe(fds) == 0);
  pid_t pid = ::fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    ::close(fds[0]);
    try {
      AnnotationStore store(tasks, journal, fixed_clock(0));
      for (const auto& t : tasks) {
        auto j = store.submit(t.task_id, "k", "Correct");
        std::uint64_t seq = j.seq;
        if (::write(fds[1], &seq, sizeof seq) != sizeof seq) ::_exit(3);
      }
    } catch (...) {
      ::_exit(2);
    }
    ::pause();
    ::_exit(0);
  }
  ::close(fds[1]);
  std::vector<std::uint64_t> acked;
  std::uint64_t seq;
  while (acked.size() < 57 && ::read(fds[0], &seq, sizeof seq) == sizeof seq) acked.push_back(seq);
  ::kill(pid, SIGKILL);
  while (::read(fds[0], &seq, sizeof seq) == sizeof seq) acked.push_back(seq);
  ::close(fds[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  CHECK(WIFSIGNALED(status));
  REQUIRE(acked.size() >= 57);

  AnnotationStore store(tasks, journal, fixed_clock(0));
  std::set<std::uint64_t> present;
  for (const auto& j : store.history()) present.insert(j.seq);
  for (auto s : acked) CHECK(present.count(s));
  CHECK(present.size() >= acked.size());
}

TEST_CASE("export tallies a hand-labeled batch of 20 judgments") {
  auto dir = testutil::scratch_dir("store_tally");
  auto tasks = synthetic_tasks(10);  // odd indices are video mode
  AnnotationStore store(tasks, dir / "journal.jsonl", fixed_clock());
  store.open_session("alice");
  store.open_session("bob");
  // task:        1  2  3  4  5  6  7  8  9  10
  // mode/layer: CC VC CX VX CC VC CX VX CC VC   (C=caption V=video, C=con X=ctx)
  const std::vector<std::string> alice = {"Correct", "Correct", "Hallucination", "Saliency", "Correct",
                                          "Hallucination", "Correct", "Correct", "Hallucination", "Saliency"};
  const std::vector<std::string> bob = {"Correct", "Saliency", "Hallucination", "Saliency", "Hallucination",
                                        "Hallucination", "Correct", "Hallucination", "Hallucination", "Saliency"};
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    store.submit(tasks[i].task_id, "alice", alice[i]);
    store.submit(tasks[i].task_id, "bob", bob[i]);
  }
  auto r = store.export_results();
  REQUIRE(r.rows.size() == 4);
  // Caption-Con: tasks 1,5,9 -> C C H | C H H
  CHECK(r.rows[0].correct == 3);
  CHECK(r.rows[0].hallucination == 3);
  CHECK(r.rows[0].share(HumanLabel::Saliency).percent() == "--");
  CHECK(r.rows[0].share(HumanLabel::Correct).percent() == "50.00");
  // Caption-Ctx: tasks 3,7 -> H C | H C
  CHECK(r.rows[1].correct == 2);
  CHECK(r.rows[1].hallucination == 2);
  // Video-Con: tasks 2,6,10 -> C H S | S H S
  CHECK(r.rows[2].correct == 1);
  CHECK(r.rows[2].hallucination == 2);
  CHECK(r.rows[2].saliency == 3);
  CHECK(r.rows[2].share(HumanLabel::Correct).percent() == "16.67");
  // Video-Ctx: tasks 4,8 -> S C | S H
  CHECK(r.rows[3].correct == 1);
  CHECK(r.rows[3].hallucination == 1);
  CHECK(r.rows[3].saliency == 2);
  CHECK(r.effective == 20);

  REQUIRE(r.pairs.size() == 1);
  CHECK(r.pairs[0].labels.a == alice);
  CHECK(r.pairs[0].labels.b == bob);
  REQUIRE(r.pairs[0].kappa.has_value());
  CHECK(*r.pairs[0].kappa == doctest::Approx(oracle::kappa(alice, bob)).epsilon(1e-12));

  // caption/conceptual: task 1 is v0, task 5 is v1, task 9 is v2.
  CHECK(r.human_scores["caption/conceptual"]["v0"] == doctest::Approx(1.0));
  CHECK(r.human_scores["caption/conceptual"]["v1"] == doctest::Approx(0.5));
  CHECK(r.human_scores["caption/conceptual"]["v2"] == doctest::Approx(0.0));
}

TEST_CASE("export does not depend on submission order") {
  auto tasks = synthetic_tasks(24);
  std::vector<std::tuple<std::string, std::string, std::string>> subs;
  SeededRng rng(5);
  for (const auto& t : tasks)
    for (const char* a : {"a1", "a2", "a3"}) {
      auto labels = legal_labels(t.mode);
      subs.emplace_back(t.task_id, a, std::string(to_string(labels[rng.below(labels.size())])));
    }
  std::string reference;
  for (int trial = 0; trial < 5; ++trial) {
    auto dir = testutil::scratch_dir("store_perm_" + std::to_string(trial));
    AnnotationStore store(tasks, dir / "journal.jsonl", fixed_clock(0));
    for (const char* a : {"a3", "a1", "a2"}) store.open_session(a);
    SeededRng order(100 + static_cast<std::uint64_t>(trial));
    auto shuffled = subs;
    order.shuffle(shuffled);
    for (auto& [t, a, l] : shuffled) store.submit(t, a, l);
    auto out = export_json(store.export_results());
    if (trial == 0) reference = out;
    CHECK(out == reference);
  }
}

TEST_CASE("per-setting shares sum to 100 and reproduce the published distribution") {
  // Integer counts whose shares round to the published study table.
  struct Row {
    JudgmentMode mode;
    Layer layer;
    std::int64_t c, h, s;
    const char *pc, *ph, *ps;
  };
  const std::vector<Row> rows = {
      {JudgmentMode::Caption, Layer::Conceptual, 79, 94, 0, "45.66", "54.34", "--"},
      {JudgmentMode::Caption, Layer::Contextual, 25, 91, 0, "21.55", "78.45", "--"},
      {JudgmentMode::Video, Layer::Conceptual, 145, 14, 13, "84.30", "8.14", "7.56"},
      {JudgmentMode::Video, Layer::Contextual, 70, 25, 21, "60.34", "21.55", "18.10"},
  };
  for (const auto& r : rows) {
    DistributionRow d{r.mode, r.layer, r.c, r.h, r.s};
    CHECK(d.share(HumanLabel::Correct).percent() == r.pc);
    CHECK(d.share(HumanLabel::Hallucination).percent() == r.ph);
    CHECK(d.share(HumanLabel::Saliency).percent() == r.ps);
    std::int64_t sum = percent_hundredths(d.correct, d.total()) + percent_hundredths(d.hallucination, d.total()) +
                       (r.mode == JudgmentMode::Video ? percent_hundredths(d.saliency, d.total()) : 0);
    CHECK(std::abs(sum - 10000) <= 2);
  }

  // Random batches: shares always sum to 100 within rounding.
  SeededRng rng(77);
  for (int i = 0; i < 200; ++i) {
    DistributionRow d{JudgmentMode::Video, Layer::Conceptual, static_cast<std::int64_t>(rng.below(500)),
                      static_cast<std::int64_t>(rng.below(500)), static_cast<std::int64_t>(rng.below(500)) + 1};
    std::int64_t sum = percent_hundredths(d.correct, d.total()) + percent_hundredths(d.hallucination, d.total()) +
                       percent_hundredths(d.saliency, d.total());
    CHECK(std::abs(sum - 10000) <= 2);
  }
}

TEST_CASE("HTTP endpoints drive a full annotation session") {
  auto dir = testutil::scratch_dir("http_session");
  auto tasks = synthetic_tasks(4);
  {
    std::ofstream f(dir / "f1.jpg", std::ios::binary);
    f << "JPEGDATA";
    std::ofstream g(dir / "secret.txt");
    g << "nope";
  }
  AnnotationStore store(tasks, dir / "journal.jsonl", fixed_clock(1));
  ServerOptions opts;
  opts.frames_dir = dir;
  opts.frames.clips["c1"] = {"f1.jpg"};
  AnnotationServer server(store, opts);
  int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread th([&] { server.listen(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto session = cli.Post("/api/session", R"({"annotator":"alice"})", "application/json");
  REQUIRE(session);
  CHECK(session->status == 200);
  CHECK(json::parse(session->body)["annotator"] == "alice");

  CHECK(cli.Get("/api/tasks/next")->status == 400);
  CHECK(cli.Get("/api/tasks/next?annotator=mallory")->status == 401);

  auto next = cli.Get("/api/tasks/next?annotator=alice");
  REQUIRE(next);
  auto task = json::parse(next->body);
  CHECK(task["task_id"] == "t1001");
  CHECK(task["mode"] == "caption");
  CHECK(task["labels"] == json::array({"Correct", "Hallucination"}));
  CHECK(task["done"] == false);

  auto post = [&](const std::string& id, const std::string& label) {
    json body = {{"task_id", id}, {"annotator", "alice"}, {"label", label}};
    return cli.Post("/api/judgments", body.dump(), "application/json")->status;
  };
  CHECK(post("t1001", "Saliency") == 422);
  CHECK(post("t1001", "Correct") == 201);
  CHECK(post("t9999", "Correct") == 404);
  CHECK(cli.Post("/api/judgments", "{bad", "application/json")->status == 400);

  task = json::parse(cli.Get("/api/tasks/next?annotator=alice")->body);
  CHECK(task["task_id"] == "t1002");
  CHECK(task["mode"] == "video");
  CHECK(task["frame_urls"] == json::array({"/frames/f1.jpg"}));
  CHECK(post("t1002", "Saliency") == 201);

  auto frame = cli.Get("/frames/f1.jpg");
  CHECK(frame->status == 200);
  CHECK(frame->body == "JPEGDATA");
  CHECK(cli.Get("/frames/secret.txt")->status == 404);
  CHECK(cli.Get("/frames/..%2Fjournal.jsonl")->status == 404);

  CHECK(post("t1003", "Hallucination") == 201);
  CHECK(post("t1004", "Correct") == 201);
  CHECK(json::parse(cli.Get("/api/tasks/next?annotator=alice")->body)["done"] == true);

  auto progress = json::parse(cli.Get("/api/progress")->body);
  CHECK(progress["tasks"] == 4);
  CHECK(progress["complete_tasks"] == 4);
  CHECK(progress["judgments"] == 4);

  auto exported = json::parse(cli.Get("/api/export")->body);
  CHECK(exported["rows"][0]["setting"] == "Caption-Con");
  CHECK(exported["rows"][0]["percent"]["Correct"] == "100.00");
  CHECK(exported["rows"][0]["percent"]["Saliency"] == "--");
  CHECK(exported["rows"][2]["counts"]["Saliency"] == 1);

  server.stop();
  th.join();
}
