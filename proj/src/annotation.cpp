#include "dualfact/annotation.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "dualfact/rng.hpp"
#include "dualfact/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dualfact {

using nlohmann::json;

std::string_view to_string(JudgmentMode m) { return m == JudgmentMode::Caption ? "caption" : "video"; }

JudgmentMode parse_judgment_mode(std::string_view s) {
  if (s == "caption") return JudgmentMode::Caption;
  if (s == "video") return JudgmentMode::Video;
  throw FormatError("unknown judgment mode '" + std::string(s) + "'");
}

std::string_view to_string(HumanLabel l) {
  switch (l) {
    case HumanLabel::Correct: return "Correct";
    case HumanLabel::Hallucination: return "Hallucination";
    case HumanLabel::Saliency: return "Saliency";
  }
  return "";
}

std::optional<HumanLabel> parse_human_label(std::string_view s) {
  for (auto l : {HumanLabel::Correct, HumanLabel::Hallucination, HumanLabel::Saliency})
    if (s == to_string(l)) return l;
  return std::nullopt;
}

std::vector<HumanLabel> legal_labels(JudgmentMode m) {
  if (m == JudgmentMode::Caption) return {HumanLabel::Correct, HumanLabel::Hallucination};
  return {HumanLabel::Correct, HumanLabel::Hallucination, HumanLabel::Saliency};
}

std::string stratum_name(JudgmentMode m, Layer l) {
  return std::string(to_string(m)) + "/" + std::string(to_string(l));
}

namespace {

std::pair<JudgmentMode, Layer> parse_stratum(const std::string& s) {
  auto slash = s.find('/');
  if (slash == std::string::npos) throw FormatError("bad stratum '" + s + "', expected mode/layer");
  return {parse_judgment_mode(s.substr(0, slash)), parse_layer(s.substr(slash + 1))};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

bool safe_frame_id(const std::string& id) {
  if (id.empty() || id.size() > 200) return false;
  if (id.find("..") != std::string::npos) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

FrameManifest FrameManifest::load(const std::filesystem::path& path) {
  json j = read_json(path);
  FrameManifest m;
  if (!j.contains("clips") || !j["clips"].is_object()) throw FormatError(path.string() + ": missing \"clips\" object");
  for (auto& [clause, frames] : j["clips"].items()) {
    auto& v = m.clips[clause];
    for (auto& f : frames) {
      auto id = f.get<std::string>();
      if (!safe_frame_id(id)) throw FormatError(path.string() + ": bad frame id '" + id + "'");
      v.push_back(id);
    }
  }
  return m;
}

bool FrameManifest::lists(const std::string& frame_id) const {
  for (const auto& [clause, frames] : clips)
    if (std::find(frames.begin(), frames.end(), frame_id) != frames.end()) return true;
  return false;
}

TaskSpec TaskSpec::load(const std::filesystem::path& path) {
  json j = read_json(path);
  TaskSpec spec;
  for (auto& [key, value] : j.items()) {
    if (key == "caption_source") {
      auto v = value.get<std::string>();
      if (v == "via") spec.caption = CaptionEvidence::Via;
      else if (v == "gold") spec.caption = CaptionEvidence::Gold;
      else throw FormatError("caption_source must be via or gold");
      continue;
    }
    if (!value.is_number_unsigned()) throw FormatError("count for " + key + " must be a non-negative integer");
    spec.counts[parse_stratum(key)] = value.get<std::size_t>();
  }
  return spec;
}

std::vector<JudgmentTask> build_tasks(const Dataset& dataset, const TaskSpec& spec, std::uint64_t seed,
                                      const FrameManifest& frames, const RoleLabels& labels) {
  std::vector<JudgmentTask> chosen;
  std::map<std::string, std::size_t> short_strata;
  std::string shortage;
  std::vector<std::vector<JudgmentTask>> pools;

  for (const auto& [key, count] : spec.counts) {
    auto [mode, layer] = key;
    std::vector<JudgmentTask> pool;
    for (const auto& c : dataset.clauses) {
      const auto& b = c.bundle(layer);
      if (!b.predicted) continue;
      auto clip = frames.clips.find(c.clause_id);
      if (mode == JudgmentMode::Video && (clip == frames.clips.end() || clip->second.empty())) continue;
      for (const auto& f : *b.predicted) {
        JudgmentTask t;
        t.clause_id = c.clause_id;
        t.video_id = c.video_id;
        t.layer = layer;
        t.mode = mode;
        t.fact = f;
        t.fact_text = render(f, labels);
        if (mode == JudgmentMode::Caption)
          t.caption = spec.caption == CaptionEvidence::Via ? c.via_caption : c.caption;
        else
          t.frames = clip->second;
        pool.push_back(std::move(t));
      }
    }
    if (pool.size() < count) {
      auto name = stratum_name(mode, layer);
      short_strata[name] = pool.size();
      shortage += " " + name + ": requested " + std::to_string(count) + ", available " + std::to_string(pool.size()) + ";";
    }
    SeededRng rng(text::fnv1a(stratum_name(mode, layer), seed));
    rng.shuffle(pool);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(std::min(count, pool.size())), pool.end());
    pools.push_back(std::move(pool));
  }
  if (!short_strata.empty()) throw TaskShortage("not enough predicted facts:" + shortage, short_strata);

  for (auto& p : pools)
    for (auto& t : p) chosen.push_back(std::move(t));
  SeededRng rng(seed);
  rng.shuffle(chosen);
  const std::size_t width = std::max<std::size_t>(4, std::to_string(chosen.size()).size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    chosen[i].index = i + 1;
    auto n = std::to_string(i + 1);
    chosen[i].task_id = "t" + std::string(width - n.size(), '0') + n;
  }
  return chosen;
}

namespace {

json task_to_json(const JudgmentTask& t) {
  json j = {{"task_id", t.task_id}, {"index", t.index}, {"clause_id", t.clause_id},
            {"video_id", t.video_id}, {"mode", to_string(t.mode)}, {"layer", to_string(t.layer)},
            {"fact_text", t.fact_text}};
  if (t.mode == JudgmentMode::Caption) j["caption"] = t.caption;
  else j["frames"] = t.frames;
  json labels = json::array();
  for (auto l : legal_labels(t.mode)) labels.push_back(to_string(l));
  j["labels"] = labels;
  return j;
}

}  // namespace

std::string task_json(const JudgmentTask& task) { return task_to_json(task).dump(); }

std::string task_set_hash(const std::vector<JudgmentTask>& tasks) {
  std::uint64_t h = text::fnv1a("");
  for (const auto& t : tasks) {
    h = text::fnv1a(t.task_id, h);
    h = text::fnv1a(std::string(to_string(t.mode)) + "|" + std::string(to_string(t.layer)) + "|" + t.fact_text, h);
  }
  return text::hex64(h);
}

void save_tasks(const std::vector<JudgmentTask>& tasks, const std::filesystem::path& path) {
  json arr = json::array();
  for (const auto& t : tasks) arr.push_back(task_to_json(t));
  std::ofstream out(path);
  if (!out) throw PreconditionError("cannot write " + path.string());
  out << json{{"tasks", arr}}.dump(2) << "\n";
}

std::vector<JudgmentTask> load_tasks(const std::filesystem::path& path) {
  json j = read_json(path);
  std::vector<JudgmentTask> tasks;
  try {
    for (const auto& e : j.at("tasks")) {
      JudgmentTask t;
      t.task_id = e.at("task_id").get<std::string>();
      t.index = e.at("index").get<std::size_t>();
      t.clause_id = e.at("clause_id").get<std::string>();
      t.video_id = e.at("video_id").get<std::string>();
      t.mode = parse_judgment_mode(e.at("mode").get<std::string>());
      t.layer = parse_layer(e.at("layer").get<std::string>());
      t.fact_text = e.at("fact_text").get<std::string>();
      t.fact = parse_fact(t.fact_text, t.layer);
      if (e.contains("caption")) t.caption = e["caption"].get<std::string>();
      if (e.contains("frames")) t.frames = e["frames"].get<std::vector<std::string>>();
      tasks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return tasks;
}

Ratio DistributionRow::share(HumanLabel l) const {
  if (l == HumanLabel::Saliency && mode == JudgmentMode::Caption) return {0, 0};
  std::int64_t n = l == HumanLabel::Correct ? correct : l == HumanLabel::Hallucination ? hallucination : saliency;
  return {n, total()};
}

std::string export_json(const ExportResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json counts = {{"Correct", row.correct}, {"Hallucination", row.hallucination}};
    json pct = {{"Correct", row.share(HumanLabel::Correct).percent()},
                {"Hallucination", row.share(HumanLabel::Hallucination).percent()},
                {"Saliency", row.share(HumanLabel::Saliency).percent()}};
    if (row.mode == JudgmentMode::Video) counts["Saliency"] = row.saliency;
    rows.push_back({{"setting", std::string(row.mode == JudgmentMode::Caption ? "Caption" : "Video") + "-" +
                                    (row.layer == Layer::Conceptual ? "Con" : "Ctx")},
                    {"mode", to_string(row.mode)},
                    {"layer", to_string(row.layer)},
                    {"total", row.total()},
                    {"counts", counts},
                    {"percent", pct}});
  }
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"a", p.a}, {"b", p.b}, {"items", p.labels.a.size()},
                     {"labels_a", p.labels.a}, {"labels_b", p.labels.b},
                     {"kappa", p.kappa ? json(*p.kappa) : json(nullptr)}});
  }
  json scores = json::object();
  for (const auto& [stratum, videos] : r.human_scores) scores[stratum] = videos;
  return json{{"rows", rows}, {"pairs", pairs}, {"human_scores", scores}, {"effective_judgments", r.effective}}
      .dump(2);
}

std::map<std::string, std::map<std::string, double>> load_human_scores(const std::filesystem::path& path) {
  json j = read_json(path);
  if (!j.contains("human_scores")) throw FormatError(path.string() + ": missing \"human_scores\"");
  return j["human_scores"].get<std::map<std::string, std::map<std::string, double>>>();
}

// ---- store ----

struct AnnotationStore::State {
  std::set<std::string> annotators;
  std::vector<std::map<std::string, Judgment>> by_task;  // annotator -> latest judgment
  std::vector<Judgment> history;
  std::uint64_t next_seq = 1;
};

namespace {

std::string judgment_line(const Judgment& j) {
  return json{{"type", "judgment"}, {"seq", j.seq}, {"task_id", j.task_id}, {"annotator", j.annotator},
              {"label", to_string(j.label)}, {"ts", j.timestamp_ms}}
             .dump() +
         "\n";
}

std::string session_line(const std::string& annotator, std::int64_t ts) {
  return json{{"type", "session"}, {"annotator", annotator}, {"ts", ts}}.dump() + "\n";
}

std::string header_line(const std::vector<JudgmentTask>& tasks) {
  return json{{"type", "header"}, {"tasks", tasks.size()}, {"task_set", task_set_hash(tasks)}}.dump() + "\n";
}

bool valid_annotator_id(const std::string& id) {
  static const std::regex re("[A-Za-z0-9_.-]{1,64}");
  return std::regex_match(id, re);
}

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("write " + path.string() + ": " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) throw Error("fsync " + path.string() + ": " + std::strerror(errno));
}

}  // namespace

AnnotationStore::AnnotationStore(std::vector<JudgmentTask> tasks, std::filesystem::path journal,
                                 StoreOptions options)
    : tasks_(std::move(tasks)), journal_(std::move(journal)), options_(std::move(options)),
      state_(std::make_unique<State>()) {
  if (!options_.clock) options_.clock = system_clock_ms;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!task_index_.emplace(tasks_[i].task_id, i).second)
      throw PreconditionError("duplicate task id " + tasks_[i].task_id);
  }
  state_->by_task.resize(tasks_.size());
  replay();
  fd_ = ::open(journal_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw PreconditionError("cannot open journal " + journal_.string() + ": " + std::strerror(errno));
  struct stat st{};
  if (::fstat(fd_, &st) == 0 && st.st_size == 0) write_all(fd_, header_line(tasks_), journal_);
}

AnnotationStore::~AnnotationStore() {
  if (fd_ >= 0) ::close(fd_);
}

void AnnotationStore::replay() {
  std::ifstream in(journal_, std::ios::binary);
  if (!in) return;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t pos = 0, line_no = 0;
  while (pos < data.size()) {
    auto nl = data.find('\n', pos);
    if (nl == std::string::npos) {
      // Torn final write: drop it so later appends start on a clean line.
      torn_tail_ = true;
      std::filesystem::resize_file(journal_, pos);
      break;
    }
    ++line_no;
    std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    auto where = journal_.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw FormatError(where + ": unreadable journal record");
    }
    auto type = j.value("type", "");
    if (type == "header") {
      if (j.value("task_set", "") != task_set_hash(tasks_))
        throw PreconditionError(journal_.string() + " was written for a different task set");
    } else if (type == "session") {
      state_->annotators.insert(j.at("annotator").get<std::string>());
    } else if (type == "judgment") {
      Judgment jd;
      try {
        jd.seq = j.at("seq").get<std::uint64_t>();
        jd.task_id = j.at("task_id").get<std::string>();
        jd.annotator = j.at("annotator").get<std::string>();
        auto label = parse_human_label(j.at("label").get<std::string>());
        if (!label) throw FormatError(where + ": unknown label");
        jd.label = *label;
        jd.timestamp_ms = j.at("ts").get<std::int64_t>();
      } catch (const json::exception& e) {
        throw FormatError(where + ": " + e.what());
      }
      if (!task_index_.count(jd.task_id)) throw FormatError(where + ": unknown task " + jd.task_id);
      state_->annotators.insert(jd.annotator);
      apply(jd);
    } else {
      throw FormatError(where + ": unknown record type");
    }
  }
}

void AnnotationStore::apply(const Judgment& j) {
  state_->by_task[task_index_.at(j.task_id)][j.annotator] = j;
  state_->history.push_back(j);
  state_->next_seq = std::max(state_->next_seq, j.seq + 1);
}

void AnnotationStore::append(const std::string& line) { write_all(fd_, line, journal_); }

std::string AnnotationStore::open_session(const std::optional<std::string>& requested) {
  std::lock_guard wl(write_mu_);
  std::string id;
  if (requested && !requested->empty()) {
    if (!valid_annotator_id(*requested)) throw RequestError(400, "annotator ids use [A-Za-z0-9_.-], at most 64 chars");
    id = *requested;
    if (state_->annotators.count(id)) return id;
  } else {
    std::random_device rd;
    do {
      id = "a" + text::hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd()).substr(0, 10);
    } while (state_->annotators.count(id));
  }
  append(session_line(id, options_.clock()));
  std::unique_lock sl(state_mu_);
  state_->annotators.insert(id);
  return id;
}

bool AnnotationStore::known(const std::string& annotator) const {
  std::shared_lock sl(state_mu_);
  return state_->annotators.count(annotator) > 0;
}

std::optional<JudgmentTask> AnnotationStore::next_task(const std::string& annotator) const {
  std::shared_lock sl(state_mu_);
  if (!state_->annotators.count(annotator)) throw RequestError(401, "unknown annotator " + annotator);
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const auto& judged = state_->by_task[i];
    if (judged.count(annotator)) continue;
    if (options_.quota != 0 && judged.size() >= options_.quota) continue;
    return tasks_[i];
  }
  return std::nullopt;
}

Judgment AnnotationStore::submit(const std::string& task_id, const std::string& annotator, const std::string& label) {
  std::lock_guard wl(write_mu_);
  if (!state_->annotators.count(annotator)) throw RequestError(401, "unknown annotator " + annotator);
  auto it = task_index_.find(task_id);
  if (it == task_index_.end()) throw RequestError(404, "unknown task " + task_id);
  const auto& task = tasks_[it->second];
  auto parsed = parse_human_label(label);
  if (!parsed) throw RequestError(422, "unknown label '" + label + "'");
  auto legal = legal_labels(task.mode);
  if (std::find(legal.begin(), legal.end(), *parsed) == legal.end())
    throw RequestError(422, "label " + label + " is not offered in " + std::string(to_string(task.mode)) + " mode");

  Judgment j;
  j.seq = state_->next_seq;
  j.task_id = task_id;
  j.annotator = annotator;
  j.label = *parsed;
  j.timestamp_ms = options_.clock();
  append(judgment_line(j));
  std::unique_lock sl(state_mu_);
  apply(j);
  return j;
}

std::vector<Judgment> AnnotationStore::history() const {
  std::shared_lock sl(state_mu_);
  return state_->history;
}

Progress AnnotationStore::progress() const {
  std::shared_lock sl(state_mu_);
  Progress p;
  p.tasks = tasks_.size();
  p.quota = options_.quota;
  p.judgments = state_->history.size();
  for (const auto& judged : state_->by_task)
    if (options_.quota != 0 && judged.size() >= options_.quota) ++p.complete_tasks;
  for (const auto& a : state_->annotators) {
    AnnotatorProgress ap{a, 0, 0};
    for (const auto& judged : state_->by_task) {
      if (judged.count(a)) ++ap.judged;
      else if (options_.quota == 0 || judged.size() < options_.quota) ++ap.available;
    }
    p.annotators.push_back(ap);
  }
  return p;
}

ExportResult AnnotationStore::export_results() const {
  std::shared_lock sl(state_mu_);
  ExportResult r;
  for (auto m : {JudgmentMode::Caption, JudgmentMode::Video})
    for (auto l : {Layer::Conceptual, Layer::Contextual}) r.rows.push_back({m, l, 0, 0, 0});
  auto row_of = [&](const JudgmentTask& t) -> DistributionRow& {
    return r.rows[(t.mode == JudgmentMode::Video ? 2 : 0) + (t.layer == Layer::Contextual ? 1 : 0)];
  };

  std::map<std::string, std::map<std::string, std::pair<std::int64_t, std::int64_t>>> video_counts;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    const auto& t = tasks_[i];
    for (const auto& [annotator, j] : state_->by_task[i]) {
      auto& row = row_of(t);
      if (j.label == HumanLabel::Correct) ++row.correct;
      else if (j.label == HumanLabel::Hallucination) ++row.hallucination;
      else ++row.saliency;
      auto& vc = video_counts[stratum_name(t.mode, t.layer)][t.video_id];
      vc.first += j.label == HumanLabel::Correct ? 1 : 0;
      ++vc.second;
      ++r.effective;
    }
  }
  for (const auto& [stratum, videos] : video_counts)
    for (const auto& [video, c] : videos)
      r.human_scores[stratum][video] = static_cast<double>(c.first) / static_cast<double>(c.second);

  std::vector<std::string> names(state_->annotators.begin(), state_->annotators.end());
  for (std::size_t a = 0; a < names.size(); ++a) {
    for (std::size_t b = a + 1; b < names.size(); ++b) {
      AnnotatorPair pair{names[a], names[b], {}, std::nullopt};
      pair.labels.alphabet = {"Correct", "Hallucination", "Saliency"};
      for (const auto& judged : state_->by_task) {
        auto ia = judged.find(names[a]);
        auto ib = judged.find(names[b]);
        if (ia == judged.end() || ib == judged.end()) continue;
        pair.labels.a.emplace_back(to_string(ia->second.label));
        pair.labels.b.emplace_back(to_string(ib->second.label));
      }
      if (pair.labels.a.empty()) continue;
      try {
        pair.kappa = cohen_kappa(pair.labels);
      } catch (const Error&) {
      }
      r.pairs.push_back(std::move(pair));
    }
  }
  return r;
}

void AnnotationStore::compact() {
  std::lock_guard wl(write_mu_);
  std::string out = header_line(tasks_);
  {
    std::shared_lock sl(state_mu_);
    std::set<std::string> with_judgments;
    for (const auto& j : state_->history) with_judgments.insert(j.annotator);
    for (const auto& a : state_->annotators)
      if (!with_judgments.count(a)) out += session_line(a, 0);
    for (const auto& j : state_->history) out += judgment_line(j);
  }
  auto tmp = journal_;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error("cannot write " + tmp.string());
  try {
    write_all(fd, out, tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::filesystem::rename(tmp, journal_);
  ::close(fd_);
  fd_ = ::open(journal_.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd_ < 0) throw Error("cannot reopen journal " + journal_.string());
}

// ---- HTTP ----

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationStore& store, ServerOptions options)
    : store_(store), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Post("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> requested;
    if (!req.body.empty()) {
      auto body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "body must be a JSON object");
      if (body.contains("annotator")) {
        if (!body["annotator"].is_string()) return send_error(res, 400, "annotator must be a string");
        requested = body["annotator"].get<std::string>();
      }
    }
    try {
      send_json(res, 200, {{"annotator", store_.open_session(requested)}});
    } catch (const RequestError& e) {
      send_error(res, e.status(), e.what());
    }
  });

  srv.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("annotator")) return send_error(res, 400, "missing annotator parameter");
    try {
      auto task = store_.next_task(req.get_param_value("annotator"));
      if (!task) return send_json(res, 200, {{"done", true}});
      json j = json::parse(task_json(*task));
      j["done"] = false;
      j["total"] = store_.tasks().size();
      if (task->mode == JudgmentMode::Video) {
        json urls = json::array();
        for (const auto& f : task->frames) urls.push_back("/frames/" + f);
        j["frame_urls"] = urls;
      }
      send_json(res, 200, j);
    } catch (const RequestError& e) {
      send_error(res, e.status(), e.what());
    }
  });

  srv.Post("/api/judgments", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "body must be a JSON object");
    for (const char* k : {"task_id", "annotator", "label"})
      if (!body.contains(k) || !body[k].is_string())
        return send_error(res, 400, std::string("missing string field ") + k);
    try {
      auto j = store_.submit(body["task_id"].get<std::string>(), body["annotator"].get<std::string>(),
                             body["label"].get<std::string>());
      send_json(res, 201, {{"seq", j.seq}, {"task_id", j.task_id}, {"annotator", j.annotator},
                           {"label", to_string(j.label)}});
    } catch (const RequestError& e) {
      send_error(res, e.status(), e.what());
    } catch (const Error& e) {
      send_error(res, 500, e.what());
    }
  });

  srv.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    auto p = store_.progress();
    json annotators = json::array();
    for (const auto& a : p.annotators)
      annotators.push_back({{"annotator", a.annotator}, {"judged", a.judged}, {"available", a.available}});
    send_json(res, 200, {{"tasks", p.tasks}, {"quota", p.quota}, {"complete_tasks", p.complete_tasks},
                         {"judgments", p.judgments}, {"annotators", annotators}});
  });

  srv.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(export_json(store_.export_results()), "application/json");
  });

  srv.Get(R"(/frames/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::string id = req.matches[1];
    if (!safe_frame_id(id) || !options_.frames.lists(id)) return send_error(res, 404, "unknown frame");
    auto path = options_.frames_dir / id;
    std::ifstream in(path, std::ios::binary);
    if (!in) return send_error(res, 404, "frame file missing");
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    res.set_content(data, content_type_for(path));
  });

  if (!options_.static_dir.empty()) {
    if (!srv.set_mount_point("/", options_.static_dir.string()))
      throw PreconditionError("static dir not found: " + options_.static_dir.string());
  }
}

AnnotationServer::~AnnotationServer() = default;

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) throw PreconditionError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationServer::listen() { server_->listen_after_bind(); }
void AnnotationServer::stop() { server_->stop(); }
void AnnotationServer::wait_until_ready() { server_->wait_until_ready(); }

}  // namespace dualfact
