#pragma once

// Human judgment collection for the user study: task building, a durable
// judgment store, and the HTTP service the annotation UI talks to.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dualfact/dataset.hpp"
#include "dualfact/ratio.hpp"
#include "dualfact/stats.hpp"
#include "dualfact/verification.hpp"

namespace httplib {
class Server;
}

namespace dualfact {

enum class JudgmentMode { Caption, Video };
std::string_view to_string(JudgmentMode m);  // "caption" | "video"
JudgmentMode parse_judgment_mode(std::string_view s);

enum class HumanLabel { Correct, Hallucination, Saliency };
std::string_view to_string(HumanLabel l);  // "Correct" | "Hallucination" | "Saliency"
std::optional<HumanLabel> parse_human_label(std::string_view s);
std::vector<HumanLabel> legal_labels(JudgmentMode m);

struct JudgmentTask {
  std::size_t index = 0;  // 1-based position
  std::string task_id;
  std::string clause_id;
  std::string video_id;
  Layer layer = Layer::Conceptual;
  JudgmentMode mode = JudgmentMode::Caption;
  std::string fact_text;
  std::optional<Fact> fact;
  std::string caption;              // caption mode
  std::vector<std::string> frames;  // video mode: frame ids
};

// Pre-extracted frame images per clause: {"clips": {"<clause_id>": ["f.jpg", ...]}}.
struct FrameManifest {
  std::map<std::string, std::vector<std::string>> clips;
  static FrameManifest load(const std::filesystem::path& path);
  bool lists(const std::string& frame_id) const;
};

// Requested task counts per (mode, layer) stratum. File form:
// {"caption/conceptual": 10, "video/contextual": 5, "caption_source": "via"}
struct TaskSpec {
  std::map<std::pair<JudgmentMode, Layer>, std::size_t> counts;
  CaptionEvidence caption = CaptionEvidence::Via;
  static TaskSpec load(const std::filesystem::path& path);
};

class TaskShortage : public PreconditionError {
 public:
  TaskShortage(std::string message, std::map<std::string, std::size_t> available)
      : PreconditionError(std::move(message)), available_(std::move(available)) {}
  // Stratum name ("video/conceptual") -> facts available, for short strata.
  const std::map<std::string, std::size_t>& available() const { return available_; }

 private:
  std::map<std::string, std::size_t> available_;
};

std::string stratum_name(JudgmentMode m, Layer l);

// Samples predicted facts per stratum with a seeded shuffle, then shuffles the
// union. Video-mode tasks only use clauses with frames in the manifest.
std::vector<JudgmentTask> build_tasks(const Dataset& dataset, const TaskSpec& spec, std::uint64_t seed,
                                      const FrameManifest& frames = {}, const RoleLabels& labels = {});

std::string task_json(const JudgmentTask& task);
// Fingerprint of task ids and texts; the journal header records it.
std::string task_set_hash(const std::vector<JudgmentTask>& tasks);
void save_tasks(const std::vector<JudgmentTask>& tasks, const std::filesystem::path& path);
std::vector<JudgmentTask> load_tasks(const std::filesystem::path& path);

struct Judgment {
  std::uint64_t seq = 0;
  std::string task_id;
  std::string annotator;
  HumanLabel label = HumanLabel::Correct;
  std::int64_t timestamp_ms = 0;
};

// A rejected request; `status` is the HTTP status the service answers with.
class RequestError : public Error {
 public:
  RequestError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct AnnotatorProgress {
  std::string annotator;
  std::size_t judged = 0;
  std::size_t available = 0;  // tasks next_task could still hand out
};

struct Progress {
  std::size_t tasks = 0;
  std::size_t quota = 0;
  std::size_t complete_tasks = 0;  // tasks with `quota` annotators
  std::size_t judgments = 0;       // history, including superseded
  std::vector<AnnotatorProgress> annotators;
};

struct DistributionRow {
  JudgmentMode mode = JudgmentMode::Caption;
  Layer layer = Layer::Conceptual;
  std::int64_t correct = 0;
  std::int64_t hallucination = 0;
  std::int64_t saliency = 0;
  std::int64_t total() const { return correct + hallucination + saliency; }
  // Saliency is undefined ("--") in caption mode.
  Ratio share(HumanLabel l) const;
};

struct AnnotatorPair {
  std::string a;
  std::string b;
  LabelPairs labels;
  std::optional<double> kappa;
};

struct ExportResult {
  std::vector<DistributionRow> rows;  // Caption-Con, Caption-Ctx, Video-Con, Video-Ctx
  std::vector<AnnotatorPair> pairs;
  // stratum -> video -> share of effective judgments labeled Correct
  std::map<std::string, std::map<std::string, double>> human_scores;
  std::size_t effective = 0;
};

std::string export_json(const ExportResult& result);
// Reads the "human_scores" block of an export file.
std::map<std::string, std::map<std::string, double>> load_human_scores(const std::filesystem::path& path);

struct StoreOptions {
  std::size_t quota = 2;  // annotators per task; 0 = unlimited
  std::function<std::int64_t()> clock;  // ms since epoch; default system clock
};

// Judgments are appended to a line-delimited journal and fsync'd before a
// submit returns. Reopening replays the journal; a torn final line is cut
// off. The journal starts with a header naming the task set it belongs to.
// Quota only steers assignment: a submit for a full task is still kept.
class AnnotationStore {
 public:
  AnnotationStore(std::vector<JudgmentTask> tasks, std::filesystem::path journal, StoreOptions options = {});
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  // Registers an annotator. A requested id is reused when already known.
  std::string open_session(const std::optional<std::string>& requested = std::nullopt);
  bool known(const std::string& annotator) const;

  // Lowest-index task the annotator has not judged and that still needs
  // annotators. Throws RequestError(401) for unknown annotators.
  std::optional<JudgmentTask> next_task(const std::string& annotator) const;

  // Throws RequestError: 401 unknown annotator, 404 unknown task, 422 for a
  // label that is unknown or illegal in the task's mode.
  Judgment submit(const std::string& task_id, const std::string& annotator, const std::string& label);

  Progress progress() const;
  ExportResult export_results() const;
  const std::vector<JudgmentTask>& tasks() const { return tasks_; }
  std::vector<Judgment> history() const;

  // Rewrites the journal from the replayed records (temp file + rename).
  void compact();
  bool recovered_torn_tail() const { return torn_tail_; }

 private:
  struct State;
  void append(const std::string& line);
  void replay();
  void apply(const Judgment& j);

  std::vector<JudgmentTask> tasks_;
  std::map<std::string, std::size_t> task_index_;
  std::filesystem::path journal_;
  StoreOptions options_;
  int fd_ = -1;
  bool torn_tail_ = false;
  std::unique_ptr<State> state_;
  mutable std::shared_mutex state_mu_;  // readers vs. apply
  mutable std::mutex write_mu_;         // one writer at a time
};

struct ServerOptions {
  std::filesystem::path frames_dir;
  FrameManifest frames;
  std::filesystem::path static_dir;  // optional UI assets mounted at "/"
};

// GET /api/tasks/next?annotator=, POST /api/judgments, GET /api/progress,
// GET /api/export, GET /frames/<id>, POST /api/session.
class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, ServerOptions options);
  ~AnnotationServer();
  // Returns the bound port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();
  void wait_until_ready();

 private:
  AnnotationStore& store_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace dualfact
